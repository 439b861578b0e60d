//! Network simplex for the dense transportation problem.
//!
//! Minimizes `sum f_ij c_ij` over nonnegative flows with prescribed row sums
//! (supplies) and column sums (demands). Arcs are implicit: real arc
//! `a = i * n + j` runs from source `i` to sink `j`; one artificial arc per
//! node connects it to a root and forms the initial spanning-tree basis.
//!
//! The solver is sequential and deterministic: identical inputs produce the
//! identical pivot sequence and optimum on any machine.

use crate::error::{Error, Result};

/// Reduced costs larger than `-tol` count as nonnegative; scaled to the data.
fn pricing_tolerance(cmax: f64) -> f64 {
    1e-12 * (cmax + 1.0)
}

struct Solver<'a> {
    m: usize,
    n: usize,
    cost: &'a [f64],
    big: f64,
    n_real: usize,
    root: usize,
    flow: Vec<f64>,
    in_tree: Vec<bool>,
    /// Adjacent tree arcs per node.
    adj: Vec<Vec<u32>>,
    parent: Vec<usize>,
    pred_arc: Vec<u32>,
    depth: Vec<u32>,
    pot: Vec<f64>,
    stack: Vec<usize>,
}

impl<'a> Solver<'a> {
    fn new(supply: &[f64], demand: &[f64], cost: &'a [f64]) -> Self {
        let (m, n) = (supply.len(), demand.len());
        let n_real = m * n;
        let root = m + n;
        let v_nodes = m + n + 1;
        let n_arcs = n_real + m + n;
        let cmax = cost.iter().fold(0.0f64, |a, &c| a.max(c));
        let big = (cmax + 1.0) * (m + n) as f64;

        let mut flow = vec![0.0; n_arcs];
        let mut in_tree = vec![false; n_arcs];
        let mut adj: Vec<Vec<u32>> = vec![Vec::new(); v_nodes];
        for k in 0..m {
            let a = n_real + k;
            flow[a] = supply[k];
            in_tree[a] = true;
            adj[k].push(a as u32);
            adj[root].push(a as u32);
        }
        for k in 0..n {
            let a = n_real + m + k;
            flow[a] = demand[k];
            in_tree[a] = true;
            adj[m + k].push(a as u32);
            adj[root].push(a as u32);
        }

        let mut s = Solver {
            m,
            n,
            cost,
            big,
            n_real,
            root,
            flow,
            in_tree,
            adj,
            parent: vec![usize::MAX; v_nodes],
            pred_arc: vec![u32::MAX; v_nodes],
            depth: vec![0; v_nodes],
            pot: vec![0.0; v_nodes],
            stack: Vec::with_capacity(v_nodes),
        };
        s.rebuild_tree();
        s
    }

    /// Arc `a` runs from `ends(a).0` to `ends(a).1`.
    #[inline]
    fn ends(&self, a: usize) -> (usize, usize) {
        if a < self.n_real {
            (a / self.n, self.m + a % self.n)
        } else {
            let k = a - self.n_real;
            if k < self.m {
                (k, self.root)
            } else {
                (self.root, k)
            }
        }
    }

    #[inline]
    fn arc_cost(&self, a: usize) -> f64 {
        if a < self.n_real {
            self.cost[a]
        } else {
            self.big
        }
    }

    /// Recomputes parent, depth, and potentials by a DFS over tree arcs.
    /// Potentials satisfy `cost(a) - pot[u] + pot[v] = 0` on tree arcs.
    fn rebuild_tree(&mut self) {
        let root = self.root;
        self.parent[root] = root;
        self.pred_arc[root] = u32::MAX;
        self.depth[root] = 0;
        self.pot[root] = 0.0;
        self.stack.clear();
        self.stack.push(root);
        while let Some(x) = self.stack.pop() {
            // Take adj[x] temporarily to appease the borrow checker.
            let arcs = std::mem::take(&mut self.adj[x]);
            for &a in &arcs {
                if a == self.pred_arc[x] {
                    continue; // the arc to x's own parent
                }
                let (u, v) = self.ends(a as usize);
                let w = if u == x { v } else { u };
                self.parent[w] = x;
                self.pred_arc[w] = a;
                self.depth[w] = self.depth[x] + 1;
                self.pot[w] = if u == w {
                    // arc w -> x: 0 = c - pot[w] + pot[x]
                    self.arc_cost(a as usize) + self.pot[x]
                } else {
                    // arc x -> w: 0 = c - pot[x] + pot[w]
                    self.pot[x] - self.arc_cost(a as usize)
                };
                self.stack.push(w);
            }
            self.adj[x] = arcs;
        }
    }

    #[inline]
    fn reduced_cost(&self, a: usize) -> f64 {
        let (u, v) = self.ends(a);
        self.arc_cost(a) - self.pot[u] + self.pot[v]
    }

    /// One pivot on entering arc `e`.
    ///
    /// The leaving arc follows Cunningham's rule: among the blocking arcs,
    /// take the LAST one met when traversing the cycle in the entering arc's
    /// direction starting from the apex. Together with the strongly feasible
    /// initial basis this rules out degenerate cycling, which matters a lot
    /// here: empirical measures have all-equal weights, the most degenerate
    /// case there is.
    fn pivot(&mut self, e: usize) {
        let (eu, ev) = self.ends(e);
        // Find the apex (lowest common ancestor of the endpoints).
        let (mut x, mut y) = (ev, eu);
        while self.depth[x] > self.depth[y] {
            x = self.parent[x];
        }
        while self.depth[y] > self.depth[x] {
            y = self.parent[y];
        }
        while x != y {
            x = self.parent[x];
            y = self.parent[y];
        }
        let apex = x;

        // Cycle order from the apex: down the eu side to eu, through e, then
        // from ev up back to the apex. Scanning the eu side from eu upward
        // visits that leg in reverse cycle order, so earlier hits win ties
        // there (`<`); on the ev side the upward walk IS cycle order, so
        // later hits win (`<=`), and the ev side as a whole outranks eu's.
        let mut delta = f64::INFINITY;
        let mut leaving: Option<usize> = None;
        let mut node = eu;
        while node != apex {
            let a = self.pred_arc[node] as usize;
            let (u, _v) = self.ends(a);
            // travel parent -> node; against the arc iff it points node -> parent
            if u == node && self.flow[a] < delta {
                delta = self.flow[a];
                leaving = Some(a);
            }
            node = self.parent[node];
        }
        let mut node = ev;
        while node != apex {
            let a = self.pred_arc[node] as usize;
            let (u, _v) = self.ends(a);
            // travel node -> parent; against the arc iff it points parent -> node
            if u != node && self.flow[a] <= delta {
                delta = self.flow[a];
                leaving = Some(a);
            }
            node = self.parent[node];
        }
        let leaving = leaving.expect("transportation cycle always has a reverse arc");

        // Apply the flow change around the cycle.
        if delta > 0.0 {
            self.flow[e] += delta;
            let mut node = ev;
            while node != apex {
                let a = self.pred_arc[node] as usize;
                let (u, _v) = self.ends(a);
                if u == node {
                    self.flow[a] += delta;
                } else {
                    self.flow[a] -= delta;
                }
                node = self.parent[node];
            }
            let mut node = eu;
            while node != apex {
                let a = self.pred_arc[node] as usize;
                let (u, _v) = self.ends(a);
                if u == node {
                    self.flow[a] -= delta;
                } else {
                    self.flow[a] += delta;
                }
                node = self.parent[node];
            }
        }

        // Swap the basis arcs and refresh the tree arrays.
        self.in_tree[leaving] = false;
        let (lu, lv) = self.ends(leaving);
        self.adj[lu].retain(|&a| a as usize != leaving);
        self.adj[lv].retain(|&a| a as usize != leaving);
        self.in_tree[e] = true;
        self.adj[eu].push(e as u32);
        self.adj[ev].push(e as u32);
        self.rebuild_tree();
    }

    fn solve(&mut self) -> Result<f64> {
        let n_arcs = self.n_real;
        let block = ((n_arcs as f64).sqrt().ceil() as usize).clamp(16, 4096);
        let cmax = self.cost.iter().fold(0.0f64, |a, &c| a.max(c));
        let tol = pricing_tolerance(cmax);
        let max_pivots: u64 = 200_000 + 50 * (self.m + self.n) as u64 * 64;

        let mut next = 0usize;
        let mut pivots: u64 = 0;
        loop {
            // Block pricing: scan up to a full wrap, pivot on the most
            // negative reduced cost found within the first offending block.
            let mut best: Option<(usize, f64)> = None;
            let mut scanned = 0usize;
            while scanned < n_arcs {
                let take = block.min(n_arcs - scanned);
                for off in 0..take {
                    let a = (next + scanned + off) % n_arcs;
                    if self.in_tree[a] {
                        continue;
                    }
                    let rc = self.reduced_cost(a);
                    if rc < -tol && best.map_or(true, |(_, b)| rc < b) {
                        best = Some((a, rc));
                    }
                }
                scanned += take;
                if best.is_some() {
                    break;
                }
            }
            match best {
                None => break,
                Some((a, _)) => {
                    next = (a + 1) % n_arcs;
                    self.pivot(a);
                    pivots += 1;
                    if pivots > max_pivots {
                        return Err(Error::InvalidParams(
                            "network simplex exceeded its pivot budget".into(),
                        ));
                    }
                }
            }
        }

        let mut total = 0.0;
        for a in 0..self.n_real {
            if self.flow[a] != 0.0 {
                total += self.flow[a] * self.cost[a];
            }
        }
        Ok(total)
    }
}

/// Optimal transport cost between `supply` (length m) and `demand` (length n)
/// with dense cost matrix `cost[i * n + j]`. Totals must already balance.
pub fn min_cost_transport(supply: &[f64], demand: &[f64], cost: &[f64]) -> Result<f64> {
    assert_eq!(cost.len(), supply.len() * demand.len());
    if supply.is_empty() || demand.is_empty() {
        return Ok(0.0);
    }
    Solver::new(supply, demand, cost).solve()
}
