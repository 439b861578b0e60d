//! Convergence experiment: distance between the N-particle empirical measure
//! at time t and the mean-field density, swept over N and seeds, with the
//! same-law sampling baseline that finite-N W1 values must be judged against.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::meanfield::PdeSolution;
use crate::particle::{simulate, SimConfig};
use crate::rng::{domain, word_at};

use super::wasserstein::{wasserstein1, WeightedPoints};

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct ChaosRow {
    pub n: usize,
    pub seed: u64,
    pub t: f64,
    /// W1(empirical measure of the run, fresh sample of f_t).
    pub w1: f64,
    /// W1 between two independent fresh samples of f_t of the same size.
    pub w1_baseline: f64,
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct ChaosAggregate {
    pub n: usize,
    pub mean_w1: f64,
    pub stderr_w1: f64,
    pub mean_baseline: f64,
    pub stderr_baseline: f64,
}

#[derive(Clone, Debug, Default)]
pub struct ChaosTable {
    pub rows: Vec<ChaosRow>,
    pub aggregates: Vec<ChaosAggregate>,
}

fn mean_stderr(vals: &[f64]) -> (f64, f64) {
    let n = vals.len() as f64;
    let mean = vals.iter().sum::<f64>() / n;
    if vals.len() < 2 {
        return (mean, 0.0);
    }
    let var = vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Runs the particle system for every `(n, seed)` pair, compares its
/// empirical measure at `t` against a reference sample from the solved
/// density, and tabulates alongside same-law baselines.
///
/// `template` supplies everything but `n_particles`, `seed`, and `t_end`
/// (which is set to `t`). References and baselines are drawn from `pde`'s
/// frame at `t` with seeds derived from the row seed.
pub fn chaos_convergence_table(
    pde: &PdeSolution,
    template: &SimConfig,
    n_list: &[usize],
    seeds: &[u64],
    t: f64,
) -> Result<ChaosTable> {
    let f_t = pde.frame_at(t)?;
    let mut rows = Vec::with_capacity(n_list.len() * seeds.len());
    for &n in n_list {
        for &seed in seeds {
            let mut cfg = template.clone();
            cfg.n_particles = n;
            cfg.seed = seed;
            cfg.t_end = t;
            // Only the terminal state matters here.
            cfg.record_stride = cfg.n_steps().max(1);
            let traj = simulate(&cfg)?;
            let cloud = &traj.states.last().unwrap().positions;

            let ref_seed = word_at(seed, domain::DERIVE, n as u64, 1);
            let base_seed_a = word_at(seed, domain::DERIVE, n as u64, 2);
            let base_seed_b = word_at(seed, domain::DERIVE, n as u64, 3);
            let reference = f_t.sample(n, ref_seed);
            let w1 = wasserstein1(
                &WeightedPoints::from_samples(cloud),
                &WeightedPoints::from_samples(&reference),
            )?;
            let base_a = f_t.sample(n, base_seed_a);
            let base_b = f_t.sample(n, base_seed_b);
            let w1_baseline = wasserstein1(
                &WeightedPoints::from_samples(&base_a),
                &WeightedPoints::from_samples(&base_b),
            )?;
            rows.push(ChaosRow {
                n,
                seed,
                t,
                w1,
                w1_baseline,
            });
        }
    }
    rows.sort_by(|a, b| (a.n, a.seed).cmp(&(b.n, b.seed)));

    let mut aggregates = Vec::with_capacity(n_list.len());
    let mut ns: Vec<usize> = n_list.to_vec();
    ns.sort_unstable();
    ns.dedup();
    for n in ns {
        let w1s: Vec<f64> = rows.iter().filter(|r| r.n == n).map(|r| r.w1).collect();
        let bases: Vec<f64> = rows
            .iter()
            .filter(|r| r.n == n)
            .map(|r| r.w1_baseline)
            .collect();
        let (mean_w1, stderr_w1) = mean_stderr(&w1s);
        let (mean_baseline, stderr_baseline) = mean_stderr(&bases);
        aggregates.push(ChaosAggregate {
            n,
            mean_w1,
            stderr_w1,
            mean_baseline,
            stderr_baseline,
        });
    }
    Ok(ChaosTable { rows, aggregates })
}
