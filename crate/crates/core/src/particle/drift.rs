//! Pairwise drift accumulation.
//!
//! Both backends accumulate, for each target particle `i`, the sum over the
//! other particles `j` in a fixed deterministic order, so results are
//! bit-identical for any worker count. The capped kernel evaluates through the
//! same arithmetic path as the exact one whenever `|x_i - x_j| >= eps`, which
//! is what the exact/capped trajectory coupling relies on.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::KernelParams;
use crate::vec2::Vec2;

use super::ParticleState;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ForceBackend {
    /// Per-target loop over all other particles in index order.
    Direct,
    /// Spatial binning: 3x3 neighbor cells first, then the far field.
    /// Nothing is truncated; the kernel has unbounded range. The cell
    /// structure only changes iteration order and memory locality.
    CellList,
}

impl Default for ForceBackend {
    fn default() -> Self {
        ForceBackend::Direct
    }
}

/// Drift of every particle: `b_i = -(chi/N) sum_{j != i} K_[eps](x_i - x_j)`.
///
/// With `eps = 0` a coincident pair is a collision error; with `eps > 0` the
/// capped kernel is evaluated instead.
pub fn compute_drift(
    state: &ParticleState,
    p: &KernelParams,
    backend: ForceBackend,
) -> Result<Vec<Vec2>> {
    Ok(drift_with_min(state, p, backend)?.0)
}

/// Drift plus the minimum pairwise distance, which the pair loops see for free.
pub(crate) fn drift_with_min(
    state: &ParticleState,
    p: &KernelParams,
    backend: ForceBackend,
) -> Result<(Vec<Vec2>, f64)> {
    let n = state.n();
    if p.chi == 0.0 {
        // No interaction: drift is exactly zero for every particle.
        let min = super::min_pairwise_distance_of(&state.positions);
        return Ok((vec![Vec2::ZERO; n], min));
    }
    let per_particle: Vec<(Vec2, f64)> = match backend {
        ForceBackend::Direct => direct_accumulate(state, p)?,
        ForceBackend::CellList => cell_list_accumulate(state, p)?,
    };
    let scale = -p.chi / n as f64;
    let min_sq = per_particle
        .iter()
        .map(|&(_, m)| m)
        .fold(f64::INFINITY, f64::min);
    let drift = per_particle.into_iter().map(|(acc, _)| acc * scale).collect();
    Ok((drift, min_sq.sqrt()))
}

/// Kernel sum and min squared distance for one target, given `j` in a fixed order.
#[inline]
fn accumulate_target<I: Iterator<Item = usize>>(
    i: usize,
    others: I,
    pos: &[Vec2],
    exponent: f64,
    eps_sq: f64,
    time: f64,
) -> Result<(Vec2, f64)> {
    let xi = pos[i];
    let mut acc = Vec2::ZERO;
    let mut min_sq = f64::INFINITY;
    for j in others {
        let d = xi - pos[j];
        let r_sq = d.norm_sq();
        if r_sq < min_sq {
            min_sq = r_sq;
        }
        if r_sq == 0.0 {
            if eps_sq > 0.0 {
                continue; // K_eps(0) = 0: coincident pair contributes nothing
            }
            return Err(Error::Collision {
                i: i.min(j),
                j: i.max(j),
                time,
            });
        }
        if r_sq >= eps_sq {
            acc += d * r_sq.powf(exponent);
        } else {
            acc += d * eps_sq.powf(exponent);
        }
    }
    Ok((acc, min_sq))
}

fn direct_accumulate(state: &ParticleState, p: &KernelParams) -> Result<Vec<(Vec2, f64)>> {
    let n = state.n();
    let pos = &state.positions;
    let exponent = -0.5 * (p.alpha + 1.0);
    let eps_sq = p.eps * p.eps;
    (0..n)
        .into_par_iter()
        .map(|i| {
            accumulate_target(
                i,
                (0..n).filter(|&j| j != i),
                pos,
                exponent,
                eps_sq,
                state.time,
            )
        })
        .collect()
}

/// Flat spatial bins over the current bounding box. 16x16 cells is enough to
/// put near-field pairs first at desk scale; the far field is still summed.
struct CellGrid {
    origin: Vec2,
    cell: f64,
    nx: usize,
    ny: usize,
    /// Particle ids grouped by cell, ascending within each cell.
    members: Vec<Vec<u32>>,
}

impl CellGrid {
    fn build(pos: &[Vec2], min_cell: f64) -> CellGrid {
        let (mut lo, mut hi) = (pos[0], pos[0]);
        for &x in pos {
            lo.x = lo.x.min(x.x);
            lo.y = lo.y.min(x.y);
            hi.x = hi.x.max(x.x);
            hi.y = hi.y.max(x.y);
        }
        let extent = (hi.x - lo.x).max(hi.y - lo.y).max(1e-12);
        let cell = (extent / 16.0).max(min_cell);
        let nx = ((hi.x - lo.x) / cell).floor() as usize + 1;
        let ny = ((hi.y - lo.y) / cell).floor() as usize + 1;
        let mut members = vec![Vec::new(); nx * ny];
        for (id, &x) in pos.iter().enumerate() {
            let cx = (((x.x - lo.x) / cell).floor() as usize).min(nx - 1);
            let cy = (((x.y - lo.y) / cell).floor() as usize).min(ny - 1);
            members[cy * nx + cx].push(id as u32);
        }
        CellGrid {
            origin: lo,
            cell,
            nx,
            ny,
            members,
        }
    }

    fn cell_of(&self, x: Vec2) -> (usize, usize) {
        let cx = (((x.x - self.origin.x) / self.cell).floor() as usize).min(self.nx - 1);
        let cy = (((x.y - self.origin.y) / self.cell).floor() as usize).min(self.ny - 1);
        (cx, cy)
    }
}

fn cell_list_accumulate(state: &ParticleState, p: &KernelParams) -> Result<Vec<(Vec2, f64)>> {
    let n = state.n();
    let pos = &state.positions;
    let exponent = -0.5 * (p.alpha + 1.0);
    let eps_sq = p.eps * p.eps;
    let grid = CellGrid::build(pos, p.eps);
    (0..n)
        .into_par_iter()
        .map(|i| {
            let (cx, cy) = grid.cell_of(pos[i]);
            // Near field: the 3x3 block around the target's cell, ascending
            // linear index; then every remaining cell, also ascending.
            let mut near = [usize::MAX; 9];
            let mut k = 0;
            for dy in -1i64..=1 {
                for dx in -1i64..=1 {
                    let ux = cx as i64 + dx;
                    let uy = cy as i64 + dy;
                    if ux >= 0 && uy >= 0 && (ux as usize) < grid.nx && (uy as usize) < grid.ny {
                        near[k] = uy as usize * grid.nx + ux as usize;
                        k += 1;
                    }
                }
            }
            near[..k].sort_unstable();
            let near = &near[..k];
            let order = near
                .iter()
                .copied()
                .chain((0..grid.members.len()).filter(|c| !near.contains(c)))
                .flat_map(|c| grid.members[c].iter().map(|&id| id as usize))
                .filter(|&j| j != i);
            accumulate_target(i, order, pos, exponent, eps_sq, state.time)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::particle::{sample_initial, InitialCondition};

    fn params(alpha: f64, chi: f64, eps: f64) -> KernelParams {
        KernelParams::new(alpha, chi, eps).unwrap()
    }

    fn state(pts: Vec<Vec2>) -> ParticleState {
        ParticleState {
            positions: pts,
            time: 0.0,
        }
    }

    #[test]
    fn two_particle_drift() {
        // b_1 = -(chi/N) K(x_1 - x_2) = -(1/2) K((-1, 0)) = (0.5, 0).
        let st = state(vec![Vec2::ZERO, Vec2::new(1.0, 0.0)]);
        let b = compute_drift(&st, &params(0.5, 1.0, 0.0), ForceBackend::Direct).unwrap();
        assert_eq!(b[0], Vec2::new(0.5, 0.0));
        assert_eq!(b[1], Vec2::new(-0.5, 0.0));
    }

    #[test]
    fn zero_coupling_gives_zero_drift() {
        let st = state(vec![Vec2::ZERO, Vec2::new(1.0, 0.0), Vec2::new(0.0, 2.0)]);
        let b = compute_drift(&st, &params(0.5, 0.0, 0.0), ForceBackend::Direct).unwrap();
        assert!(b.iter().all(|&v| v == Vec2::ZERO));
    }

    #[test]
    fn collision_is_an_error_for_exact_kernel_only() {
        let st = state(vec![Vec2::new(1.0, 1.0), Vec2::new(1.0, 1.0)]);
        assert!(matches!(
            compute_drift(&st, &params(0.5, 1.0, 0.0), ForceBackend::Direct),
            Err(Error::Collision { i: 0, j: 1, .. })
        ));
        let b = compute_drift(&st, &params(0.5, 1.0, 0.1), ForceBackend::Direct).unwrap();
        assert_eq!(b[0], Vec2::ZERO);
    }

    fn random_state(n: usize, seed: u64) -> ParticleState {
        let cfg = crate::particle::tests::test_config(n);
        let mut cfg = cfg;
        cfg.seed = seed;
        cfg.initial = InitialCondition::Gaussian {
            mean: Vec2::new(0.3, -0.2),
            std: 1.5,
        };
        sample_initial(&cfg).unwrap()
    }

    #[test]
    fn momentum_is_conserved() {
        for seed in [1, 2, 3] {
            let st = random_state(200, seed);
            let b = compute_drift(&st, &params(0.5, 2.0, 0.0), ForceBackend::Direct).unwrap();
            let total = b.iter().fold(Vec2::ZERO, |a, &v| a + v);
            let max_b = b.iter().map(|v| v.norm()).fold(0.0, f64::max);
            let tol = 1e-12 * st.n() as f64 * max_b;
            assert!(total.norm() <= tol, "sum = {total:?}, tol = {tol}");
        }
    }

    #[test]
    fn backends_agree() {
        for (seed, eps) in [(5, 0.0), (6, 0.0), (7, 1e-2)] {
            let st = random_state(300, seed);
            let p = params(0.5, 1.0, eps);
            let direct = compute_drift(&st, &p, ForceBackend::Direct).unwrap();
            let cell = compute_drift(&st, &p, ForceBackend::CellList).unwrap();
            for (a, b) in direct.iter().zip(&cell) {
                assert!((a.x - b.x).abs() <= 1e-12 * p.chi);
                assert!((a.y - b.y).abs() <= 1e-12 * p.chi);
            }
        }
    }

    #[test]
    fn min_distance_piggybacks_on_drift() {
        let st = state(vec![Vec2::ZERO, Vec2::new(1.0, 0.0), Vec2::new(0.0, 0.25)]);
        let (_, min) = drift_with_min(&st, &params(0.5, 1.0, 0.0), ForceBackend::Direct).unwrap();
        assert_eq!(min, 0.25);
        let (_, min) = drift_with_min(&st, &params(0.5, 0.0, 0.0), ForceBackend::Direct).unwrap();
        assert_eq!(min, 0.25);
    }
}
