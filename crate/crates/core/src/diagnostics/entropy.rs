//! Entropy and Fisher information.
//!
//! Sign convention throughout: `H(f) = int f log f` (the normalization such
//! that H decreases as mass spreads). This is the NEGATIVE of the differential
//! entropy most references use.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::DensityGrid;
use crate::particle::ParticleState;

/// Cells below this density contribute nothing to the Fisher sum.
const FISHER_FLOOR: f64 = 1e-14;

/// `H(f) = h^2 sum f log f` over positive cells (`0 log 0 := 0`).
pub fn entropy_grid(f: &DensityGrid) -> f64 {
    let s: f64 = f
        .values
        .iter()
        .map(|&v| if v > 0.0 { v * v.ln() } else { 0.0 })
        .sum();
    s * f.h * f.h
}

/// `I(f) = h^2 sum |grad f|^2 / f` with centered differences in the interior
/// and one-sided differences on the walls.
pub fn fisher_grid(f: &DensityGrid) -> f64 {
    let (nx, ny, h) = (f.nx, f.ny, f.h);
    let v = &f.values;
    let idx = |ix: usize, iy: usize| iy * nx + ix;
    let mut s = 0.0;
    for iy in 0..ny {
        for ix in 0..nx {
            let c = v[idx(ix, iy)];
            if c <= FISHER_FLOOR {
                continue;
            }
            let gx = if ix == 0 {
                (v[idx(1, iy)] - c) / h
            } else if ix == nx - 1 {
                (c - v[idx(nx - 2, iy)]) / h
            } else {
                (v[idx(ix + 1, iy)] - v[idx(ix - 1, iy)]) / (2.0 * h)
            };
            let gy = if iy == 0 {
                (v[idx(ix, 1)] - c) / h
            } else if iy == ny - 1 {
                (c - v[idx(ix, ny - 2)]) / h
            } else {
                (v[idx(ix, iy + 1)] - v[idx(ix, iy - 1)]) / (2.0 * h)
            };
            s += (gx * gx + gy * gy) / c;
        }
    }
    s * h * h
}

/// `psi(n)` at integer arguments: `-gamma + sum_{m=1}^{n-1} 1/m`.
fn digamma_int(n: usize) -> f64 {
    const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;
    let mut s = 0.0;
    // smallest terms first
    for m in (1..n).rev() {
        s += 1.0 / m as f64;
    }
    s - EULER_GAMMA
}

/// Nearest-neighbor estimate of `int f log f` from samples
/// (Kozachenko-Leonenko with the paper-side sign).
///
/// `H_hat = -[psi(N) - psi(k) + log(pi) + (2/N) sum_i log R_i]` where `R_i`
/// is the distance from sample `i` to its k-th nearest neighbor.
pub fn entropy_knn(samples: &ParticleState, k: usize) -> Result<f64> {
    let pos = &samples.positions;
    let n = pos.len();
    if k == 0 {
        return Err(Error::InvalidParams("k must be >= 1".into()));
    }
    if n < k + 1 {
        return Err(Error::InvalidParams(format!(
            "need at least k+1 = {} samples, got {n}",
            k + 1
        )));
    }

    let kth_sq: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|i| {
            // Running k smallest squared distances, sorted ascending.
            let mut best = vec![f64::INFINITY; k];
            for j in 0..n {
                if j == i {
                    continue;
                }
                let d = (pos[i] - pos[j]).norm_sq();
                if d < best[k - 1] {
                    let mut slot = k - 1;
                    while slot > 0 && best[slot - 1] > d {
                        best[slot] = best[slot - 1];
                        slot -= 1;
                    }
                    best[slot] = d;
                }
            }
            best[k - 1]
        })
        .collect();

    if let Some(i) = kth_sq.iter().position(|&d| d == 0.0) {
        let j = pos
            .iter()
            .enumerate()
            .position(|(j, &p)| j != i && p == pos[i])
            .unwrap_or(i);
        return Err(Error::DuplicatePoints {
            i: i.min(j),
            j: i.max(j),
        });
    }

    let log_sum: f64 = kth_sq.iter().map(|&d| 0.5 * d.ln()).sum();
    let h_diff = digamma_int(n) - digamma_int(k)
        + std::f64::consts::PI.ln()
        + 2.0 * log_sum / n as f64;
    Ok(-h_diff)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::particle::InitialCondition;
    use crate::vec2::Vec2;
    use approx::assert_relative_eq;

    /// H of an isotropic 2D Gaussian with variance s per axis: -(1 + log(2 pi s)).
    fn gaussian_entropy(s: f64) -> f64 {
        -(1.0 + (std::f64::consts::TAU * s).ln())
    }

    fn gaussian_grid(n: usize, half_width: f64, std: f64) -> DensityGrid {
        let h = 2.0 * half_width / n as f64;
        let origin = Vec2::new(-0.5 * (n as f64 - 1.0) * h, -0.5 * (n as f64 - 1.0) * h);
        DensityGrid::from_initial_condition(
            &InitialCondition::Gaussian {
                mean: Vec2::ZERO,
                std,
            },
            n,
            n,
            h,
            origin,
        )
        .unwrap()
    }

    fn uniform_square_grid(n: usize, half_width: f64, side: f64) -> DensityGrid {
        let h = 2.0 * half_width / n as f64;
        let mut g = DensityGrid::zeros_centered(n, n, h);
        for iy in 0..n {
            for ix in 0..n {
                let c = g.cell_center(ix, iy);
                let i = g.idx(ix, iy);
                if c.x.abs() <= 0.5 * side && c.y.abs() <= 0.5 * side {
                    g.values[i] = 1.0;
                }
            }
        }
        g.normalize();
        g
    }

    #[test]
    fn digamma_matches_known_values() {
        const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;
        assert_relative_eq!(digamma_int(1), -EULER_GAMMA, max_relative = 1e-12);
        assert_relative_eq!(digamma_int(2), 1.0 - EULER_GAMMA, max_relative = 1e-12);
        // psi(4) = -gamma + 1 + 1/2 + 1/3
        assert_relative_eq!(
            digamma_int(4),
            -EULER_GAMMA + 11.0 / 6.0,
            max_relative = 1e-12
        );
    }

    #[test]
    fn grid_entropy_of_gaussian() {
        let g = gaussian_grid(256, 6.0, 1.0);
        let h = entropy_grid(&g);
        assert!(
            (h - gaussian_entropy(1.0)).abs() < 0.002,
            "H = {h}, expected {}",
            gaussian_entropy(1.0)
        );
    }

    #[test]
    fn grid_entropy_of_uniform_square_and_dilation() {
        // Uniform on side L: H = log(1/L^2) = -2 log L. The grid value is
        // exact because f is constant on its support.
        let side = 2.0;
        let g = uniform_square_grid(128, 4.0, side);
        let h = entropy_grid(&g);
        // At grid resolution the support is the set of covered cell centers,
        // whose area differs from side^2 by O(h); compare against that area.
        let covered = g.values.iter().filter(|&&v| v > 0.0).count() as f64;
        let area = covered * g.h * g.h;
        assert_relative_eq!(h, -area.ln(), max_relative = 1e-12);

        // Dilating the same shape by 2 lowers the entropy by exactly 2 log 2.
        let g2 = uniform_square_grid(128, 4.0, 2.0 * side);
        let covered2 = g2.values.iter().filter(|&&v| v > 0.0).count() as f64;
        assert_relative_eq!(
            entropy_grid(&g2),
            -(covered2 * g2.h * g2.h).ln(),
            max_relative = 1e-12
        );
        // With side and 2*side both resolving to whole cell rows, the areas
        // differ by exactly 4x and the entropies by 2 log 2.
        assert_relative_eq!(
            entropy_grid(&g) - entropy_grid(&g2),
            (4.0f64).ln(),
            max_relative = 1e-6
        );
    }

    #[test]
    fn fisher_of_gaussian_grids() {
        // I = 2/s for an isotropic Gaussian with per-axis variance s.
        let g1 = gaussian_grid(256, 6.0, 1.0);
        let i1 = fisher_grid(&g1);
        assert!((i1 - 2.0).abs() < 0.02, "I = {i1}, expected 2");
        let g2 = gaussian_grid(256, 9.0, std::f64::consts::SQRT_2);
        let i2 = fisher_grid(&g2);
        assert!((i2 - 1.0).abs() < 0.01, "I = {i2}, expected 1");
    }

    #[test]
    fn knn_entropy_of_gaussian_samples() {
        let cloud = crate::particle::sample_cloud(
            &InitialCondition::Gaussian {
                mean: Vec2::ZERO,
                std: 1.0,
            },
            10_000,
            77,
        )
        .unwrap();
        let state = ParticleState {
            positions: cloud,
            time: 0.0,
        };
        let h = entropy_knn(&state, 4).unwrap();
        assert!(
            (h - gaussian_entropy(1.0)).abs() < 0.05,
            "H_knn = {h}, expected {}",
            gaussian_entropy(1.0)
        );
    }

    #[test]
    fn knn_entropy_of_uniform_square_samples() {
        // Uniform on the unit square: H = 0.
        let mut positions = Vec::with_capacity(10_000);
        let mut rng = crate::rng::CounterRng::new(5, crate::rng::domain::TEST);
        for _ in 0..10_000 {
            positions.push(Vec2::new(rng.next_f64(), rng.next_f64()));
        }
        let h = entropy_knn(&ParticleState { positions, time: 0.0 }, 4).unwrap();
        assert!(h.abs() < 0.05, "H_knn = {h}, expected 0");
    }

    #[test]
    fn knn_translation_invariance_is_bitwise_on_dyadic_inputs() {
        // Quantized coordinates plus a dyadic shift keep differences exact.
        let quant = |v: f64| (v * (1u64 << 30) as f64).round() / (1u64 << 30) as f64;
        let mut rng = crate::rng::CounterRng::new(6, crate::rng::domain::TEST);
        let positions: Vec<Vec2> = (0..500)
            .map(|_| Vec2::new(quant(rng.next_f64() * 4.0), quant(rng.next_f64() * 4.0)))
            .collect();
        let shift = Vec2::new(0.5, -0.25);
        let shifted: Vec<Vec2> = positions.iter().map(|&p| p + shift).collect();
        let h0 = entropy_knn(&ParticleState { positions, time: 0.0 }, 4).unwrap();
        let h1 = entropy_knn(&ParticleState { positions: shifted, time: 0.0 }, 4).unwrap();
        assert_eq!(h0, h1);
    }

    #[test]
    fn knn_duplicate_points_error() {
        let positions = vec![
            Vec2::new(0.0, 0.0),
            Vec2::new(1.0, 0.0),
            Vec2::new(1.0, 0.0),
            Vec2::new(2.0, 0.0),
            Vec2::new(3.0, 0.0),
            Vec2::new(4.0, 0.0),
        ];
        assert!(matches!(
            entropy_knn(&ParticleState { positions, time: 0.0 }, 1),
            Err(Error::DuplicatePoints { .. })
        ));
    }
}
