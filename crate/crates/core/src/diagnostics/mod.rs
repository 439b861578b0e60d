//! Statistical functionals of particle clouds and grid densities, and the
//! identity/convergence checks built from them.

mod balance;
mod chaos;
mod entropy;
mod network_simplex;
mod wasserstein;

pub use balance::entropy_balance_residual;
pub use chaos::{chaos_convergence_table, ChaosAggregate, ChaosRow, ChaosTable};
pub use entropy::{entropy_grid, entropy_knn, fisher_grid};
pub use wasserstein::{
    subsample_points, wasserstein1, WeightedPoints, EXACT_W1_CAP,
};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::DensityGrid;
use crate::meanfield::RadialPlan;
use crate::particle::{log_distance_stat, min_pairwise_distance, ParticleState};
use crate::vec2::Vec2;

/// `M_k = (1/N) sum |x_i|^k`.
pub fn moment_samples(samples: &[Vec2], k: f64) -> f64 {
    let s: f64 = samples.iter().map(|p| p.norm_sq().powf(0.5 * k)).sum();
    s / samples.len() as f64
}

/// `M_k = h^2 sum |x|^k f(x)`.
pub fn moment_grid(f: &DensityGrid, k: f64) -> f64 {
    let mut s = 0.0;
    for iy in 0..f.ny {
        for ix in 0..f.nx {
            s += f.cell_center(ix, iy).norm_sq().powf(0.5 * k) * f.values[f.idx(ix, iy)];
        }
    }
    s * f.h * f.h
}

/// Pairwise inverse-distance moment of a cloud:
/// `(1 / (N (N-1))) sum_{i != j} |x_i - x_j|^{-gamma}`.
pub fn interaction_integral_samples(samples: &[Vec2], gamma: f64) -> Result<f64> {
    if !(gamma > 0.0 && gamma < 2.0) {
        return Err(Error::InvalidParams(format!(
            "gamma must lie in (0, 2), got {gamma}"
        )));
    }
    let n = samples.len();
    if n < 2 {
        return Err(Error::InvalidParams("need at least two samples".into()));
    }
    let sums: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut s = 0.0;
            for j in (i + 1)..n {
                let r_sq = (samples[i] - samples[j]).norm_sq();
                s += r_sq.powf(-0.5 * gamma); // +inf marks duplicates
            }
            s
        })
        .collect();
    let total: f64 = sums.iter().sum();
    if !total.is_finite() {
        for i in 0..n {
            for j in (i + 1)..n {
                if samples[i] == samples[j] {
                    return Err(Error::DuplicatePoints { i, j });
                }
            }
        }
    }
    Ok(2.0 * total / (n as f64 * (n as f64 - 1.0)))
}

/// Grid version of the same functional,
/// `int int f(x) f(y) |x - y|^{-gamma} dx dy`, computed as one scalar
/// convolution; the singular diagonal cell uses the analytic cell average.
pub fn interaction_integral_grid(f: &DensityGrid, gamma: f64) -> Result<f64> {
    let plan = RadialPlan::new(f.nx, f.ny, f.h, gamma)?;
    Ok(interaction_with_plan(f, &plan))
}

/// Plan-reusing variant for loops over many frames of one shape.
pub fn interaction_with_plan(f: &DensityGrid, plan: &RadialPlan) -> f64 {
    let u = plan.apply(f);
    let dot: f64 = f.values.iter().zip(&u).map(|(a, b)| a * b).sum();
    dot * f.h * f.h
}

/// Per-time-point summary of a cloud or a density frame.
///
/// `entropy` follows the convention `H = int f log f`. `fisher` is grid-only
/// (sample-based Fisher estimates are too noisy to report).
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct DiagnosticsReport {
    pub time: f64,
    pub entropy: f64,
    pub fisher: Option<f64>,
    pub m1: f64,
    pub w1_to_reference: Option<f64>,
    pub s_stat: Option<f64>,
    pub min_dist: Option<f64>,
    pub interaction: Option<f64>,
}

impl DiagnosticsReport {
    /// Grid diagnostics; `interaction_gamma` adds the pairwise inverse moment.
    pub fn from_grid(f: &DensityGrid, interaction_gamma: Option<f64>) -> Result<Self> {
        let interaction = match interaction_gamma {
            Some(g) => Some(interaction_integral_grid(f, g)?),
            None => None,
        };
        Ok(DiagnosticsReport {
            time: f.time,
            entropy: entropy_grid(f),
            fisher: Some(fisher_grid(f)),
            m1: moment_grid(f, 1.0),
            w1_to_reference: None,
            s_stat: None,
            min_dist: None,
            interaction,
        })
    }

    /// Cloud diagnostics with a k-NN entropy estimate.
    pub fn from_particles(
        state: &ParticleState,
        knn_k: usize,
        interaction_gamma: Option<f64>,
    ) -> Result<Self> {
        let interaction = match interaction_gamma {
            Some(g) => Some(interaction_integral_samples(&state.positions, g)?),
            None => None,
        };
        Ok(DiagnosticsReport {
            time: state.time,
            entropy: entropy_knn(state, knn_k)?,
            fisher: None,
            m1: moment_samples(&state.positions, 1.0),
            w1_to_reference: None,
            s_stat: Some(log_distance_stat(state)?),
            min_dist: Some(min_pairwise_distance(state)),
            interaction,
        })
    }
}
