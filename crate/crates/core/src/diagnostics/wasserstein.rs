//! Exact Wasserstein-1 distance between weighted planar point sets,
//! ground cost `|x - y|`.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::DensityGrid;
use crate::rng::{domain, CounterRng};
use crate::vec2::Vec2;

use super::network_simplex::min_cost_transport;

/// Hard cap on the combined support size for the exact solver.
pub const EXACT_W1_CAP: usize = 4096;

/// A finitely supported measure.
#[derive(Clone, Debug)]
pub struct WeightedPoints {
    pub points: Vec<Vec2>,
    pub weights: Vec<f64>,
}

impl WeightedPoints {
    /// Empirical measure: every sample gets weight `1/n`.
    pub fn from_samples(samples: &[Vec2]) -> Self {
        let w = 1.0 / samples.len() as f64;
        WeightedPoints {
            points: samples.to_vec(),
            weights: vec![w; samples.len()],
        }
    }

    /// Cell centers of all positive-mass cells, weighted by cell mass.
    pub fn from_grid(grid: &DensityGrid) -> Self {
        let cell_mass = grid.h * grid.h;
        let mut points = Vec::new();
        let mut weights = Vec::new();
        for iy in 0..grid.ny {
            for ix in 0..grid.nx {
                let v = grid.values[grid.idx(ix, iy)];
                if v > 0.0 {
                    points.push(grid.cell_center(ix, iy));
                    weights.push(v * cell_mass);
                }
            }
        }
        WeightedPoints { points, weights }
    }

    /// Grid conversion that respects a support cap: if more than `max_points`
    /// cells carry mass, draws `max_points` cells by mass with the given seed
    /// and merges repeats. Total weight stays the full grid mass.
    pub fn from_grid_capped(grid: &DensityGrid, max_points: usize, seed: u64) -> Self {
        let full = Self::from_grid(grid);
        if full.len() <= max_points {
            return full;
        }
        let mut cum = Vec::with_capacity(full.len());
        let mut acc = 0.0;
        for &w in &full.weights {
            acc += w;
            cum.push(acc);
        }
        let total = acc;
        let mut counts = std::collections::BTreeMap::<usize, u32>::new();
        let mut rng = CounterRng::new(seed, domain::SUBSAMPLE);
        for _ in 0..max_points {
            let u = rng.next_f64() * total;
            let cell = cum.partition_point(|&c| c < u).min(full.len() - 1);
            *counts.entry(cell).or_insert(0) += 1;
        }
        let w_unit = total / max_points as f64;
        let mut points = Vec::with_capacity(counts.len());
        let mut weights = Vec::with_capacity(counts.len());
        for (cell, k) in counts {
            points.push(full.points[cell]);
            weights.push(k as f64 * w_unit);
        }
        WeightedPoints { points, weights }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn total_mass(&self) -> f64 {
        self.weights.iter().sum()
    }
}

/// Uniform subsample without replacement (partial Fisher-Yates), seeded.
pub fn subsample_points(samples: &[Vec2], m: usize, seed: u64) -> Vec<Vec2> {
    if samples.len() <= m {
        return samples.to_vec();
    }
    let mut idx: Vec<u32> = (0..samples.len() as u32).collect();
    let mut rng = CounterRng::new(seed, domain::SUBSAMPLE);
    for k in 0..m {
        let j = k + rng.next_index(samples.len() - k);
        idx.swap(k, j);
    }
    idx[..m].iter().map(|&i| samples[i as usize]).collect()
}

/// Exact optimal-transport cost with ground cost `|x - y|`.
///
/// Requires equal total masses (to 1e-9 relative; the second measure is then
/// rescaled to balance exactly) and combined support at most [`EXACT_W1_CAP`].
pub fn wasserstein1(a: &WeightedPoints, b: &WeightedPoints) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::InvalidParams("empty point set".into()));
    }
    let combined = a.len() + b.len();
    if combined > EXACT_W1_CAP {
        return Err(Error::SizeCap {
            given: combined,
            cap: EXACT_W1_CAP,
        });
    }
    let ma = a.total_mass();
    let mb = b.total_mass();
    if (ma - mb).abs() > 1e-9 * ma.abs().max(mb.abs()) {
        return Err(Error::MassMismatch { a: ma, b: mb });
    }
    let rescale = ma / mb;
    let demand: Vec<f64> = b.weights.iter().map(|w| w * rescale).collect();

    let n = b.len();
    let mut cost = vec![0.0f64; a.len() * n];
    cost.par_chunks_mut(n).enumerate().for_each(|(i, row)| {
        let xi = a.points[i];
        for (j, c) in row.iter_mut().enumerate() {
            *c = (xi - b.points[j]).norm();
        }
    });

    min_cost_transport(&a.weights, &demand, &cost)
}
