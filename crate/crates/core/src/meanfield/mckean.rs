//! One-particle integration of the mean-field dynamics
//! `dX = -chi (K * f_t)(X) dt + sqrt(2) dB`, driven by a solved density run.
//!
//! Each sample is an independent copy; the returned cloud approximates
//! `f_{t_end}` by i.i.d. draws.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::particle::ParticleState;
use crate::rng::{domain, normal2_at};
use crate::vec2::Vec2;

use super::convolution::{VelocityField, VelocityPlan};
use super::pde::PdeSolution;

/// Sampled mean-field cloud plus integration telemetry.
#[derive(Clone, Debug)]
pub struct McKeanCloud {
    pub state: ParticleState,
    /// Count of boundary reflections (samples that would have left the grid).
    pub reflections: u64,
}

/// Bilinear interpolation of a cell-centered field, clamped at the walls.
fn bilinear(field: &VelocityField, origin: Vec2, h: f64, x: Vec2) -> Vec2 {
    let ux = ((x.x - origin.x) / h).clamp(0.0, (field.nx - 1) as f64);
    let uy = ((x.y - origin.y) / h).clamp(0.0, (field.ny - 1) as f64);
    let ix = (ux.floor() as usize).min(field.nx - 2);
    let iy = (uy.floor() as usize).min(field.ny - 2);
    let fx = ux - ix as f64;
    let fy = uy - iy as f64;
    let v00 = field.at(ix, iy);
    let v10 = field.at(ix + 1, iy);
    let v01 = field.at(ix, iy + 1);
    let v11 = field.at(ix + 1, iy + 1);
    let bottom = v00 * (1.0 - fx) + v10 * fx;
    let top = v01 * (1.0 - fx) + v11 * fx;
    bottom * (1.0 - fy) + top * fy
}

/// Mirror-reflects a coordinate into `[lo, hi]`.
fn reflect(mut u: f64, lo: f64, hi: f64, reflected: &mut bool) -> f64 {
    let span = hi - lo;
    while u < lo || u > hi {
        *reflected = true;
        if u < lo {
            u = 2.0 * lo - u;
        } else {
            u = 2.0 * hi - u;
        }
        // Pathological overshoot (longer than the whole box) cannot recur
        // forever because each bounce folds into the span.
        if (u - lo).abs() > 4.0 * span + 1.0 {
            u = lo + 0.5 * span;
        }
    }
    u
}

/// Integrates `n_samples` independent copies to the solution's final time.
///
/// The velocity `-chi (K * f_t)` is linearly interpolated in time between
/// recorded frames and bilinearly in space. Samples that step outside the
/// domain are reflected at the wall and counted.
pub fn mckean_vlasov_simulate(
    solution: &PdeSolution,
    n_samples: usize,
    dt: f64,
    seed: u64,
) -> Result<McKeanCloud> {
    let cfg = &solution.config;
    let t_end = solution.frames.last().map(|f| f.time).unwrap_or(0.0);
    if !(dt > 0.0) {
        return Err(Error::InvalidParams(format!("dt must be > 0, got {dt}")));
    }
    let n_steps = (t_end / dt).round() as u64;
    if (n_steps as f64 * dt - t_end).abs() > 1e-9 * t_end.max(dt) {
        return Err(Error::InvalidParams(format!(
            "t_end = {t_end} is not an integer multiple of dt = {dt}"
        )));
    }

    // Velocity frames, computed once per recorded density frame.
    let chi = cfg.params.chi;
    let velocities: Option<Vec<VelocityField>> = if chi != 0.0 {
        let plan = VelocityPlan::new(cfg.nx, cfg.ny, cfg.h, &cfg.params);
        Some(solution.frames.iter().map(|f| plan.apply(f)).collect())
    } else {
        None
    };
    let frame_times: Vec<f64> = solution.frames.iter().map(|f| f.time).collect();

    let origin = solution.frames[0].origin;
    let h = cfg.h;
    let x_lo = origin.x - 0.5 * h;
    let x_hi = origin.x + (cfg.nx as f64 - 0.5) * h;
    let y_lo = origin.y - 0.5 * h;
    let y_hi = origin.y + (cfg.ny as f64 - 0.5) * h;

    let velocity_at = |x: Vec2, t: f64| -> Vec2 {
        let Some(frames) = &velocities else {
            return Vec2::ZERO;
        };
        // Locate the bracketing frames.
        let hi = frame_times.partition_point(|&ft| ft <= t);
        let (a, b) = if hi == 0 {
            (0, 0)
        } else if hi >= frame_times.len() {
            (frame_times.len() - 1, frame_times.len() - 1)
        } else {
            (hi - 1, hi)
        };
        let va = bilinear(&frames[a], origin, h, x);
        if a == b {
            return va * (-chi);
        }
        let vb = bilinear(&frames[b], origin, h, x);
        let w = (t - frame_times[a]) / (frame_times[b] - frame_times[a]);
        (va * (1.0 - w) + vb * w) * (-chi)
    };

    let sqrt_2dt = (2.0 * dt).sqrt();
    let initial = solution.frames[0].sample(n_samples, seed);
    let results: Vec<(Vec2, u64)> = initial
        .into_par_iter()
        .enumerate()
        .map(|(i, mut x)| {
            let mut reflections = 0u64;
            for step in 0..n_steps {
                let t = step as f64 * dt;
                let v = velocity_at(x, t);
                let [gx, gy] = normal2_at(seed, domain::MV_NOISE, step, i as u64);
                x = x + v * dt + Vec2::new(gx, gy) * sqrt_2dt;
                let mut bounced = false;
                x.x = reflect(x.x, x_lo, x_hi, &mut bounced);
                x.y = reflect(x.y, y_lo, y_hi, &mut bounced);
                if bounced {
                    reflections += 1;
                }
            }
            (x, reflections)
        })
        .collect();

    let mut positions = Vec::with_capacity(n_samples);
    let mut reflections = 0;
    for (x, r) in results {
        positions.push(x);
        reflections += r;
    }
    Ok(McKeanCloud {
        state: ParticleState {
            positions,
            time: t_end,
        },
        reflections,
    })
}
