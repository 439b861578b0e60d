//! The entropy balance of the limiting equation:
//!
//! ```text
//! H(f_t) + int_0^t I(f_s) ds
//!   = H(f_0) + chi (1 - alpha) int_0^t int int |x - y|^{-(alpha+1)} f_s f_s ds
//! ```
//!
//! The residual of this identity on a solved run measures the scheme error;
//! with chi = 0 it reduces to the heat-flow identity dH/dt = -I.

use crate::error::Result;
use crate::meanfield::{PdeSolution, RadialPlan};

use super::entropy::{entropy_grid, fisher_grid};
use super::interaction_with_plan;

/// Absolute defect of the balance at time `t` (a recorded frame), with
/// trapezoid quadrature for the time integrals.
pub fn entropy_balance_residual(solution: &PdeSolution, t: f64) -> Result<f64> {
    let cfg = &solution.config;
    let target = solution.frame_at(t)?;
    let f0 = &solution.frames[0];

    let chi = cfg.params.chi;
    let alpha = cfg.params.alpha;
    let plan = if chi != 0.0 {
        Some(RadialPlan::new(cfg.nx, cfg.ny, cfg.h, alpha + 1.0)?)
    } else {
        None
    };

    let mut times = Vec::new();
    let mut fisher = Vec::new();
    let mut interaction = Vec::new();
    for frame in &solution.frames {
        if frame.time > t + 1e-9 * t.max(1.0) {
            break;
        }
        times.push(frame.time);
        fisher.push(fisher_grid(frame));
        if let Some(p) = &plan {
            interaction.push(interaction_with_plan(frame, p));
        }
    }

    let trapezoid = |vals: &[f64]| -> f64 {
        let mut s = 0.0;
        for k in 1..vals.len() {
            s += 0.5 * (vals[k] + vals[k - 1]) * (times[k] - times[k - 1]);
        }
        s
    };
    let fisher_integral = trapezoid(&fisher);
    let production = if plan.is_some() {
        chi * (1.0 - alpha) * trapezoid(&interaction)
    } else {
        0.0
    };

    Ok((entropy_grid(target) + fisher_integral - entropy_grid(f0) - production).abs())
}
