//! Weak-form residual of a solved run against C^2 test functions.
//!
//! For a weak solution, for every admissible phi and t,
//!
//! ```text
//! int phi f_t  =  int phi f_0  +  int_0^t int Lap(phi) f_s ds
//!                 -  chi int_0^t int int K(x-y) . grad(phi)(x) f_s(dy) f_s(dx) ds
//! ```
//!
//! so the residual returned here is the absolute defect of that identity,
//! evaluated by midpoint quadrature in space and the trapezoid rule in time.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::grid::DensityGrid;
use crate::vec2::Vec2;

use super::convolution::VelocityPlan;
use super::pde::PdeSolution;

/// A small symbolic family of C_b^2 test functions with analytic derivatives.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TestFunction {
    /// phi = 1: every derivative term vanishes, the residual is the mass drift.
    Constant,
    /// phi(x) = exp(-|x - c|^2 / (2 w^2))
    GaussianBump { center: Vec2, width: f64 },
    /// phi(x) = (x - cx)^px (y - cy)^py exp(-|x - c|^2 / (2 w^2))
    PolyBump {
        powers: (u32, u32),
        center: Vec2,
        width: f64,
    },
}

/// (g, g', g'') for g(u) = u^p exp(-u^2 / (2 w^2)).
fn bump_1d(u: f64, p: u32, w2: f64) -> (f64, f64, f64) {
    let e = (-0.5 * u * u / w2).exp();
    let up = u.powi(p as i32);
    let pf = p as f64;
    let g = up * e;
    let d_poly = if p == 0 { 0.0 } else { pf * u.powi(p as i32 - 1) };
    let dg = (d_poly - up * u / w2) * e;
    let dd_poly = if p < 2 {
        0.0
    } else {
        pf * (pf - 1.0) * u.powi(p as i32 - 2)
    };
    let ddg = (dd_poly - (2.0 * pf + 1.0) * up / w2 + up * u * u / (w2 * w2)) * e;
    (g, dg, ddg)
}

impl TestFunction {
    pub fn value(&self, x: Vec2) -> f64 {
        match *self {
            TestFunction::Constant => 1.0,
            TestFunction::GaussianBump { center, width } => {
                let d = x - center;
                (-0.5 * d.norm_sq() / (width * width)).exp()
            }
            TestFunction::PolyBump {
                powers: (px, py),
                center,
                width,
            } => {
                let w2 = width * width;
                bump_1d(x.x - center.x, px, w2).0 * bump_1d(x.y - center.y, py, w2).0
            }
        }
    }

    pub fn gradient(&self, x: Vec2) -> Vec2 {
        match *self {
            TestFunction::Constant => Vec2::ZERO,
            TestFunction::GaussianBump { center, width } => {
                let d = x - center;
                let w2 = width * width;
                d * (-(-0.5 * d.norm_sq() / w2).exp() / w2)
            }
            TestFunction::PolyBump {
                powers: (px, py),
                center,
                width,
            } => {
                let w2 = width * width;
                let (gx, dgx, _) = bump_1d(x.x - center.x, px, w2);
                let (gy, dgy, _) = bump_1d(x.y - center.y, py, w2);
                Vec2::new(dgx * gy, gx * dgy)
            }
        }
    }

    pub fn laplacian(&self, x: Vec2) -> f64 {
        match *self {
            TestFunction::Constant => 0.0,
            TestFunction::GaussianBump { center, width } => {
                let d = x - center;
                let w2 = width * width;
                (d.norm_sq() / (w2 * w2) - 2.0 / w2) * (-0.5 * d.norm_sq() / w2).exp()
            }
            TestFunction::PolyBump {
                powers: (px, py),
                center,
                width,
            } => {
                let w2 = width * width;
                let (gx, _, ddgx) = bump_1d(x.x - center.x, px, w2);
                let (gy, _, ddgy) = bump_1d(x.y - center.y, py, w2);
                ddgx * gy + gx * ddgy
            }
        }
    }
}

fn quad(grid: &DensityGrid, f: impl Fn(Vec2, f64) -> f64) -> f64 {
    let mut s = 0.0;
    for iy in 0..grid.ny {
        for ix in 0..grid.nx {
            s += f(grid.cell_center(ix, iy), grid.values[grid.idx(ix, iy)]);
        }
    }
    s * grid.h * grid.h
}

/// Absolute weak-form defect at time `t` (which must be a recorded frame).
pub fn weak_form_residual(solution: &PdeSolution, phi: &TestFunction, t: f64) -> Result<f64> {
    let cfg = &solution.config;
    let target = solution.frame_at(t)?;
    let f0 = &solution.frames[0];

    let boundary_term = quad(target, |x, v| phi.value(x) * v) - quad(f0, |x, v| phi.value(x) * v);

    // Time integrands on every frame up to t.
    let chi = cfg.params.chi;
    let plan = if chi != 0.0 {
        Some(VelocityPlan::new(cfg.nx, cfg.ny, cfg.h, &cfg.params))
    } else {
        None
    };
    let mut times = Vec::new();
    let mut lap_terms = Vec::new();
    let mut drift_terms = Vec::new();
    for frame in &solution.frames {
        if frame.time > t + 1e-9 * t.max(1.0) {
            break;
        }
        times.push(frame.time);
        lap_terms.push(quad(frame, |x, v| phi.laplacian(x) * v));
        let drift = match &plan {
            Some(p) => {
                let kf = p.apply(frame);
                let mut s = 0.0;
                for iy in 0..frame.ny {
                    for ix in 0..frame.nx {
                        let x = frame.cell_center(ix, iy);
                        s += kf.at(ix, iy).dot(phi.gradient(x)) * frame.values[frame.idx(ix, iy)];
                    }
                }
                s * frame.h * frame.h
            }
            None => 0.0,
        };
        drift_terms.push(drift);
    }

    let trapezoid = |vals: &[f64]| -> f64 {
        let mut s = 0.0;
        for k in 1..vals.len() {
            s += 0.5 * (vals[k] + vals[k - 1]) * (times[k] - times[k - 1]);
        }
        s
    };
    let lap_integral = trapezoid(&lap_terms);
    let drift_integral = trapezoid(&drift_terms);

    Ok((boundary_term - lap_integral + chi * drift_integral).abs())
}
