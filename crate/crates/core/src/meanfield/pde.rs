//! Finite-volume solver for the aggregation-diffusion equation
//! `d f / dt = chi div((K * f) f) + Lap f` on a truncated square domain.
//!
//! Fluxes: first-order upwind for the advection by `v = -chi (K * f)`,
//! centered two-point differences for the diffusion, explicit Euler in time,
//! no-flux walls. Mass is conserved to rounding by the telescoping flux form,
//! and the update is positivity-preserving under the CFL condition.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::DensityGrid;
use crate::kernel::KernelParams;
use crate::particle::InitialCondition;
use crate::vec2::Vec2;

use super::convolution::{VelocityField, VelocityPlan};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PdeConfig {
    /// Model constants; `eps` is ignored here (the convolution handles the
    /// integrable singularity by cell averaging).
    pub params: KernelParams,
    pub nx: usize,
    pub ny: usize,
    pub h: f64,
    /// Center of cell (0, 0).
    pub origin: Vec2,
    pub dt: f64,
    pub t_end: f64,
    pub initial: InitialCondition,
    pub cfl_safety: f64,
    pub record_stride: usize,
}

impl PdeConfig {
    /// Square grid of `n x n` cells covering `[-half_width, half_width]^2`.
    pub fn centered(
        params: KernelParams,
        n: usize,
        half_width: f64,
        t_end: f64,
        initial: InitialCondition,
    ) -> PdeConfig {
        let h = 2.0 * half_width / n as f64;
        let origin = Vec2::new(-0.5 * (n as f64 - 1.0) * h, -0.5 * (n as f64 - 1.0) * h);
        let cfl_safety = 0.8;
        let record_stride = 1;
        let dt = choose_dt(t_end, cfl_safety * h * h / 4.0, record_stride);
        PdeConfig {
            params,
            nx: n,
            ny: n,
            h,
            origin,
            dt,
            t_end,
            initial,
            cfl_safety,
            record_stride,
        }
    }

    /// Re-derives `dt` so a whole number of steps (a multiple of `stride`)
    /// lands exactly on `t_end`.
    pub fn with_stride(mut self, stride: usize) -> PdeConfig {
        self.record_stride = stride;
        self.dt = choose_dt(self.t_end, self.cfl_safety * self.h * self.h / 4.0, stride);
        self
    }

    pub fn n_steps(&self) -> usize {
        (self.t_end / self.dt).round() as usize
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        self.initial.validate()?;
        if self.nx < 16 || self.ny < 16 {
            return Err(Error::InvalidParams(format!(
                "grid must be at least 16x16, got {}x{}",
                self.nx, self.ny
            )));
        }
        if !(self.h > 0.0) {
            return Err(Error::InvalidParams(format!("h must be > 0, got {}", self.h)));
        }
        if !(self.dt > 0.0) {
            return Err(Error::InvalidParams(format!("dt must be > 0, got {}", self.dt)));
        }
        if !(self.t_end >= 0.0) {
            return Err(Error::InvalidParams(format!("t_end must be >= 0, got {}", self.t_end)));
        }
        if !(self.cfl_safety > 0.0 && self.cfl_safety <= 1.0) {
            return Err(Error::InvalidParams(format!(
                "cfl_safety must lie in (0, 1], got {}",
                self.cfl_safety
            )));
        }
        if self.record_stride == 0 {
            return Err(Error::InvalidParams("record_stride must be >= 1".into()));
        }
        let steps = self.n_steps();
        if self.t_end > 0.0 {
            if (steps as f64 * self.dt - self.t_end).abs() > 1e-9 * self.t_end.max(self.dt) {
                return Err(Error::InvalidParams(format!(
                    "t_end = {} is not an integer multiple of dt = {}",
                    self.t_end, self.dt
                )));
            }
            if steps % self.record_stride != 0 {
                return Err(Error::InvalidParams(format!(
                    "step count {steps} is not a multiple of record_stride {}",
                    self.record_stride
                )));
            }
        }
        // Mass must start well inside the box.
        let half_width = 0.5 * (self.nx.min(self.ny) as f64) * self.h;
        let clearance_ok = match &self.initial {
            InitialCondition::Gaussian { mean, std } => {
                mean.x.abs().max(mean.y.abs()) + 5.0 * std <= half_width
            }
            InitialCondition::TwoClusters { centers, std } => centers
                .iter()
                .all(|c| c.x.abs().max(c.y.abs()) + 5.0 * std <= half_width),
            InitialCondition::UniformDisk { center, radius } => {
                center.x.abs().max(center.y.abs()) + 2.0 * radius <= half_width
            }
            InitialCondition::FromFile { .. } => true,
        };
        if !clearance_ok {
            return Err(Error::InvalidParams(
                "initial condition too close to the domain boundary (need >= 5 std clearance)"
                    .into(),
            ));
        }
        Ok(())
    }

    pub fn initial_grid(&self) -> Result<DensityGrid> {
        DensityGrid::from_initial_condition(&self.initial, self.nx, self.ny, self.h, self.origin)
    }
}

/// Largest dt not exceeding `bound` such that `t_end / dt` is an integer
/// multiple of `stride`.
pub fn choose_dt(t_end: f64, bound: f64, stride: usize) -> f64 {
    if t_end <= 0.0 {
        return bound;
    }
    let n0 = (t_end / bound).ceil().max(1.0) as usize;
    let n = n0.div_ceil(stride) * stride;
    t_end / n as f64
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PdeEventKind {
    /// More than `1e-6` mass in the outermost two-cell ring.
    BoundaryMass { mass: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PdeEvent {
    pub time: f64,
    #[serde(flatten)]
    pub kind: PdeEventKind,
}

/// A solved run: density frames every `record_stride` steps plus warnings.
#[derive(Clone, Debug)]
pub struct PdeSolution {
    pub frames: Vec<DensityGrid>,
    pub events: Vec<PdeEvent>,
    pub config: PdeConfig,
}

impl PdeSolution {
    pub fn frame_at(&self, t: f64) -> Result<&DensityGrid> {
        self.frames
            .iter()
            .find(|f| (f.time - t).abs() <= 1e-9 * t.max(1.0))
            .ok_or_else(|| Error::InvalidParams(format!("no recorded frame at t = {t}")))
    }
}

/// Reusable stepper holding the convolution plan for one grid shape.
pub struct PdeStepper {
    cfg: PdeConfig,
    plan: Option<VelocityPlan>,
}

impl PdeStepper {
    pub fn new(cfg: &PdeConfig) -> Result<Self> {
        cfg.validate()?;
        let plan = if cfg.params.chi != 0.0 {
            Some(VelocityPlan::new(cfg.nx, cfg.ny, cfg.h, &cfg.params))
        } else {
            None
        };
        Ok(PdeStepper {
            cfg: cfg.clone(),
            plan,
        })
    }

    pub fn velocity(&self, f: &DensityGrid) -> Option<VelocityField> {
        self.plan.as_ref().map(|p| p.apply(f))
    }

    /// One explicit step. Errors if `dt` violates the CFL precondition
    /// `dt <= cfl_safety * min(h^2/4, h / (chi max|K*f|))`.
    pub fn step(&self, f: &DensityGrid) -> Result<DensityGrid> {
        let cfg = &self.cfg;
        let (nx, ny, h, dt) = (f.nx, f.ny, f.h, cfg.dt);
        let conv = self.velocity(f);
        let mut limit = h * h / 4.0;
        if let Some(ref kf) = conv {
            let vmax = cfg.params.chi * kf.max_norm();
            if vmax > 0.0 {
                limit = limit.min(h / vmax);
            }
        }
        if dt > cfg.cfl_safety * limit {
            return Err(Error::CflViolation {
                dt,
                limit: cfg.cfl_safety * limit,
                time: f.time,
            });
        }

        let chi = cfg.params.chi;
        let idx = |ix: usize, iy: usize| iy * nx + ix;
        let vel = |ix: usize, iy: usize| -> Vec2 {
            match &conv {
                Some(kf) => kf.at(ix, iy) * (-chi),
                None => Vec2::ZERO,
            }
        };

        let mut out = vec![0.0f64; nx * ny];
        out.copy_from_slice(&f.values);
        let r = dt / h;

        // x-direction faces between (ix, iy) and (ix+1, iy).
        for iy in 0..ny {
            for ix in 0..nx - 1 {
                let l = idx(ix, iy);
                let rr = idx(ix + 1, iy);
                let vf = 0.5 * (vel(ix, iy).x + vel(ix + 1, iy).x);
                let adv = vf.max(0.0) * f.values[l] + vf.min(0.0) * f.values[rr];
                let diff = -(f.values[rr] - f.values[l]) / h;
                let flux = (adv + diff) * r;
                out[l] -= flux;
                out[rr] += flux;
            }
        }
        // y-direction faces between (ix, iy) and (ix, iy+1).
        for iy in 0..ny - 1 {
            for ix in 0..nx {
                let l = idx(ix, iy);
                let u = idx(ix, iy + 1);
                let vf = 0.5 * (vel(ix, iy).y + vel(ix, iy + 1).y);
                let adv = vf.max(0.0) * f.values[l] + vf.min(0.0) * f.values[u];
                let diff = -(f.values[u] - f.values[l]) / h;
                let flux = (adv + diff) * r;
                out[l] -= flux;
                out[u] += flux;
            }
        }

        Ok(DensityGrid {
            nx,
            ny,
            h,
            origin: f.origin,
            values: out,
            time: f.time + dt,
        })
    }
}

/// One finite-volume step against a fresh plan (convenience wrapper; loops
/// should use [`PdeStepper`]).
pub fn pde_step(f: &DensityGrid, cfg: &PdeConfig) -> Result<DensityGrid> {
    PdeStepper::new(cfg)?.step(f)
}

/// Integrates from the configured initial density to `t_end`, recording every
/// `record_stride` steps. Emits a boundary-mass warning event the first time
/// more than 1e-6 mass reaches the outermost two-cell ring.
pub fn pde_solve(cfg: &PdeConfig) -> Result<PdeSolution> {
    let stepper = PdeStepper::new(cfg)?;
    let mut f = cfg.initial_grid()?;
    let steps = cfg.n_steps();
    let mut frames = Vec::with_capacity(steps / cfg.record_stride + 1);
    let mut events = Vec::new();
    let mut warned = false;
    frames.push(f.clone());
    for k in 0..steps {
        f = stepper.step(&f)?;
        f.time = (k + 1) as f64 * cfg.dt;
        if (k + 1) % cfg.record_stride == 0 {
            if !warned {
                let ring = f.boundary_ring_mass(2);
                if ring > 1e-6 {
                    events.push(PdeEvent {
                        time: f.time,
                        kind: PdeEventKind::BoundaryMass { mass: ring },
                    });
                    warned = true;
                }
            }
            frames.push(f.clone());
        }
    }
    Ok(PdeSolution {
        frames,
        events,
        config: cfg.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn heat_config(n: usize, half_width: f64, std: f64, t_end: f64) -> PdeConfig {
        PdeConfig::centered(
            KernelParams::new(0.5, 0.0, 0.0).unwrap(),
            n,
            half_width,
            t_end,
            InitialCondition::Gaussian {
                mean: Vec2::ZERO,
                std,
            },
        )
    }

    #[test]
    fn choose_dt_lands_on_t_end() {
        let dt = choose_dt(0.25, 1.3e-4, 8);
        let n = (0.25 / dt).round();
        assert!(dt <= 1.3e-4);
        assert_relative_eq!(n * dt, 0.25, max_relative = 1e-12);
        assert_eq!(n as usize % 8, 0);
    }

    #[test]
    fn mass_is_conserved_per_step() {
        let cfg = heat_config(64, 4.0, 0.5, 0.01);
        let stepper = PdeStepper::new(&cfg).unwrap();
        let f0 = cfg.initial_grid().unwrap();
        let f1 = stepper.step(&f0).unwrap();
        assert!((f1.mass() - f0.mass()).abs() < 1e-12);
        assert!(f1.values.iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn cfl_violation_is_reported() {
        let mut cfg = heat_config(64, 4.0, 0.5, 0.01);
        cfg.dt = cfg.h * cfg.h; // far beyond h^2/4
        let stepper = PdeStepper {
            cfg: cfg.clone(),
            plan: None,
        };
        let f0 = cfg.initial_grid().unwrap();
        assert!(matches!(
            stepper.step(&f0),
            Err(Error::CflViolation { .. })
        ));
    }

    #[test]
    fn heat_flow_matches_analytic_gaussian() {
        // chi = 0: the solution is the heat semigroup, variance grows by 2t
        // per axis. Modest grid here; the acceptance suite runs 256^2.
        let cfg = heat_config(128, 4.0, 0.5, 0.25);
        let sol = pde_solve(&cfg).unwrap();
        let last = sol.frames.last().unwrap();
        assert_relative_eq!(last.time, 0.25, max_relative = 1e-12);
        let var = 0.5f64 * 0.5 + 2.0 * 0.25;
        let std = var.sqrt();
        let mut l1 = 0.0;
        for iy in 0..last.ny {
            for ix in 0..last.nx {
                let x = last.cell_center(ix, iy);
                let exact =
                    (-0.5 * x.norm_sq() / var).exp() / (std::f64::consts::TAU * std * std);
                l1 += (last.values[last.idx(ix, iy)] - exact).abs();
            }
        }
        l1 *= last.h * last.h;
        assert!(l1 < 4e-3, "L1 error vs heat kernel = {l1}");
        // Half-width 4 leaves ~5 sigma of clearance at t_end; the boundary
        // monitor may fire right around its 1e-6 threshold, but nothing more.
        for e in &sol.events {
            let PdeEventKind::BoundaryMass { mass } = e.kind;
            assert!(mass < 1e-5, "serious boundary leak: {e:?}");
        }
    }

    #[test]
    fn t_end_zero_returns_initial_grid_only() {
        let cfg = heat_config(64, 4.0, 0.5, 0.0);
        let sol = pde_solve(&cfg).unwrap();
        assert_eq!(sol.frames.len(), 1);
        assert_eq!(sol.frames[0].time, 0.0);
    }

    #[test]
    fn radial_symmetry_is_preserved() {
        let mut cfg = PdeConfig::centered(
            KernelParams::new(0.5, 1.0, 0.0).unwrap(),
            64,
            4.0,
            0.02,
            InitialCondition::Gaussian {
                mean: Vec2::ZERO,
                std: 0.7,
            },
        );
        let steps = cfg.n_steps();
        cfg = cfg.with_stride(steps);
        let sol = pde_solve(&cfg).unwrap();
        let f = sol.frames.last().unwrap();
        let n = f.nx;
        // The grid is symmetric under the 4-fold reflections about its center.
        for iy in 0..n {
            for ix in 0..n {
                let v = f.values[f.idx(ix, iy)];
                let mx = f.values[f.idx(n - 1 - ix, iy)];
                let my = f.values[f.idx(ix, n - 1 - iy)];
                let mxy = f.values[f.idx(n - 1 - ix, n - 1 - iy)];
                assert!((v - mx).abs() < 1e-10);
                assert!((v - my).abs() < 1e-10);
                assert!((v - mxy).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn second_moment_grows_like_4t_under_pure_diffusion() {
        let cfg = heat_config(128, 5.0, 0.6, 0.2);
        let sol = pde_solve(&cfg).unwrap();
        let m2 = |g: &DensityGrid| {
            let mut s = 0.0;
            for iy in 0..g.ny {
                for ix in 0..g.nx {
                    s += g.cell_center(ix, iy).norm_sq() * g.values[g.idx(ix, iy)];
                }
            }
            s * g.h * g.h
        };
        let start = m2(&sol.frames[0]);
        let end = m2(sol.frames.last().unwrap());
        let expected = start + 4.0 * 0.2;
        assert!(
            ((end - expected) / expected).abs() < 0.01,
            "M2 = {end}, expected {expected}"
        );
    }

    #[test]
    fn translation_equivariance_by_whole_cells() {
        // Shifting the initial condition by exactly k cells shifts the
        // solution identically (away from the walls).
        let base = PdeConfig::centered(
            KernelParams::new(0.5, 1.0, 0.0).unwrap(),
            48,
            4.0,
            0.01,
            InitialCondition::Gaussian {
                mean: Vec2::ZERO,
                std: 0.5,
            },
        );
        let shift_cells = 3i64;
        let mut shifted = base.clone();
        shifted.initial = InitialCondition::Gaussian {
            mean: Vec2::new(shift_cells as f64 * base.h, 0.0),
            std: 0.5,
        };
        let a = pde_solve(&base).unwrap();
        let b = pde_solve(&shifted).unwrap();
        let fa = a.frames.last().unwrap();
        let fb = b.frames.last().unwrap();
        let mut max_diff = 0.0f64;
        for iy in 0..fa.ny {
            for ix in 0..fa.nx - shift_cells as usize {
                let va = fa.values[fa.idx(ix, iy)];
                let vb = fb.values[fb.idx(ix + shift_cells as usize, iy)];
                max_diff = max_diff.max((va - vb).abs());
            }
        }
        assert!(max_diff < 1e-9, "max shifted diff = {max_diff}");
    }

    #[test]
    fn attraction_slows_spreading() {
        // Same initial Gaussian, chi = 1 vs chi = 0: the attracting run has
        // the smaller second moment at t = 0.25.
        let free = heat_config(128, 6.0, 1.0, 0.25);
        let mut pulled = free.clone();
        pulled.params = KernelParams::new(0.5, 1.0, 0.0).unwrap();
        let m2 = |sol: &PdeSolution| {
            let g = sol.frames.last().unwrap();
            let mut s = 0.0;
            for iy in 0..g.ny {
                for ix in 0..g.nx {
                    s += g.cell_center(ix, iy).norm_sq() * g.values[g.idx(ix, iy)];
                }
            }
            s * g.h * g.h
        };
        let m_free = m2(&pde_solve(&free).unwrap());
        let m_pulled = m2(&pde_solve(&pulled).unwrap());
        assert!(
            m_pulled < m_free,
            "chi=1 moment {m_pulled} should be below chi=0 moment {m_free}"
        );
    }
}
