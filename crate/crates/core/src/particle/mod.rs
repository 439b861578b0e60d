//! The interacting N-particle system: state and configuration types,
//! initial-condition sampling, and pairwise statistics.

mod drift;
mod io;
mod simulate;

pub use drift::{compute_drift, ForceBackend};
pub use io::{
    read_trajectory, read_trajectory_partial, write_states, write_trajectory, TrajectoryFile,
    TRAJ_MAGIC,
};
pub use simulate::{em_step, simulate, simulate_from_step, CounterNoise, NoiseSource, ZeroNoise};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::KernelParams;
use crate::rng::{domain, CounterRng};
use crate::vec2::Vec2;

/// Positions of all particles at one instant.
#[derive(Clone, Debug, PartialEq)]
pub struct ParticleState {
    pub positions: Vec<Vec2>,
    pub time: f64,
}

impl ParticleState {
    pub fn n(&self) -> usize {
        self.positions.len()
    }
}

/// Law of the initial datum. Every built-in kind has a finite first moment and
/// finite entropy.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialCondition {
    Gaussian { mean: Vec2, std: f64 },
    UniformDisk { center: Vec2, radius: f64 },
    TwoClusters { centers: [Vec2; 2], std: f64 },
    FromFile { path: std::path::PathBuf },
}

impl InitialCondition {
    pub fn validate(&self) -> Result<()> {
        let ok = match self {
            InitialCondition::Gaussian { mean, std } => mean.is_finite() && *std > 0.0,
            InitialCondition::UniformDisk { center, radius } => {
                center.is_finite() && *radius > 0.0
            }
            InitialCondition::TwoClusters { centers, std } => {
                centers.iter().all(|c| c.is_finite()) && *std > 0.0
            }
            InitialCondition::FromFile { .. } => true,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParams(format!(
                "invalid initial condition: {self:?}"
            )))
        }
    }
}

/// How per-particle drifts are accumulated.
pub use drift::ForceBackend as Backend;

/// Full description of one particle run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    pub n_particles: usize,
    pub params: KernelParams,
    pub dt: f64,
    pub t_end: f64,
    pub seed: u64,
    pub initial: InitialCondition,
    pub record_stride: usize,
    /// Drift cap scale: `b -> b / (1 + dt |b| / taming)`. 0 disables taming.
    pub taming: f64,
    pub force_backend: ForceBackend,
}

impl SimConfig {
    /// Number of integration steps (`t_end / dt`, which must be integral).
    pub fn n_steps(&self) -> usize {
        (self.t_end / self.dt).round() as usize
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        self.initial.validate()?;
        if self.n_particles < 2 {
            return Err(Error::InvalidParams(format!(
                "n_particles must be >= 2, got {}",
                self.n_particles
            )));
        }
        if !(self.dt > 0.0) {
            return Err(Error::InvalidParams(format!("dt must be > 0, got {}", self.dt)));
        }
        if !(self.t_end >= 0.0) {
            return Err(Error::InvalidParams(format!(
                "t_end must be >= 0, got {}",
                self.t_end
            )));
        }
        if self.t_end > 0.0 && self.dt > self.t_end {
            return Err(Error::InvalidParams(format!(
                "dt = {} exceeds t_end = {}",
                self.dt, self.t_end
            )));
        }
        if self.record_stride == 0 {
            return Err(Error::InvalidParams("record_stride must be >= 1".into()));
        }
        if !(self.taming >= 0.0) {
            return Err(Error::InvalidParams(format!(
                "taming must be >= 0, got {}",
                self.taming
            )));
        }
        let steps = self.n_steps();
        if (steps as f64 * self.dt - self.t_end).abs() > 1e-9 * self.t_end.max(self.dt) {
            return Err(Error::InvalidParams(format!(
                "t_end = {} is not an integer multiple of dt = {}",
                self.t_end, self.dt
            )));
        }
        if steps % self.record_stride != 0 {
            return Err(Error::InvalidParams(format!(
                "step count {} is not a multiple of record_stride {}",
                steps, self.record_stride
            )));
        }
        Ok(())
    }
}

/// Events observed while integrating.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EventKind {
    /// Minimum pairwise distance dropped below `threshold`.
    MinDistanceBelow { threshold: f64 },
    /// The drift cap started reducing some particle's drift by more than 1%.
    TamingActivated,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub time: f64,
    #[serde(flatten)]
    pub kind: EventKind,
}

/// Smallest pairwise distance seen anywhere in a run, with the step time.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MinDistanceRecord {
    pub dist: f64,
    pub time: f64,
}

/// A recorded run: states every `record_stride` steps plus the event log.
#[derive(Clone, Debug)]
pub struct Trajectory {
    pub states: Vec<ParticleState>,
    pub config: SimConfig,
    pub events: Vec<Event>,
    /// Tracked at every integration step, not just recorded ones.
    pub overall_min_distance: MinDistanceRecord,
}

/// Samples N i.i.d. particles from `cfg.initial`. Each particle owns its own
/// counter stream, so the draw for particle `i` does not depend on `N`.
pub fn sample_initial(cfg: &SimConfig) -> Result<ParticleState> {
    cfg.validate()?;
    let positions = sample_cloud(&cfg.initial, cfg.n_particles, cfg.seed)?;
    Ok(ParticleState {
        positions,
        time: 0.0,
    })
}

/// `n` i.i.d. draws from `law`, usable outside a full `SimConfig`.
pub fn sample_cloud(law: &InitialCondition, n: usize, seed: u64) -> Result<Vec<Vec2>> {
    law.validate()?;
    match law {
        InitialCondition::Gaussian { mean, std } => Ok((0..n)
            .map(|i| {
                let [a, b] = CounterRng::with_item(seed, domain::INIT, i as u64).next_normal_pair();
                *mean + Vec2::new(a, b) * *std
            })
            .collect()),
        InitialCondition::UniformDisk { center, radius } => Ok((0..n)
            .map(|i| {
                let mut rng = CounterRng::with_item(seed, domain::INIT, i as u64);
                loop {
                    let x = 2.0 * rng.next_f64() - 1.0;
                    let y = 2.0 * rng.next_f64() - 1.0;
                    if x * x + y * y <= 1.0 {
                        return *center + Vec2::new(x, y) * *radius;
                    }
                }
            })
            .collect()),
        InitialCondition::TwoClusters { centers, std } => Ok((0..n)
            .map(|i| {
                let mut rng = CounterRng::with_item(seed, domain::INIT, i as u64);
                let c = if rng.next_f64() <= 0.5 { centers[0] } else { centers[1] };
                let [a, b] = rng.next_normal_pair();
                c + Vec2::new(a, b) * *std
            })
            .collect()),
        InitialCondition::FromFile { path } => {
            let text = std::fs::read_to_string(path)?;
            let pts: Vec<[f64; 2]> = serde_json::from_str(&text)
                .map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
            if pts.len() < n {
                return Err(Error::Format(format!(
                    "{}: {} points, need {n}",
                    path.display(),
                    pts.len()
                )));
            }
            let positions: Vec<Vec2> = pts[..n].iter().map(|&p| Vec2::from(p)).collect();
            if let Some(bad) = positions.iter().find(|p| !p.is_finite()) {
                return Err(Error::Format(format!(
                    "{}: non-finite position {bad:?}",
                    path.display()
                )));
            }
            Ok(positions)
        }
    }
}

/// `min_{i<j} |x_i - x_j|`.
pub fn min_pairwise_distance(state: &ParticleState) -> f64 {
    min_pairwise_distance_of(&state.positions)
}

pub(crate) fn min_pairwise_distance_of(positions: &[Vec2]) -> f64 {
    let n = positions.len();
    if n < 2 {
        return f64::INFINITY;
    }
    let min_sq = positions
        .par_iter()
        .enumerate()
        .map(|(i, &xi)| {
            let mut local = f64::INFINITY;
            for &xj in &positions[i + 1..] {
                let d = (xi - xj).norm_sq();
                if d < local {
                    local = d;
                }
            }
            local
        })
        .reduce(|| f64::INFINITY, f64::min);
    min_sq.sqrt()
}

/// The pairwise log-distance statistic `(1/N^2) sum_{i != j} log |x_i - x_j|`.
pub fn log_distance_stat(state: &ParticleState) -> Result<f64> {
    let n = state.n();
    let pos = &state.positions;
    let sums: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut s = 0.0;
            for j in (i + 1)..n {
                let r_sq = (pos[i] - pos[j]).norm_sq();
                // log |x| as half the log of |x|^2; -inf marks a collision.
                s += 0.5 * r_sq.ln();
            }
            s
        })
        .collect();
    let total: f64 = sums.iter().sum();
    if !total.is_finite() {
        // Locate the offending pair for the report.
        for i in 0..n {
            for j in (i + 1)..n {
                if pos[i] == pos[j] {
                    return Err(Error::Collision {
                        i,
                        j,
                        time: state.time,
                    });
                }
            }
        }
    }
    Ok(2.0 * total / (n as f64 * n as f64))
}
