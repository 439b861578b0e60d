//! Euler-Maruyama time stepping with optional drift taming, event tracking,
//! and deterministic replay.

use crate::error::Result;
use crate::rng::{domain, normal2_at};
use crate::vec2::Vec2;

use super::drift::drift_with_min;
use super::{Event, EventKind, MinDistanceRecord, ParticleState, SimConfig, Trajectory};

/// Brownian increments, addressable by (step, particle).
///
/// Implementations must be pure: the same (step, particle) always yields the
/// same draw. This is what makes coupled runs and permutation tests exact.
pub trait NoiseSource: Sync {
    /// A standard-normal pair for the transition out of step `step`.
    fn normals(&self, step: u64, particle: usize) -> [f64; 2];
}

/// Production noise: counter-based draws keyed by `(seed, step, particle)`.
pub struct CounterNoise {
    pub seed: u64,
}

impl NoiseSource for CounterNoise {
    #[inline]
    fn normals(&self, step: u64, particle: usize) -> [f64; 2] {
        normal2_at(self.seed, domain::STEP_NOISE, step, particle as u64)
    }
}

/// No noise at all; isolates the deterministic Euler limb in tests.
pub struct ZeroNoise;

impl NoiseSource for ZeroNoise {
    #[inline]
    fn normals(&self, _step: u64, _particle: usize) -> [f64; 2] {
        [0.0, 0.0]
    }
}

/// Outcome of one integration step, with the quantities the event log needs.
struct StepOutcome {
    positions: Vec<Vec2>,
    min_distance: f64,
    taming_active: bool,
}

/// Drift reduction below this ratio counts as "taming active" for the event log.
const TAMING_EVENT_THRESHOLD: f64 = 0.01;

fn step_core(
    state: &ParticleState,
    cfg: &SimConfig,
    step: u64,
    noise: &dyn NoiseSource,
) -> Result<StepOutcome> {
    let (drift, min_distance) = drift_with_min(&ParticleState {
        positions: state.positions.clone(),
        time: state.time,
    }, &cfg.params, cfg.force_backend)?;
    let sqrt_2dt = (2.0 * cfg.dt).sqrt();
    let mut taming_active = false;
    let positions = state
        .positions
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let b = drift[i];
            let b = if cfg.taming > 0.0 {
                let q = cfg.dt * b.norm() / cfg.taming;
                if q > TAMING_EVENT_THRESHOLD {
                    taming_active = true;
                }
                b * (1.0 / (1.0 + q))
            } else {
                b
            };
            let [gx, gy] = noise.normals(step, i);
            x + b * cfg.dt + Vec2::new(gx, gy) * sqrt_2dt
        })
        .collect();
    Ok(StepOutcome {
        positions,
        min_distance,
        taming_active,
    })
}

/// One Euler-Maruyama step: `x_i <- x_i + b~_i dt + sqrt(2 dt) xi_i`, where
/// `b~` is the (optionally tamed) pairwise drift. The noise is read at
/// `step = round(state.time / dt)` so that stepping and replaying agree.
pub fn em_step(
    state: &ParticleState,
    cfg: &SimConfig,
    noise: &dyn NoiseSource,
) -> Result<ParticleState> {
    let step = (state.time / cfg.dt).round() as u64;
    let out = step_core(state, cfg, step, noise)?;
    Ok(ParticleState {
        positions: out.positions,
        time: state.time + cfg.dt,
    })
}

/// Full run: sample the initial cloud, integrate to `t_end`, record every
/// `record_stride` steps, and log threshold crossings of the minimum pairwise
/// distance at every step.
pub fn simulate(cfg: &SimConfig) -> Result<Trajectory> {
    let initial = super::sample_initial(cfg)?;
    simulate_from_step(cfg, initial, 0, &CounterNoise { seed: cfg.seed })
}

/// Integrates from an arbitrary recorded state. `start_step` must be the
/// integration step index of `state` (its time is re-derived as
/// `start_step * dt`), which is how checkpointed runs resume: the counter-based
/// noise for the remaining steps is independent of how the run got here.
pub fn simulate_from_step(
    cfg: &SimConfig,
    state: ParticleState,
    start_step: u64,
    noise: &dyn NoiseSource,
) -> Result<Trajectory> {
    cfg.validate()?;
    let total_steps = cfg.n_steps() as u64;
    assert!(
        start_step <= total_steps && start_step % cfg.record_stride as u64 == 0,
        "start_step must be a recorded step within the run"
    );
    let mut state = ParticleState {
        positions: state.positions,
        time: start_step as f64 * cfg.dt,
    };

    let mut thresholds: Vec<f64> = vec![1e-6];
    if cfg.params.eps > 0.0 {
        thresholds.push(cfg.params.eps);
    }

    let mut states = Vec::with_capacity(((total_steps - start_step) / cfg.record_stride as u64) as usize + 1);
    let mut events = Vec::new();
    let mut prev_min = super::min_pairwise_distance(&state);
    let mut overall = MinDistanceRecord {
        dist: prev_min,
        time: state.time,
    };
    let mut taming_was_active = false;
    states.push(state.clone());

    for step in start_step..total_steps {
        let out = step_core(&state, cfg, step, noise)?;
        let t_next = (step + 1) as f64 * cfg.dt;
        // min_distance is measured on the pre-step state; combined with the
        // initial measurement this covers every visited state.
        if out.min_distance < overall.dist {
            overall = MinDistanceRecord {
                dist: out.min_distance,
                time: state.time,
            };
        }
        for &thr in &thresholds {
            if prev_min >= thr && out.min_distance < thr {
                events.push(Event {
                    time: state.time,
                    kind: EventKind::MinDistanceBelow { threshold: thr },
                });
            }
        }
        if out.taming_active && !taming_was_active {
            events.push(Event {
                time: state.time,
                kind: EventKind::TamingActivated,
            });
        }
        taming_was_active = out.taming_active;
        prev_min = out.min_distance;

        state = ParticleState {
            positions: out.positions,
            time: t_next,
        };
        if (step + 1) % cfg.record_stride as u64 == 0 {
            states.push(state.clone());
        }
    }

    // The loop never measures the final state's pairwise distances (they feed
    // the next drift, which doesn't exist); measure them for the record.
    let final_min = super::min_pairwise_distance(&state);
    if final_min < overall.dist {
        overall = MinDistanceRecord {
            dist: final_min,
            time: state.time,
        };
    }
    for &thr in &thresholds {
        if prev_min >= thr && final_min < thr {
            events.push(Event {
                time: state.time,
                kind: EventKind::MinDistanceBelow { threshold: thr },
            });
        }
    }

    Ok(Trajectory {
        states,
        config: cfg.clone(),
        events,
        overall_min_distance: overall,
    })
}
