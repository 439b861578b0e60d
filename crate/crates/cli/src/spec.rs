//! Experiment specification: strict JSON schema, defaulting, range checks.
//!
//! Validation failures carry a JSON pointer to the offending field.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use ks_core::meanfield::{choose_dt, PdeConfig};
use ks_core::particle::ForceBackend;
use ks_core::{InitialCondition, KernelParams, SimConfig, Vec2};

use crate::error::CliError;
use crate::strict_json::check_strict;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    ParticleRun,
    PdeRun,
    ChaosTable,
    EntropyBalance,
    CouplingCheck,
    CollisionScan,
}

fn default_version() -> u32 {
    1
}

fn default_seeds() -> Vec<u64> {
    vec![0]
}

/// Raw document as written by the user; everything optional gets defaulted
/// and range-checked in [`ExperimentSpec::resolve`].
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    #[serde(default = "default_version")]
    pub version: u32,
    pub kind: ExperimentKind,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub sim: Option<SimSpec>,
    #[serde(default)]
    pub pde: Option<PdeSpec>,
    #[serde(default)]
    pub chaos: Option<ChaosSpec>,
    #[serde(default)]
    pub coupling: Option<CouplingSpec>,
    #[serde(default)]
    pub collision_scan: Option<CollisionScanSpec>,
    #[serde(default)]
    pub balance: Option<BalanceSpec>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimSpec {
    #[serde(default = "d_n_particles")]
    pub n_particles: usize,
    #[serde(default = "d_alpha")]
    pub alpha: f64,
    #[serde(default = "d_chi")]
    pub chi: f64,
    #[serde(default)]
    pub eps: f64,
    #[serde(default = "d_sim_dt")]
    pub dt: f64,
    #[serde(default = "d_sim_t_end")]
    pub t_end: f64,
    #[serde(default = "d_record_stride")]
    pub record_stride: usize,
    #[serde(default)]
    pub taming: f64,
    #[serde(default)]
    pub force_backend: ForceBackend,
    #[serde(default = "d_initial")]
    pub initial: InitialCondition,
}

fn d_n_particles() -> usize {
    64
}
fn d_alpha() -> f64 {
    0.5
}
fn d_chi() -> f64 {
    1.0
}
fn d_sim_dt() -> f64 {
    1e-3
}
fn d_sim_t_end() -> f64 {
    1.0
}
fn d_record_stride() -> usize {
    10
}
fn d_initial() -> InitialCondition {
    InitialCondition::Gaussian {
        mean: Vec2::ZERO,
        std: 1.0,
    }
}

impl Default for SimSpec {
    fn default() -> Self {
        serde_json::from_str("{}").unwrap()
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PdeSpec {
    #[serde(default = "d_alpha")]
    pub alpha: f64,
    #[serde(default = "d_chi")]
    pub chi: f64,
    #[serde(default = "d_nx")]
    pub nx: usize,
    #[serde(default)]
    pub ny: Option<usize>,
    #[serde(default = "d_half_width")]
    pub half_width: f64,
    /// Omit to derive from the diffusive CFL bound.
    #[serde(default)]
    pub dt: Option<f64>,
    #[serde(default = "d_pde_t_end")]
    pub t_end: f64,
    #[serde(default = "d_cfl")]
    pub cfl_safety: f64,
    /// Omit to record about 50 frames.
    #[serde(default)]
    pub record_stride: Option<usize>,
    #[serde(default = "d_initial")]
    pub initial: InitialCondition,
}

fn d_nx() -> usize {
    128
}
fn d_half_width() -> f64 {
    6.0
}
fn d_pde_t_end() -> f64 {
    0.25
}
fn d_cfl() -> f64 {
    0.8
}

impl Default for PdeSpec {
    fn default() -> Self {
        serde_json::from_str("{}").unwrap()
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChaosSpec {
    pub n_list: Vec<usize>,
    /// Comparison time; defaults to the PDE's t_end.
    #[serde(default)]
    pub t: Option<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CouplingSpec {
    pub eps: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CollisionScanSpec {
    pub eps_list: Vec<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BalanceSpec {
    #[serde(default)]
    pub t: Option<f64>,
}

/// Fully-defaulted, range-checked experiment, ready to run.
#[derive(Clone, Debug, Serialize)]
pub struct ResolvedSpec {
    pub version: u32,
    pub kind: ExperimentKind,
    pub seeds: Vec<u64>,
    pub sim: Option<SimConfig>,
    pub pde: Option<PdeConfig>,
    pub chaos_n_list: Option<Vec<usize>>,
    pub chaos_t: Option<f64>,
    pub coupling_eps: Option<f64>,
    pub collision_eps_list: Option<Vec<f64>>,
    pub balance_t: Option<f64>,
}

fn invalid(pointer: &str, msg: impl std::fmt::Display) -> CliError {
    CliError::Validation(format!("{pointer}: {msg}"))
}

fn check_params(pointer: &str, alpha: f64, chi: f64, eps: f64) -> Result<KernelParams, CliError> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(invalid(
            &format!("{pointer}/alpha"),
            format!(
                "got {alpha}; the sub-critical model requires 0 < alpha < 1 \
                 (alpha = 1 is the critical kernel, outside this tool's scope)"
            ),
        ));
    }
    KernelParams::new(alpha, chi, eps).map_err(|e| invalid(pointer, e))
}

impl SimSpec {
    fn resolve(&self, pointer: &str, seed: u64) -> Result<SimConfig, CliError> {
        let params = check_params(pointer, self.alpha, self.chi, self.eps)?;
        let cfg = SimConfig {
            n_particles: self.n_particles,
            params,
            dt: self.dt,
            t_end: self.t_end,
            seed,
            initial: self.initial.clone(),
            record_stride: self.record_stride,
            taming: self.taming,
            force_backend: self.force_backend,
        };
        cfg.validate().map_err(|e| invalid(pointer, e))?;
        Ok(cfg)
    }
}

impl PdeSpec {
    fn resolve(&self, pointer: &str) -> Result<PdeConfig, CliError> {
        let params = check_params(pointer, self.alpha, self.chi, 0.0)?;
        let ny = self.ny.unwrap_or(self.nx);
        if self.nx < 16 || ny < 16 {
            return Err(invalid(
                &format!("{pointer}/nx"),
                "grid must be at least 16x16",
            ));
        }
        if !(self.half_width > 0.0) {
            return Err(invalid(
                &format!("{pointer}/half_width"),
                format!("must be > 0, got {}", self.half_width),
            ));
        }
        let h = 2.0 * self.half_width / self.nx as f64;
        let origin = Vec2::new(
            -0.5 * (self.nx as f64 - 1.0) * h,
            -0.5 * (ny as f64 - 1.0) * h,
        );
        // Default stride targets ~50 recorded frames given the CFL-bound dt.
        let bound = self.cfl_safety * h * h / 4.0;
        let stride = match self.record_stride {
            Some(s) => s,
            None => {
                let approx_steps = (self.t_end / bound).ceil().max(1.0) as usize;
                (approx_steps / 50).max(1)
            }
        };
        let dt = match self.dt {
            Some(dt) => dt,
            None => choose_dt(self.t_end, bound, stride),
        };
        let cfg = PdeConfig {
            params,
            nx: self.nx,
            ny,
            h,
            origin,
            dt,
            t_end: self.t_end,
            initial: self.initial.clone(),
            cfl_safety: self.cfl_safety,
            record_stride: stride,
        };
        cfg.validate().map_err(|e| invalid(pointer, e))?;
        Ok(cfg)
    }
}

/// Parses, defaults, and range-checks a spec document.
pub fn validate_config(text: &str) -> Result<ResolvedSpec, CliError> {
    check_strict(text).map_err(|e| CliError::Validation(format!("parse error: {e}")))?;
    let raw: ExperimentSpec =
        serde_json::from_str(text).map_err(|e| CliError::Validation(format!("parse error: {e}")))?;
    if raw.version != 1 {
        return Err(invalid("/version", format!("unsupported version {}", raw.version)));
    }
    if raw.seeds.is_empty() {
        return Err(invalid("/seeds", "need at least one seed"));
    }

    let needs_sim = matches!(
        raw.kind,
        ExperimentKind::ParticleRun
            | ExperimentKind::ChaosTable
            | ExperimentKind::CouplingCheck
            | ExperimentKind::CollisionScan
    );
    let needs_pde = matches!(
        raw.kind,
        ExperimentKind::PdeRun | ExperimentKind::ChaosTable | ExperimentKind::EntropyBalance
    );

    let sim_spec = match (&raw.sim, needs_sim) {
        (Some(s), _) => Some(s.clone()),
        (None, true) => Some(SimSpec::default()),
        (None, false) => None,
    };
    let pde_spec = match (&raw.pde, needs_pde) {
        (Some(p), _) => Some(p.clone()),
        (None, true) => Some(PdeSpec::default()),
        (None, false) => None,
    };

    // Seed 0 placeholder; the runner re-seeds per run.
    let sim = sim_spec
        .as_ref()
        .map(|s| s.resolve("/sim", raw.seeds[0]))
        .transpose()?;
    let pde = pde_spec.as_ref().map(|p| p.resolve("/pde")).transpose()?;

    let mut resolved = ResolvedSpec {
        version: raw.version,
        kind: raw.kind,
        seeds: raw.seeds.clone(),
        sim,
        pde,
        chaos_n_list: None,
        chaos_t: None,
        coupling_eps: None,
        collision_eps_list: None,
        balance_t: None,
    };

    match raw.kind {
        ExperimentKind::ChaosTable => {
            let chaos = raw
                .chaos
                .as_ref()
                .ok_or_else(|| invalid("/chaos", "required for kind = chaos_table"))?;
            if chaos.n_list.is_empty() {
                return Err(invalid("/chaos/n_list", "need at least one population size"));
            }
            if let Some(&bad) = chaos.n_list.iter().find(|&&n| n < 2) {
                return Err(invalid("/chaos/n_list", format!("population {bad} < 2")));
            }
            let pde_cfg = resolved.pde.as_ref().unwrap();
            let t = chaos.t.unwrap_or(pde_cfg.t_end);
            let sim_cfg = resolved.sim.as_ref().unwrap();
            let steps = (t / sim_cfg.dt).round();
            if t <= 0.0 || (steps * sim_cfg.dt - t).abs() > 1e-9 * t {
                return Err(invalid(
                    "/chaos/t",
                    format!("t = {t} must be a positive multiple of sim dt = {}", sim_cfg.dt),
                ));
            }
            let frame = t / (pde_cfg.dt * pde_cfg.record_stride as f64);
            if (frame - frame.round()).abs() > 1e-6 || t > pde_cfg.t_end * (1.0 + 1e-12) {
                return Err(invalid(
                    "/chaos/t",
                    format!("t = {t} is not a recorded PDE frame time"),
                ));
            }
            resolved.chaos_n_list = Some(chaos.n_list.clone());
            resolved.chaos_t = Some(t);
        }
        ExperimentKind::CouplingCheck => {
            let c = raw
                .coupling
                .as_ref()
                .ok_or_else(|| invalid("/coupling", "required for kind = coupling_check"))?;
            if !(c.eps > 0.0) {
                return Err(invalid("/coupling/eps", format!("must be > 0, got {}", c.eps)));
            }
            if resolved.sim.as_ref().unwrap().params.eps != 0.0 {
                return Err(invalid(
                    "/sim/eps",
                    "coupling_check compares against the exact kernel; set sim eps = 0",
                ));
            }
            resolved.coupling_eps = Some(c.eps);
        }
        ExperimentKind::CollisionScan => {
            let c = raw.collision_scan.as_ref().ok_or_else(|| {
                invalid("/collision_scan", "required for kind = collision_scan")
            })?;
            if c.eps_list.is_empty() {
                return Err(invalid("/collision_scan/eps_list", "need at least one eps"));
            }
            if let Some(&bad) = c.eps_list.iter().find(|&&e| !(e > 0.0)) {
                return Err(invalid(
                    "/collision_scan/eps_list",
                    format!("eps values must be > 0, got {bad}"),
                ));
            }
            resolved.collision_eps_list = Some(c.eps_list.clone());
        }
        ExperimentKind::EntropyBalance => {
            let pde_cfg = resolved.pde.as_ref().unwrap();
            let t = raw.balance.as_ref().and_then(|b| b.t).unwrap_or(pde_cfg.t_end);
            let frame = t / (pde_cfg.dt * pde_cfg.record_stride as f64);
            if t <= 0.0 || (frame - frame.round()).abs() > 1e-6 || t > pde_cfg.t_end * (1.0 + 1e-12)
            {
                return Err(invalid(
                    "/balance/t",
                    format!("t = {t} is not a recorded PDE frame time"),
                ));
            }
            resolved.balance_t = Some(t);
        }
        ExperimentKind::ParticleRun | ExperimentKind::PdeRun => {}
    }

    Ok(resolved)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_particle_run_gets_defaults() {
        let spec = validate_config(r#"{"kind": "particle_run"}"#).unwrap();
        let sim = spec.sim.unwrap();
        assert_eq!(sim.n_particles, 64);
        assert_eq!(sim.params.alpha, 0.5);
        assert_eq!(spec.seeds, vec![0]);
    }

    #[test]
    fn alpha_one_is_rejected_with_subcritical_message() {
        let err = validate_config(r#"{"kind": "particle_run", "sim": {"alpha": 1.0}}"#)
            .unwrap_err()
            .to_string();
        assert!(err.contains("/sim/alpha"), "{err}");
        assert!(err.contains("sub-critical"), "{err}");
    }

    #[test]
    fn duplicate_key_is_a_parse_error() {
        let err = validate_config(r#"{"kind": "particle_run", "kind": "pde_run"}"#)
            .unwrap_err()
            .to_string();
        assert!(err.contains("duplicate key"), "{err}");
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(validate_config(r#"{"kind": "particle_run", "sim": {"dtt": 0.1}}"#).is_err());
        assert!(validate_config(r#"{"kind": "particle_run", "extra": 1}"#).is_err());
    }

    #[test]
    fn pde_dt_is_auto_derived_and_cfl_safe() {
        let spec = validate_config(
            r#"{"kind": "pde_run", "pde": {"nx": 64, "half_width": 4.0, "t_end": 0.1}}"#,
        )
        .unwrap();
        let pde = spec.pde.unwrap();
        assert!(pde.dt <= 0.8 * pde.h * pde.h / 4.0 * (1.0 + 1e-12));
        let steps = (pde.t_end / pde.dt).round() as usize;
        assert_eq!(steps % pde.record_stride, 0);
    }

    #[test]
    fn chaos_requires_recorded_t() {
        let good = r#"{"kind": "chaos_table", "chaos": {"n_list": [16, 32]},
                       "sim": {"dt": 0.001, "t_end": 0.1},
                       "pde": {"nx": 32, "half_width": 6.0, "t_end": 0.1}}"#;
        let spec = validate_config(good).unwrap();
        assert_eq!(spec.chaos_t, Some(0.1));
        let bad = r#"{"kind": "chaos_table", "chaos": {"n_list": [16], "t": 0.0713},
                      "sim": {"dt": 0.001, "t_end": 0.1},
                      "pde": {"nx": 32, "half_width": 6.0, "t_end": 0.1}}"#;
        assert!(validate_config(bad).is_err());
    }
}
