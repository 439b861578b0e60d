//! Experiment execution: one function per experiment kind, each emitting its
//! CSV/JSON/binary artifacts into the output directory, manifest last.

use std::path::Path;

use serde::Serialize;

use ks_core::diagnostics::{
    chaos_convergence_table, entropy_grid, entropy_knn, fisher_grid, interaction_with_plan,
    moment_grid, moment_samples,
};
use ks_core::meanfield::{pde_solve, PdeSolution, RadialPlan};
use ks_core::particle::{
    log_distance_stat, min_pairwise_distance, read_trajectory_partial, simulate,
    simulate_from_step, write_states, CounterNoise, EventKind, SimConfig, Trajectory,
};
use ks_core::{grid, ParticleState};

use crate::csv::{cell, fmt_f64, CsvWriter};
use crate::error::{CliError, Result};
use crate::manifest::ManifestBuilder;
use crate::spec::{ExperimentKind, ResolvedSpec};

const KNN_K: usize = 4;

pub struct RunOptions {
    pub jobs: usize,
    pub resume: bool,
}

/// Runs a validated experiment; returns the manifest path.
pub fn run_experiment(
    spec: &ResolvedSpec,
    spec_text: &str,
    out_dir: &Path,
    opts: &RunOptions,
) -> Result<std::path::PathBuf> {
    std::fs::create_dir_all(out_dir)?;
    let mut manifest = ManifestBuilder::new(out_dir, spec_text);

    match spec.kind {
        ExperimentKind::ParticleRun => particle_run(spec, out_dir, opts, &mut manifest)?,
        ExperimentKind::PdeRun => pde_run(spec, &mut manifest)?,
        ExperimentKind::ChaosTable => chaos_table(spec, opts, &mut manifest)?,
        ExperimentKind::EntropyBalance => entropy_balance(spec, &mut manifest)?,
        ExperimentKind::CouplingCheck => coupling_check(spec, opts, &mut manifest)?,
        ExperimentKind::CollisionScan => collision_scan(spec, opts, &mut manifest)?,
    }

    manifest.finish(spec)
}

/// Runs `f` over the seeds with at most `jobs` workers. Results come back in
/// seed order regardless of scheduling.
fn for_each_seed<T: Send>(
    seeds: &[u64],
    jobs: usize,
    f: impl Fn(u64) -> Result<T> + Sync,
) -> Result<Vec<T>> {
    if jobs <= 1 || seeds.len() <= 1 {
        return seeds.iter().map(|&s| f(s)).collect();
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.min(seeds.len()))
        .build()
        .map_err(|e| CliError::Other(e.to_string()))?;
    pool.install(|| {
        use rayon::prelude::*;
        seeds.par_iter().map(|&s| f(s)).collect()
    })
}

fn seeded(cfg: &SimConfig, seed: u64) -> SimConfig {
    let mut c = cfg.clone();
    c.seed = seed;
    c
}

#[derive(Serialize)]
struct EventLog<'a> {
    resumed_from_step: Option<u64>,
    overall_min_distance: &'a ks_core::particle::MinDistanceRecord,
    events: &'a [ks_core::particle::Event],
}

fn write_event_log(
    manifest: &mut ManifestBuilder,
    name: &str,
    traj: &Trajectory,
    resumed_from_step: Option<u64>,
) -> Result<()> {
    let log = EventLog {
        resumed_from_step,
        overall_min_distance: &traj.overall_min_distance,
        events: &traj.events,
    };
    let body = serde_json::to_string_pretty(&log).map_err(|e| CliError::Other(e.to_string()))?;
    manifest.write_artifact(name, body.as_bytes())
}

/// One reports.csv row. Fixed column set shared by all experiment kinds.
fn report_header() -> [&'static str; 10] {
    [
        "time",
        "n",
        "seed",
        "entropy",
        "fisher",
        "m1",
        "w1_to_reference",
        "s_stat",
        "min_dist",
        "interaction",
    ]
}

struct ReportRow {
    time: f64,
    n: Option<usize>,
    seed: Option<u64>,
    entropy: Option<f64>,
    fisher: Option<f64>,
    m1: Option<f64>,
    w1: Option<f64>,
    s_stat: Option<f64>,
    min_dist: Option<f64>,
    interaction: Option<f64>,
}

impl ReportRow {
    fn cells(&self) -> Vec<String> {
        vec![
            fmt_f64(self.time),
            self.n.map(|v| v.to_string()).unwrap_or_default(),
            self.seed.map(|v| v.to_string()).unwrap_or_default(),
            cell(self.entropy),
            cell(self.fisher),
            cell(self.m1),
            cell(self.w1),
            cell(self.s_stat),
            cell(self.min_dist),
            cell(self.interaction),
        ]
    }
}

fn particle_report_row(state: &ParticleState, seed: u64, gamma: f64) -> ReportRow {
    let n = state.n();
    // Sample-based entropy needs k+1 points; pairwise stats need distinct
    // points. Absent values stay blank rather than failing the run.
    let entropy = if n > KNN_K {
        entropy_knn(state, KNN_K).ok()
    } else {
        None
    };
    ReportRow {
        time: state.time,
        n: Some(n),
        seed: Some(seed),
        entropy,
        fisher: None,
        m1: Some(moment_samples(&state.positions, 1.0)),
        w1: None,
        s_stat: log_distance_stat(state).ok(),
        min_dist: Some(min_pairwise_distance(state)),
        interaction: ks_core::diagnostics::interaction_integral_samples(&state.positions, gamma)
            .ok(),
    }
}

fn particle_run(
    spec: &ResolvedSpec,
    out_dir: &Path,
    opts: &RunOptions,
    manifest: &mut ManifestBuilder,
) -> Result<()> {
    let cfg = spec.sim.as_ref().unwrap();
    let gamma = cfg.params.alpha + 1.0;

    enum Outcome {
        Fresh(Trajectory),
        Resumed { traj: Trajectory, from_step: u64 },
        /// Checkpoint already held every record; only states are available.
        Complete(Vec<ParticleState>),
    }

    let results: Vec<(u64, Outcome)> = for_each_seed(&spec.seeds, opts.jobs, |seed| {
        let cfg = seeded(cfg, seed);
        let traj_name = format!("traj_seed{seed}.kstraj");
        let traj_path = out_dir.join(&traj_name);
        let expected_records = cfg.n_steps() / cfg.record_stride + 1;

        if opts.resume && traj_path.exists() {
            let partial = read_trajectory_partial(&traj_path)?;
            if partial.config == cfg && !partial.states.is_empty() {
                if partial.states.len() >= expected_records {
                    return Ok((seed, Outcome::Complete(partial.states)));
                }
                let last = partial.states.last().unwrap().clone();
                let start_step = ((partial.states.len() - 1) * cfg.record_stride) as u64;
                let tail =
                    simulate_from_step(&cfg, last, start_step, &CounterNoise { seed: cfg.seed })?;
                let mut states = partial.states;
                states.extend(tail.states.into_iter().skip(1));
                let traj = Trajectory {
                    states,
                    config: cfg.clone(),
                    events: tail.events,
                    overall_min_distance: tail.overall_min_distance,
                };
                return Ok((seed, Outcome::Resumed { traj, from_step: start_step }));
            }
        }
        Ok((seed, Outcome::Fresh(simulate(&cfg)?)))
    })?;

    let mut summary = CsvWriter::new(&report_header());
    for (seed, outcome) in &results {
        let seed = *seed;
        let traj_name = format!("traj_seed{seed}.kstraj");
        let states: &[ParticleState] = match outcome {
            Outcome::Fresh(traj) => {
                write_states(&traj.config, &traj.states, &out_dir.join(&traj_name))?;
                write_event_log(manifest, &format!("events_seed{seed}.json"), traj, None)?;
                &traj.states
            }
            Outcome::Resumed { traj, from_step } => {
                write_states(&traj.config, &traj.states, &out_dir.join(&traj_name))?;
                write_event_log(
                    manifest,
                    &format!("events_seed{seed}.json"),
                    traj,
                    Some(*from_step),
                )?;
                &traj.states
            }
            Outcome::Complete(states) => states,
        };
        manifest.record_existing(&traj_name)?;
        for state in states {
            summary.row(&particle_report_row(state, seed, gamma).cells());
        }
    }
    manifest.write_artifact("reports.csv", summary.finish().as_bytes())?;
    Ok(())
}

fn solve_pde(spec: &ResolvedSpec) -> Result<PdeSolution> {
    let cfg = spec.pde.as_ref().unwrap();
    Ok(pde_solve(cfg)?)
}

fn pde_run(spec: &ResolvedSpec, manifest: &mut ManifestBuilder) -> Result<()> {
    let sol = solve_pde(spec)?;
    let cfg = &sol.config;
    let gamma = cfg.params.alpha + 1.0;
    let plan = RadialPlan::new(cfg.nx, cfg.ny, cfg.h, gamma)?;

    let mut reports = CsvWriter::new(&report_header());
    let mut frame_times = Vec::with_capacity(sol.frames.len());
    for (k, frame) in sol.frames.iter().enumerate() {
        let name = format!("frame_{k:05}.ksgrid");
        manifest.write_artifact(&name, &grid::grid_to_bytes(frame))?;
        frame_times.push(frame.time);
        reports.row(
            &ReportRow {
                time: frame.time,
                n: None,
                seed: None,
                entropy: Some(entropy_grid(frame)),
                fisher: Some(fisher_grid(frame)),
                m1: Some(moment_grid(frame, 1.0)),
                w1: None,
                s_stat: None,
                min_dist: None,
                interaction: Some(interaction_with_plan(frame, &plan)),
            }
            .cells(),
        );
    }
    let frames_json = serde_json::json!({
        "frame_times": frame_times,
        "events": sol.events,
    });
    manifest.write_artifact(
        "frames.json",
        serde_json::to_string_pretty(&frames_json)
            .map_err(|e| CliError::Other(e.to_string()))?
            .as_bytes(),
    )?;
    manifest.write_artifact("reports.csv", reports.finish().as_bytes())?;
    Ok(())
}

fn chaos_table(
    spec: &ResolvedSpec,
    _opts: &RunOptions,
    manifest: &mut ManifestBuilder,
) -> Result<()> {
    let sol = solve_pde(spec)?;
    let template = spec.sim.as_ref().unwrap();
    let n_list = spec.chaos_n_list.as_ref().unwrap();
    let t = spec.chaos_t.unwrap();
    let table = chaos_convergence_table(&sol, template, n_list, &spec.seeds, t)?;

    let mut csv = CsvWriter::new(&[
        "row_type",
        "n",
        "seed",
        "t",
        "w1",
        "w1_baseline",
        "mean_w1",
        "stderr_w1",
        "mean_baseline",
        "stderr_baseline",
    ]);
    for r in &table.rows {
        csv.row(&[
            "data".into(),
            r.n.to_string(),
            r.seed.to_string(),
            fmt_f64(r.t),
            fmt_f64(r.w1),
            fmt_f64(r.w1_baseline),
            String::new(),
            String::new(),
            String::new(),
            String::new(),
        ]);
    }
    for a in &table.aggregates {
        csv.row(&[
            "aggregate".into(),
            a.n.to_string(),
            String::new(),
            fmt_f64(t),
            String::new(),
            String::new(),
            fmt_f64(a.mean_w1),
            fmt_f64(a.stderr_w1),
            fmt_f64(a.mean_baseline),
            fmt_f64(a.stderr_baseline),
        ]);
    }
    manifest.write_artifact("chaos.csv", csv.finish().as_bytes())?;
    Ok(())
}

fn entropy_balance(spec: &ResolvedSpec, manifest: &mut ManifestBuilder) -> Result<()> {
    let sol = solve_pde(spec)?;
    let cfg = &sol.config;
    let t_max = spec.balance_t.unwrap();
    let chi = cfg.params.chi;
    let alpha = cfg.params.alpha;
    let plan = RadialPlan::new(cfg.nx, cfg.ny, cfg.h, alpha + 1.0)?;

    // Per-frame functionals once, cumulative trapezoids after.
    let mut csv = CsvWriter::new(&["time", "entropy", "fisher", "interaction", "residual"]);
    let mut prev: Option<(f64, f64, f64)> = None; // (time, I, Q)
    let mut int_i = 0.0;
    let mut int_q = 0.0;
    let h0 = entropy_grid(&sol.frames[0]);
    for frame in &sol.frames {
        if frame.time > t_max + 1e-9 * t_max.max(1.0) {
            break;
        }
        let i = fisher_grid(frame);
        let q = interaction_with_plan(frame, &plan);
        if let Some((t0, i0, q0)) = prev {
            int_i += 0.5 * (i + i0) * (frame.time - t0);
            int_q += 0.5 * (q + q0) * (frame.time - t0);
        }
        prev = Some((frame.time, i, q));
        let h = entropy_grid(frame);
        let residual = (h + int_i - h0 - chi * (1.0 - alpha) * int_q).abs();
        csv.row(&[
            fmt_f64(frame.time),
            fmt_f64(h),
            fmt_f64(i),
            fmt_f64(q),
            fmt_f64(residual),
        ]);
    }
    manifest.write_artifact("balance.csv", csv.finish().as_bytes())?;
    Ok(())
}

fn coupling_check(
    spec: &ResolvedSpec,
    opts: &RunOptions,
    manifest: &mut ManifestBuilder,
) -> Result<()> {
    let exact_cfg = spec.sim.as_ref().unwrap();
    let eps = spec.coupling_eps.unwrap();

    let rows: Vec<(u64, Option<f64>, usize, bool)> =
        for_each_seed(&spec.seeds, opts.jobs, |seed| {
            let exact = simulate(&seeded(exact_cfg, seed))?;
            let mut capped_cfg = seeded(exact_cfg, seed);
            capped_cfg.params =
                ks_core::KernelParams::new(exact_cfg.params.alpha, exact_cfg.params.chi, eps)
                    .map_err(CliError::from)?;
            let capped = simulate(&capped_cfg)?;

            let t_cross = capped
                .events
                .iter()
                .find(|e| matches!(e.kind, EventKind::MinDistanceBelow { threshold } if threshold == eps))
                .map(|e| e.time);
            let horizon = t_cross.unwrap_or(f64::INFINITY);
            let mut compared = 0usize;
            let mut identical = true;
            for (a, b) in exact.states.iter().zip(&capped.states) {
                if a.time >= horizon {
                    break;
                }
                compared += 1;
                if a.positions
                    .iter()
                    .zip(&b.positions)
                    .any(|(pa, pb)| pa.x.to_bits() != pb.x.to_bits() || pa.y.to_bits() != pb.y.to_bits())
                {
                    identical = false;
                }
            }
            Ok((seed, t_cross, compared, identical))
        })?;

    let mut csv = CsvWriter::new(&["seed", "t_cross", "records_compared", "bit_identical"]);
    for (seed, t_cross, compared, identical) in rows {
        csv.row(&[
            seed.to_string(),
            cell(t_cross),
            compared.to_string(),
            (identical as u8).to_string(),
        ]);
    }
    manifest.write_artifact("coupling.csv", csv.finish().as_bytes())?;
    Ok(())
}

fn collision_scan(
    spec: &ResolvedSpec,
    opts: &RunOptions,
    manifest: &mut ManifestBuilder,
) -> Result<()> {
    let base = spec.sim.as_ref().unwrap();
    let eps_list = spec.collision_eps_list.as_ref().unwrap();

    let mut csv = CsvWriter::new(&[
        "eps",
        "seed",
        "t_first_below_eps",
        "min_dist",
        "min_dist_time",
    ]);
    for &eps in eps_list {
        let rows: Vec<(u64, Option<f64>, f64, f64)> =
            for_each_seed(&spec.seeds, opts.jobs, |seed| {
                let mut cfg = seeded(base, seed);
                cfg.params = ks_core::KernelParams::new(base.params.alpha, base.params.chi, eps)
                    .map_err(CliError::from)?;
                let traj = simulate(&cfg)?;
                let t_cross = traj
                    .events
                    .iter()
                    .find(|e| matches!(e.kind, EventKind::MinDistanceBelow { threshold } if threshold == eps))
                    .map(|e| e.time);
                Ok((
                    seed,
                    t_cross,
                    traj.overall_min_distance.dist,
                    traj.overall_min_distance.time,
                ))
            })?;
        for (seed, t_cross, min_dist, min_time) in rows {
            csv.row(&[
                fmt_f64(eps),
                seed.to_string(),
                cell(t_cross),
                fmt_f64(min_dist),
                fmt_f64(min_time),
            ]);
        }
    }
    manifest.write_artifact("collisions.csv", csv.finish().as_bytes())?;
    Ok(())
}
