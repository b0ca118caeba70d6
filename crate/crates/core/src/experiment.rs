//! Configuration-driven runs: single experiments, parameter sweeps and the
//! files they write.
//!
//! A run directory holds `trajectory.csv` (or `.json`), `summary.json` and,
//! for gate and switched runs, `schedule.json`. A sweep writes `sweep.csv` (or
//! `.json`) with one row per axis value, in axis order.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{
    DerivedTime, ExperimentConfig, ExperimentKind, OutputFormat, ScheduleConfig, SingleShotConfig,
    SweepAxis, TimeChoice,
};
use crate::error::{Error, Result};
use crate::propagator::{diagonalize, SpectralPropagator};
use crate::protocol::{
    average_fidelity, equidistant_probability, equidistant_schedule, run_protocol_with,
    run_until_with, ProtocolTrace, StopRule,
};
use crate::schedule::{
    format_f64, trajectory_csv, trajectory_from_plan, trajectory_from_trace, trajectory_json,
    write_file, Schedule, TrajectoryRow, SCHEMA_VERSION,
};
use crate::search::{self, Peak};
use crate::sector::{build, ChainSpec, SectorState};
use crate::switched::{greedy_run, StopReason, SwitchMode};

/// Fraction of the window maximum a single-shot peak must reach to count as
/// the first arrival.
pub const FIRST_PEAK_FRACTION: f64 = 0.1;

const REFINE_TOLERANCE: f64 = 1e-9;

fn grid_points(window: f64, resolution: f64) -> usize {
    ((window / resolution).ceil() as usize).max(2)
}

/// Best single-shot transfer `max_t |⟨N|U(t)|1⟩|²` over the configured window.
pub fn single_shot_optimum(propagator: &SpectralPropagator, cfg: &SingleShotConfig) -> Peak {
    let series = propagator.amplitude_series(
        &SectorState::basis(propagator.n_sites(), 1),
        propagator.n_sites(),
    );
    search::maximize(
        |t| series.probability(t),
        0.0,
        cfg.window,
        grid_points(cfg.window, cfg.resolution),
        REFINE_TOLERANCE,
        8,
    )
}

/// The first single-shot peak reaching [`FIRST_PEAK_FRACTION`] of the window
/// maximum: the arrival of the leading wave front.
pub fn first_peak(propagator: &SpectralPropagator, cfg: &SingleShotConfig) -> Peak {
    let series = propagator.amplitude_series(
        &SectorState::basis(propagator.n_sites(), 1),
        propagator.n_sites(),
    );
    search::first_significant_peak(
        |t| series.probability(t),
        cfg.window,
        grid_points(cfg.window, cfg.resolution),
        REFINE_TOLERANCE,
        FIRST_PEAK_FRACTION,
    )
}

/// Peak over `t ∈ (0, total_time]` of `p(t)` for `gates` equidistant gates
/// spread over `t`.
pub fn family_peak(
    propagator: &SpectralPropagator,
    total_time: f64,
    gates: usize,
    scan_points: usize,
) -> Peak {
    search::maximize(
        |t| {
            if t <= 0.0 {
                0.0
            } else {
                equidistant_probability(propagator, t, gates)
            }
        },
        0.0,
        total_time,
        scan_points,
        REFINE_TOLERANCE,
        8,
    )
}

/// Summary record of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub schema: u32,
    pub experiment: ExperimentKind,
    pub chain: ChainSpec,
    pub final_p: f64,
    pub average_fidelity: f64,
    /// Best `p` of the run: the family peak for equidistant schedules, the
    /// window maximum for single-shot runs, the trajectory maximum otherwise.
    pub peak_p: f64,
    pub peak_time: f64,
    pub total_time: f64,
    pub steps: usize,
    pub gates_applied: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub window: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stop: Option<StopReason>,
    pub versions: BTreeMap<String, String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wall_time_s: Option<f64>,
}

fn versions() -> BTreeMap<String, String> {
    BTreeMap::from([
        ("endgate".to_string(), env!("CARGO_PKG_VERSION").to_string()),
        ("schema".to_string(), SCHEMA_VERSION.to_string()),
    ])
}

/// Everything a single run produces.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub summary: Summary,
    pub trajectory: Vec<TrajectoryRow>,
    pub schedule: Option<Schedule>,
}

fn trajectory_peak(rows: &[TrajectoryRow]) -> (f64, f64) {
    rows.iter().fold(
        (0.0, 0.0),
        |(p, t), r| if r.p > p { (r.p, r.time) } else { (p, t) },
    )
}

fn resolve_time(
    choice: TimeChoice,
    propagator: &SpectralPropagator,
    cfg: &SingleShotConfig,
) -> f64 {
    match choice {
        TimeChoice::Fixed(t) => t,
        TimeChoice::Derived(DerivedTime::SingleShotOptimum) => {
            single_shot_optimum(propagator, cfg).t
        }
        TimeChoice::Derived(DerivedTime::FirstPeak) => first_peak(propagator, cfg).t,
    }
}

fn summary_base(
    config: &ExperimentConfig,
    chain: &ChainSpec,
    kind: ExperimentKind,
    final_p: f64,
) -> Result<Summary> {
    Ok(Summary {
        schema: SCHEMA_VERSION,
        experiment: kind,
        chain: chain.clone(),
        final_p,
        average_fidelity: average_fidelity(final_p.clamp(0.0, 1.0))?,
        peak_p: final_p,
        peak_time: 0.0,
        total_time: 0.0,
        steps: 0,
        gates_applied: 0,
        window: None,
        tau: None,
        stop: None,
        versions: versions(),
        wall_time_s: config.output.record_wall_time.then_some(0.0),
    })
}

/// Runs the configured experiment (the sweep base for sweep configs) on
/// `chain`. Single-threaded.
pub fn execute(config: &ExperimentConfig, chain: &ChainSpec) -> Result<RunOutput> {
    let start = Instant::now();
    let kind = config.run_kind();
    let mut out = match kind {
        ExperimentKind::SingleShot => run_single_shot(config, chain)?,
        ExperimentKind::Endgate => run_endgate(config, chain)?,
        ExperimentKind::Switched => run_switched(config, chain)?,
        ExperimentKind::Sweep => return Err(Error::Config("nested sweep".into())),
    };
    if config.output.record_wall_time {
        out.summary.wall_time_s = Some(start.elapsed().as_secs_f64());
    }
    Ok(out)
}

fn run_single_shot(config: &ExperimentConfig, chain: &ChainSpec) -> Result<RunOutput> {
    let h = build(chain, false)?;
    let prop = diagonalize(&h)?;
    let best = single_shot_optimum(&prop, &config.single_shot);
    // one gate at the optimum realizes the single-shot transfer
    let trace = run_protocol_with(&h, &prop, &[best.t])?;
    let mut summary = summary_base(
        config,
        chain,
        ExperimentKind::SingleShot,
        trace.final_probability(),
    )?;
    summary.peak_p = best.value;
    summary.peak_time = best.t;
    summary.total_time = best.t;
    summary.steps = 1;
    summary.gates_applied = trace.gates_applied();
    summary.window = Some(config.single_shot.window);
    Ok(RunOutput {
        summary,
        trajectory: trajectory_from_trace(&trace),
        schedule: Some(Schedule::from_trace(&trace)),
    })
}

fn run_endgate(config: &ExperimentConfig, chain: &ChainSpec) -> Result<RunOutput> {
    let schedule = config
        .schedule
        .as_ref()
        .ok_or_else(|| Error::Config("missing [schedule]".into()))?;
    let h = build(chain, false)?;
    let prop = diagonalize(&h)?;
    let ss = &config.single_shot;
    let (trace, family, tau): (ProtocolTrace, Option<Peak>, Option<f64>) = match schedule {
        ScheduleConfig::Equidistant {
            total_time,
            gate_count,
            scan_points,
        } => {
            let t = resolve_time(*total_time, &prop, ss);
            let trace = run_protocol_with(&h, &prop, &equidistant_schedule(t, *gate_count)?)?;
            // p depends on t only through the interval t/ℓ, so the grid
            // resolution applies per interval
            let points =
                scan_points.unwrap_or_else(|| grid_points(t, ss.resolution * *gate_count as f64));
            let peak = family_peak(&prop, t, *gate_count, points);
            (trace, Some(peak), Some(t / *gate_count as f64))
        }
        ScheduleConfig::Explicit { intervals } => {
            (run_protocol_with(&h, &prop, intervals)?, None, None)
        }
        ScheduleConfig::Repeated {
            tau,
            max_gates,
            residual_tolerance,
        } => {
            let tau = resolve_time(*tau, &prop, ss);
            let stop = StopRule {
                max_gates: *max_gates,
                residual_tolerance: *residual_tolerance,
            };
            (run_until_with(&h, &prop, tau, stop)?, None, Some(tau))
        }
    };
    let trajectory = trajectory_from_trace(&trace);
    let mut summary = summary_base(
        config,
        chain,
        ExperimentKind::Endgate,
        trace.final_probability(),
    )?;
    let (peak_p, peak_time) = match family {
        Some(p) => (p.value, p.t),
        None => trajectory_peak(&trajectory),
    };
    summary.peak_p = peak_p;
    summary.peak_time = peak_time;
    summary.total_time = trace.elapsed().last().copied().unwrap_or(0.0);
    summary.steps = trace.steps().len();
    summary.gates_applied = trace.gates_applied();
    summary.tau = tau;
    Ok(RunOutput {
        summary,
        trajectory,
        schedule: Some(Schedule::from_trace(&trace)),
    })
}

fn run_switched(config: &ExperimentConfig, chain: &ChainSpec) -> Result<RunOutput> {
    let mode = config
        .switch
        .ok_or_else(|| Error::Config("missing [switch]".into()))?;
    let params = config.greedy_params(chain);
    let plan = greedy_run(chain, mode, &params)?;
    let trajectory = trajectory_from_plan(&plan);
    let mut summary = summary_base(
        config,
        chain,
        ExperimentKind::Switched,
        plan.final_probability(),
    )?;
    let (peak_p, peak_time) = trajectory_peak(&trajectory);
    summary.peak_p = peak_p;
    summary.peak_time = peak_time;
    summary.total_time = plan.total_time();
    summary.steps = plan.steps.len();
    summary.gates_applied = plan.accepted();
    summary.stop = Some(plan.stop);
    Ok(RunOutput {
        summary,
        trajectory,
        schedule: Some(Schedule::from_plan(&plan)),
    })
}

/// Writes the trajectory, summary and schedule of a run into `dir`.
pub fn write_run(output: &RunOutput, dir: &Path, format: OutputFormat) -> Result<()> {
    match format {
        OutputFormat::Csv => write_file(
            &dir.join("trajectory.csv"),
            &trajectory_csv(&output.trajectory),
        )?,
        OutputFormat::Json => write_file(
            &dir.join("trajectory.json"),
            &(trajectory_json(&output.trajectory) + "\n"),
        )?,
    }
    let summary =
        serde_json::to_string_pretty(&output.summary).expect("summaries always serialize");
    write_file(&dir.join("summary.json"), &(summary + "\n"))?;
    if let Some(s) = &output.schedule {
        s.export(&dir.join("schedule.json"))?;
    }
    Ok(())
}

/// Runs a single (non-sweep) config and writes its files into `dir`.
pub fn run_config(config: &ExperimentConfig, dir: &Path) -> Result<Summary> {
    if config.experiment == ExperimentKind::Sweep {
        return Err(Error::Config("this config describes a sweep".into()));
    }
    let output = execute(config, &config.effective_chain())?;
    write_run(&output, dir, config.output.format)?;
    Ok(output.summary)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub value: f64,
    pub final_p: f64,
    pub peak_p: f64,
    pub peak_time: f64,
    pub average_fidelity: f64,
    pub steps: usize,
}

pub const SWEEP_CSV_HEADER: &str = "value,final_p,peak_p,peak_time,average_fidelity,steps";

fn config_for_value(
    config: &ExperimentConfig,
    axis: SweepAxis,
    value: f64,
) -> (ExperimentConfig, ChainSpec) {
    let mut c = config.clone();
    let mut chain = config.effective_chain();
    match axis {
        SweepAxis::GateCount => {
            let n = value as usize;
            match c.schedule.as_mut() {
                Some(ScheduleConfig::Equidistant { gate_count, .. }) => *gate_count = n,
                Some(ScheduleConfig::Repeated { max_gates, .. }) => *max_gates = n,
                _ => unreachable!("validated"),
            }
        }
        SweepAxis::Seed => {
            if let Some(d) = chain.disorder.as_mut() {
                d.seed = value as u64;
            }
        }
        SweepAxis::FieldStrength => {
            c.switch = Some(SwitchMode::field(value));
            chain.field_strength = Some(value);
        }
    }
    (c, chain)
}

/// One row per sweep value, in axis order. Rows run on `threads` workers
/// (`None` for the rayon default).
pub fn sweep(config: &ExperimentConfig, threads: Option<usize>) -> Result<Vec<SweepRow>> {
    let sw = config
        .sweep
        .as_ref()
        .ok_or_else(|| Error::Config("this config has no [sweep] section".into()))?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.unwrap_or(0))
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    pool.install(|| {
        sw.values
            .par_iter()
            .map(|&value| {
                let (c, chain) = config_for_value(config, sw.axis, value);
                let out = execute(&c, &chain)?;
                log::debug!("sweep value {value}: final p {}", out.summary.final_p);
                Ok(SweepRow {
                    value,
                    final_p: out.summary.final_p,
                    peak_p: out.summary.peak_p,
                    peak_time: out.summary.peak_time,
                    average_fidelity: out.summary.average_fidelity,
                    steps: out.summary.steps,
                })
            })
            .collect()
    })
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = format!("# endgate sweep schema={SCHEMA_VERSION}\n{SWEEP_CSV_HEADER}\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            format_f64(r.value),
            format_f64(r.final_p),
            format_f64(r.peak_p),
            format_f64(r.peak_time),
            format_f64(r.average_fidelity),
            r.steps
        );
    }
    out
}

#[derive(Serialize)]
struct SweepJson<'a> {
    schema: u32,
    axis: SweepAxis,
    rows: &'a [SweepRow],
}

/// Runs a sweep config and writes its table into `dir`.
pub fn run_sweep(
    config: &ExperimentConfig,
    dir: &Path,
    threads: Option<usize>,
) -> Result<Vec<SweepRow>> {
    let rows = sweep(config, threads)?;
    let axis = config.sweep.as_ref().expect("checked by sweep").axis;
    match config.output.format {
        OutputFormat::Csv => write_file(&dir.join("sweep.csv"), &sweep_csv(&rows))?,
        OutputFormat::Json => {
            let text = serde_json::to_string_pretty(&SweepJson {
                schema: SCHEMA_VERSION,
                axis,
                rows: &rows,
            })
            .expect("rows always serialize");
            write_file(&dir.join("sweep.json"), &(text + "\n"))?;
        }
    }
    Ok(rows)
}
