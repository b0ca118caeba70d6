//! Schedule files and trajectory tables.
//!
//! A schedule is a self-contained JSON record of a finished run from which
//! the run can be replayed: the chain description plus, for the instantaneous
//! protocol, each interval with the gate that followed it, or, for switched
//! runs, the sequence of constant-Hamiltonian segments. Every step also stores
//! the target probability the run reported, so a replay can be checked.
//!
//! Numbers are written by `serde_json` in shortest round-trip form, so an
//! imported schedule carries bit-identical values.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::propagator::diagonalize;
use crate::protocol::{EndGate, GateAction, ProtocolTrace};
use crate::sector::{build, ChainSpec, SectorState};
use crate::switched::{replay_segments, SegmentPlan, SwitchMode};

pub const SCHEMA_VERSION: u32 = 1;

/// Tolerance for replayed probabilities against the recorded ones.
pub const REPLAY_TOLERANCE: f64 = 1e-9;

/// One protocol step. `t` is the free-evolution interval preceding the gate.
/// The gate fields are null when the gate was skipped.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleStep {
    pub t: f64,
    pub c_re: Option<f64>,
    pub c_im: Option<f64>,
    pub d_re: Option<f64>,
    pub d_im: Option<f64>,
    pub applied: bool,
    pub p: f64,
}

impl ScheduleStep {
    fn gate(&self) -> Result<GateAction> {
        if !self.applied {
            return Ok(GateAction::Skipped);
        }
        match (self.c_re, self.c_im, self.d_re, self.d_im) {
            (Some(cr), Some(ci), Some(dr), Some(di)) => Ok(GateAction::Applied(EndGate::new(
                Complex64::new(cr, ci),
                Complex64::new(dr, di),
            )?)),
            _ => Err(Error::input("applied gate without coefficients")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GateSchedule {
    pub schema: u32,
    pub chain: ChainSpec,
    pub steps: Vec<ScheduleStep>,
    pub final_p: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleSegment {
    pub duration: f64,
    pub delta_on: bool,
    pub p: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SwitchedSchedule {
    pub schema: u32,
    pub chain: ChainSpec,
    pub switch: SwitchMode,
    pub segments: Vec<ScheduleSegment>,
    pub final_p: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Schedule {
    Gates(GateSchedule),
    Switched(SwitchedSchedule),
}

impl Schedule {
    pub fn from_trace(trace: &ProtocolTrace) -> Self {
        let steps = trace
            .steps()
            .iter()
            .map(|s| {
                let g = s.gate.gate();
                ScheduleStep {
                    t: s.time,
                    c_re: g.map(|g| g.c().re),
                    c_im: g.map(|g| g.c().im),
                    d_re: g.map(|g| g.d().re),
                    d_im: g.map(|g| g.d().im),
                    applied: s.gate.is_applied(),
                    p: s.cumulative_probability,
                }
            })
            .collect();
        Schedule::Gates(GateSchedule {
            schema: SCHEMA_VERSION,
            chain: trace.spec().clone(),
            steps,
            final_p: trace.final_probability(),
        })
    }

    pub fn from_plan(plan: &SegmentPlan) -> Self {
        Schedule::Switched(SwitchedSchedule {
            schema: SCHEMA_VERSION,
            chain: plan.spec.clone(),
            switch: plan.mode,
            segments: plan
                .segments
                .iter()
                .map(|s| ScheduleSegment {
                    duration: s.duration,
                    delta_on: s.delta_on,
                    p: s.target_probability,
                })
                .collect(),
            final_p: plan.final_probability(),
        })
    }

    pub fn chain(&self) -> &ChainSpec {
        match self {
            Schedule::Gates(s) => &s.chain,
            Schedule::Switched(s) => &s.chain,
        }
    }

    pub fn recorded_probabilities(&self) -> Vec<f64> {
        match self {
            Schedule::Gates(s) => s.steps.iter().map(|x| x.p).collect(),
            Schedule::Switched(s) => s.segments.iter().map(|x| x.p).collect(),
        }
    }

    fn schema(&self) -> u32 {
        match self {
            Schedule::Gates(s) => s.schema,
            Schedule::Switched(s) => s.schema,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema() != SCHEMA_VERSION {
            return Err(Error::input(format!(
                "unsupported schedule schema {} (expected {SCHEMA_VERSION})",
                self.schema()
            )));
        }
        self.chain().validate()?;
        let times: Vec<f64> = match self {
            Schedule::Gates(s) => s.steps.iter().map(|x| x.t).collect(),
            Schedule::Switched(s) => s.segments.iter().map(|x| x.duration).collect(),
        };
        if let Some(t) = times.iter().find(|t| !(t.is_finite() && **t >= 0.0)) {
            return Err(Error::input(format!("invalid interval {t}")));
        }
        Ok(())
    }

    /// Re-simulates the schedule from `|1⟩` and returns the target probability
    /// after each step (gate schedules) or segment (switched schedules).
    pub fn replay(&self) -> Result<Vec<f64>> {
        self.validate()?;
        match self {
            Schedule::Gates(s) => {
                let h = build(&s.chain, false)?;
                let prop = diagonalize(&h)?;
                let n = s.chain.n_sites;
                let mut v = SectorState::basis(n, 1).into_amplitudes();
                let mut out = Vec::with_capacity(s.steps.len());
                for step in &s.steps {
                    v = prop.evolve_vector(&v, step.t);
                    if let GateAction::Applied(g) = step.gate()? {
                        g.apply_in_place(&mut v);
                    }
                    out.push(v[n + 1].norm_sqr());
                }
                Ok(out)
            }
            Schedule::Switched(s) => {
                let segs: Vec<(f64, bool)> = s
                    .segments
                    .iter()
                    .map(|x| (x.duration, x.delta_on))
                    .collect();
                replay_segments(&s.chain, s.switch, &segs)
            }
        }
    }

    /// Largest deviation of a replay from the recorded probabilities.
    pub fn replay_deviation(&self) -> Result<f64> {
        let replayed = self.replay()?;
        Ok(replayed
            .iter()
            .zip(self.recorded_probabilities())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("schedules always serialize")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let s: Schedule =
            serde_json::from_str(text).map_err(|e| Error::input(format!("schedule: {e}")))?;
        s.validate()?;
        Ok(s)
    }

    pub fn export(&self, path: &Path) -> Result<()> {
        write_file(path, &(self.to_json() + "\n"))
    }

    pub fn import(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let s: Schedule = serde_json::from_str(&text).map_err(|e| Error::Format {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        s.validate()?;
        Ok(s)
    }
}

pub(crate) fn write_file(path: &Path, contents: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

/// One row of a trajectory table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRow {
    /// Step index, starting at 1.
    pub k: usize,
    /// Elapsed time at the end of the step, in units of `1/J`.
    pub time: f64,
    pub p: f64,
    pub c_abs: f64,
    pub d_abs: f64,
    pub gate_applied: bool,
}

pub const CSV_HEADER: &str = "k,time,p,c_abs,d_abs,gate_applied";

pub fn trajectory_from_trace(trace: &ProtocolTrace) -> Vec<TrajectoryRow> {
    trace
        .steps()
        .iter()
        .zip(trace.elapsed())
        .enumerate()
        .map(|(i, (s, time))| {
            let g = s.gate.effective();
            TrajectoryRow {
                k: i + 1,
                time,
                p: s.cumulative_probability,
                c_abs: g.c().norm(),
                d_abs: g.d().norm(),
                gate_applied: s.gate.is_applied(),
            }
        })
        .collect()
}

/// One row per greedy step; `c_abs`, `d_abs` are the normalized end
/// amplitudes the gate phase started from.
pub fn trajectory_from_plan(plan: &SegmentPlan) -> Vec<TrajectoryRow> {
    let mut time = 0.0;
    plan.steps
        .iter()
        .enumerate()
        .map(|(i, s)| {
            time += s.frozen_duration + s.gate_duration;
            TrajectoryRow {
                k: i + 1,
                time,
                p: s.target_probability,
                c_abs: s.c_abs,
                d_abs: s.d_abs,
                gate_applied: s.accepted,
            }
        })
        .collect()
}

/// 17 significant digits, enough to reproduce any `f64` exactly.
pub fn format_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// CSV text with a leading `# schema=N` comment line and the fixed header.
pub fn trajectory_csv(rows: &[TrajectoryRow]) -> String {
    let mut out = format!("# endgate trajectory schema={SCHEMA_VERSION}\n{CSV_HEADER}\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            r.k,
            format_f64(r.time),
            format_f64(r.p),
            format_f64(r.c_abs),
            format_f64(r.d_abs),
            r.gate_applied
        );
    }
    out
}

#[derive(Serialize)]
struct TrajectoryJson<'a> {
    schema: u32,
    rows: &'a [TrajectoryRow],
}

pub fn trajectory_json(rows: &[TrajectoryRow]) -> String {
    serde_json::to_string_pretty(&TrajectoryJson {
        schema: SCHEMA_VERSION,
        rows,
    })
    .expect("rows always serialize")
}

/// Parses CSV produced by [`trajectory_csv`].
pub fn parse_trajectory_csv(text: &str) -> Result<Vec<TrajectoryRow>> {
    let mut lines = text.lines().filter(|l| !l.starts_with('#'));
    if lines.next() != Some(CSV_HEADER) {
        return Err(Error::input("trajectory header mismatch"));
    }
    lines
        .map(|line| {
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 6 {
                return Err(Error::input(format!("malformed trajectory row: {line}")));
            }
            let num = |s: &str| {
                s.parse::<f64>()
                    .map_err(|e| Error::input(format!("{s}: {e}")))
            };
            Ok(TrajectoryRow {
                k: f[0]
                    .parse()
                    .map_err(|e| Error::input(format!("{}: {e}", f[0])))?,
                time: num(f[1])?,
                p: num(f[2])?,
                c_abs: num(f[3])?,
                d_abs: num(f[4])?,
                gate_applied: f[5]
                    .parse()
                    .map_err(|e| Error::input(format!("{}: {e}", f[5])))?,
            })
        })
        .collect()
}
