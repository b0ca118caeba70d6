//! Experiment configuration, read from TOML (or JSON when the file ends in
//! `.json`).
//!
//! ```toml
//! experiment = "endgate"
//!
//! [chain]
//! n_sites = 23
//! coupling_model = "heisenberg"
//!
//! [schedule]
//! kind = "equidistant"
//! total_time = "single_shot_optimum"
//! gate_count = 10
//!
//! [output]
//! path = "out/heisenberg_family"
//! format = "csv"
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sector::{ChainSpec, CouplingModel};
use crate::switched::{GreedyParams, PeakObjective, SwitchMode};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    /// Best `|⟨N|U(t)|1⟩|²` over a time window, no gates.
    SingleShot,
    /// Instantaneous end-gate protocol.
    Endgate,
    /// Greedy switched protocol.
    Switched,
    Sweep,
}

/// Times derived from the chain rather than given directly.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DerivedTime {
    /// Time of the best single-shot transfer in the `[single_shot]` window.
    SingleShotOptimum,
    /// First single-shot peak reaching 10% of the window maximum.
    FirstPeak,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TimeChoice {
    Fixed(f64),
    Derived(DerivedTime),
}

fn default_tolerance() -> f64 {
    1e-2
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ScheduleConfig {
    /// `gate_count` equal intervals spanning `total_time`. The summary also
    /// reports the peak of `p(t)` over `t ∈ (0, total_time]` for this gate
    /// count, sampled on `scan_points` points and refined.
    Equidistant {
        total_time: TimeChoice,
        gate_count: usize,
        #[serde(default)]
        scan_points: Option<usize>,
    },
    Explicit {
        intervals: Vec<f64>,
    },
    /// Repeats `tau` until `1 − p ≤ residual_tolerance` or `max_gates`.
    Repeated {
        tau: TimeChoice,
        max_gates: usize,
        #[serde(default = "default_tolerance")]
        residual_tolerance: f64,
    },
}

fn default_window() -> f64 {
    2000.0
}

fn default_resolution() -> f64 {
    0.01
}

/// Window and grid of single-shot searches, in units of `1/J`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SingleShotConfig {
    #[serde(default = "default_window")]
    pub window: f64,
    #[serde(default = "default_resolution")]
    pub resolution: f64,
}

impl Default for SingleShotConfig {
    fn default() -> Self {
        Self {
            window: default_window(),
            resolution: default_resolution(),
        }
    }
}

/// Overrides for [`GreedyParams::for_chain`].
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GreedyConfig {
    pub search_window: Option<f64>,
    pub gate_window: Option<f64>,
    pub grid_points: Option<usize>,
    pub refine_tolerance: Option<f64>,
    pub gain_threshold: Option<f64>,
    pub step_budget: Option<usize>,
    pub stall_steps: Option<usize>,
    pub peak_objective: Option<PeakObjective>,
}

impl GreedyConfig {
    pub fn resolve(&self, spec: &ChainSpec) -> GreedyParams {
        let mut p = GreedyParams::for_chain(spec);
        if let Some(v) = self.search_window {
            p.search_window = v;
        }
        p.gate_window = self.gate_window.or(p.gate_window);
        if let Some(v) = self.grid_points {
            p.grid_points = v;
        }
        if let Some(v) = self.refine_tolerance {
            p.refine_tolerance = v;
        }
        if let Some(v) = self.gain_threshold {
            p.gain_threshold = v;
        }
        if let Some(v) = self.step_budget {
            p.step_budget = v;
        }
        if let Some(v) = self.stall_steps {
            p.stall_steps = v;
        }
        if let Some(v) = self.peak_objective {
            p.peak_objective = v;
        }
        p
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    /// Gate count of an equidistant schedule, or gate budget of a repeated one.
    GateCount,
    /// Disorder seed.
    Seed,
    /// Field strength `B` of a field-mode switched run.
    FieldStrength,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub axis: SweepAxis,
    pub values: Vec<f64>,
    /// The experiment run for each value.
    pub base: ExperimentKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputFormat {
    #[default]
    Csv,
    Json,
}

fn default_out() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    /// Output directory.
    #[serde(default = "default_out")]
    pub path: PathBuf,
    #[serde(default)]
    pub format: OutputFormat,
    /// Adds the elapsed wall time to the summary, which makes the summary
    /// differ between otherwise identical runs.
    #[serde(default)]
    pub record_wall_time: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            path: default_out(),
            format: OutputFormat::Csv,
            record_wall_time: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    pub chain: ChainSpec,
    #[serde(default)]
    pub schedule: Option<ScheduleConfig>,
    #[serde(default)]
    pub single_shot: SingleShotConfig,
    #[serde(default)]
    pub switch: Option<SwitchMode>,
    #[serde(default)]
    pub greedy: GreedyConfig,
    #[serde(default)]
    pub sweep: Option<SweepConfig>,
    #[serde(default)]
    pub output: OutputConfig,
    /// Replaces the disorder seed of the chain.
    #[serde(default)]
    pub seed: Option<u64>,
}

fn config_error(path: &Path, e: impl std::fmt::Display) -> Error {
    Error::Config(format!("{}: {e}", path.display()))
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let c: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        c.validate()?;
        Ok(c)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let c: Self = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let is_json = path
            .extension()
            .is_some_and(|e| e.eq_ignore_ascii_case("json"));
        let parsed = if is_json {
            Self::from_json(&text)
        } else {
            Self::from_toml(&text)
        };
        parsed.map_err(|e| match e {
            Error::Config(m) => config_error(path, m),
            other => other,
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configs always serialize")
    }

    /// The chain with the top-level seed applied.
    pub fn effective_chain(&self) -> ChainSpec {
        let mut chain = self.chain.clone();
        if let (Some(seed), Some(d)) = (self.seed, chain.disorder.as_mut()) {
            d.seed = seed;
        }
        chain
    }

    pub fn greedy_params(&self, chain: &ChainSpec) -> GreedyParams {
        self.greedy.resolve(chain)
    }

    /// The experiment actually executed per run: the sweep base for sweeps.
    pub fn run_kind(&self) -> ExperimentKind {
        match (&self.experiment, &self.sweep) {
            (ExperimentKind::Sweep, Some(s)) => s.base,
            (k, _) => *k,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        self.chain
            .validate()
            .map_err(|e| Error::Config(e.to_string()))?;
        if self.seed.is_some() && self.chain.disorder.is_none() {
            return bad("seed given but the chain has no disorder".into());
        }
        let ss = &self.single_shot;
        if !(ss.window > 0.0 && ss.window.is_finite())
            || !(ss.resolution > 0.0 && ss.resolution < ss.window)
        {
            return bad(format!(
                "single_shot window {} and resolution {} must be positive with resolution < window",
                ss.window, ss.resolution
            ));
        }

        match (self.experiment, &self.sweep) {
            (ExperimentKind::Sweep, None) => {
                return bad("experiment = \"sweep\" needs a [sweep] section".into())
            }
            (ExperimentKind::Sweep, Some(_)) => {}
            (k, Some(_)) => return bad(format!("[sweep] given but experiment is {k:?}")),
            _ => {}
        }

        let kind = self.run_kind();
        match kind {
            ExperimentKind::Sweep => return bad("a sweep cannot be the base of a sweep".into()),
            ExperimentKind::SingleShot => {}
            ExperimentKind::Endgate => {
                let Some(s) = &self.schedule else {
                    return bad("endgate experiments need a [schedule] section".into());
                };
                validate_schedule(s)?;
            }
            ExperimentKind::Switched => {
                let Some(mode) = &self.switch else {
                    return bad("switched experiments need a [switch] section".into());
                };
                if self.chain.coupling_model != CouplingModel::Xy {
                    return bad("switched experiments need an XY chain".into());
                }
                // field-mode B may come from the sweep axis
                let b_from_sweep = self
                    .sweep
                    .as_ref()
                    .is_some_and(|s| s.axis == SweepAxis::FieldStrength);
                let mut chain = self.chain.clone();
                if b_from_sweep {
                    chain.field_strength = Some(1.0);
                }
                crate::switched::build_switched(&chain, *mode, true)
                    .map_err(|e| Error::Config(e.to_string()))?;
                self.greedy
                    .resolve(&chain)
                    .validate()
                    .map_err(|e| Error::Config(format!("greedy: {e}")))?;
            }
        }

        if let Some(sw) = &self.sweep {
            if sw.values.is_empty() {
                return bad("sweep values are empty".into());
            }
            let integral = |v: f64| v >= 0.0 && v.fract() == 0.0 && v <= u64::MAX as f64;
            match sw.axis {
                SweepAxis::GateCount => {
                    let ok = matches!(
                        self.schedule,
                        Some(ScheduleConfig::Equidistant { .. } | ScheduleConfig::Repeated { .. })
                    ) && kind == ExperimentKind::Endgate;
                    if !ok {
                        return bad("gate_count sweeps need an endgate base with an equidistant or repeated schedule".into());
                    }
                    if sw.values.iter().any(|&v| !integral(v) || v < 1.0) {
                        return bad("gate counts must be positive integers".into());
                    }
                }
                SweepAxis::Seed => {
                    if self.chain.disorder.is_none() {
                        return bad("seed sweeps need a disordered chain".into());
                    }
                    if sw.values.iter().any(|&v| !integral(v)) {
                        return bad("seeds must be non-negative integers".into());
                    }
                }
                SweepAxis::FieldStrength => {
                    if kind != ExperimentKind::Switched
                        || !matches!(self.switch, Some(SwitchMode::Field { .. }))
                    {
                        return bad("field_strength sweeps need a field-mode switched base".into());
                    }
                    if sw.values.iter().any(|&v| !(v > 0.0 && v.is_finite())) {
                        return bad("field strengths must be positive".into());
                    }
                }
            }
        }
        Ok(())
    }
}

fn validate_schedule(s: &ScheduleConfig) -> Result<()> {
    let bad = |m: &str| Err(Error::Config(m.to_string()));
    let time_ok = |t: &TimeChoice| match t {
        TimeChoice::Fixed(v) => *v > 0.0 && v.is_finite(),
        TimeChoice::Derived(_) => true,
    };
    match s {
        ScheduleConfig::Equidistant {
            total_time,
            gate_count,
            scan_points,
        } => {
            if !time_ok(total_time) || *gate_count == 0 {
                return bad("equidistant schedules need total_time > 0 and gate_count ≥ 1");
            }
            if scan_points.is_some_and(|n| n < 2) {
                return bad("scan_points must be at least 2");
            }
        }
        ScheduleConfig::Explicit { intervals } => {
            if intervals.is_empty() || intervals.iter().any(|t| !(t.is_finite() && *t >= 0.0)) {
                return bad("explicit intervals must be a non-empty list of non-negative times");
            }
        }
        ScheduleConfig::Repeated {
            tau,
            max_gates,
            residual_tolerance,
        } => {
            if !time_ok(tau)
                || *max_gates == 0
                || residual_tolerance.is_nan()
                || *residual_tolerance < 0.0
            {
                return bad(
                    "repeated schedules need tau > 0, max_gates ≥ 1, residual_tolerance ≥ 0",
                );
            }
        }
    }
    Ok(())
}
