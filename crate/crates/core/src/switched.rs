//! Finite-duration gates realized by sudden switching of a piecewise-constant
//! Hamiltonian, and a greedy optimizer for the switching times.
//!
//! Two hardware models are supported. In [`SwitchMode::Coupling`] the bond
//! between site `N` and the target is switched on (`Δ = 1`) to act as the gate
//! and off (`Δ = 0`) to freeze the target. In [`SwitchMode::Field`] the target
//! is permanently bonded to the chain and a strong field `B` on it is switched:
//! with the field on (`Δ = 1`) the energy mismatch `2B` suppresses the bond and
//! the target is (approximately) frozen; with the field off the bond acts.
//!
//! The greedy run alternates two phases. The frozen phase evolves to the next
//! peak of the amplitude on site `N`; the gate phase is then switched on for
//! the duration that maximizes the target population, or skipped when that
//! would not raise it by more than the gain threshold.

use nalgebra::DVector;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::propagator::{diagonalize, SpectralPropagator};
use crate::protocol::GATE_EPSILON;
use crate::search;
use crate::sector::{build_xy, ChainSpec, CouplingModel, SectorHamiltonian, SectorState};

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum SwitchMode {
    /// Switchable `(N, N+1)` bond of strength `bond_scale · J`.
    Coupling {
        #[serde(default = "one")]
        bond_scale: f64,
    },
    /// Switchable field on the target. Falls back to the chain's
    /// `field_strength` when `field_strength` is absent.
    Field {
        #[serde(default)]
        field_strength: Option<f64>,
    },
}

impl SwitchMode {
    pub fn coupling() -> Self {
        SwitchMode::Coupling { bond_scale: 1.0 }
    }

    pub fn field(b: f64) -> Self {
        SwitchMode::Field {
            field_strength: Some(b),
        }
    }

    /// The value of `Δ` during the frozen phase.
    pub fn frozen_delta(&self) -> bool {
        matches!(self, SwitchMode::Field { .. })
    }

    /// Resolved field strength for field mode.
    pub fn field_strength(&self, spec: &ChainSpec) -> Result<f64> {
        match self {
            SwitchMode::Field { field_strength } => {
                let b = field_strength
                    .or(spec.field_strength)
                    .ok_or_else(|| Error::input("field mode needs a field strength B"))?;
                if !(b > 0.0 && b.is_finite()) {
                    return Err(Error::input(format!(
                        "field strength must be positive, got {b}"
                    )));
                }
                Ok(b)
            }
            SwitchMode::Coupling { .. } => Err(Error::input("coupling mode has no field")),
        }
    }

    fn validate(&self, spec: &ChainSpec) -> Result<()> {
        match self {
            SwitchMode::Coupling { bond_scale } => {
                if !(*bond_scale > 0.0 && bond_scale.is_finite()) {
                    return Err(Error::input(format!(
                        "bond scale must be positive, got {bond_scale}"
                    )));
                }
                Ok(())
            }
            SwitchMode::Field { .. } => self.field_strength(spec).map(|_| ()),
        }
    }

    /// Ratio of the gate-phase bond to `J`; gate durations scale inversely.
    fn gate_speed(&self) -> f64 {
        match self {
            SwitchMode::Coupling { bond_scale } => *bond_scale,
            SwitchMode::Field { .. } => 1.0,
        }
    }
}

/// What the frozen phase maximizes when looking for the next peak.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PeakObjective {
    /// `|⟨N|ψ(t)⟩|`, the amplitude on the last chain site.
    #[default]
    SiteAmplitude,
    /// Target population reachable by a resonant two-level rotation between
    /// `|N⟩` and `|N+1⟩`, which also accounts for their relative phase. Equal
    /// to `|a_N|² + |a_T|²` whenever the phases line up, as they always do in
    /// coupling mode.
    PhaseMatched,
}

/// Free parameters of the greedy optimizer. Times are in units of `1/J`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GreedyParams {
    /// Lookahead of each frozen-phase peak search.
    pub search_window: f64,
    /// Lookahead of each gate-phase search; defaults to `search_window`
    /// divided by the gate bond scale.
    #[serde(default)]
    pub gate_window: Option<f64>,
    pub grid_points: usize,
    pub refine_tolerance: f64,
    /// Minimum target-population gain for a gate segment to be accepted.
    pub gain_threshold: f64,
    pub step_budget: usize,
    /// Stop after this many consecutive steps that fail to raise the best
    /// target population by more than `gain_threshold`.
    #[serde(default = "default_stall")]
    pub stall_steps: usize,
    #[serde(default)]
    pub peak_objective: PeakObjective,
}

fn default_stall() -> usize {
    20
}

impl GreedyParams {
    /// Defaults for a chain: window `4N/J`, 2048 grid points, tolerance
    /// `1e-4/J`, gain threshold `1e-4`, 200 steps.
    pub fn for_chain(spec: &ChainSpec) -> Self {
        Self {
            search_window: 4.0 * spec.n_sites as f64 / spec.base_coupling,
            gate_window: None,
            grid_points: 2048,
            refine_tolerance: 1e-4 / spec.base_coupling,
            gain_threshold: 1e-4,
            step_budget: 200,
            stall_steps: default_stall(),
            peak_objective: PeakObjective::SiteAmplitude,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("search_window", self.search_window),
            ("refine_tolerance", self.refine_tolerance),
            ("gain_threshold", self.gain_threshold),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::input(format!("{name} must be positive, got {v}")));
            }
        }
        if let Some(w) = self.gate_window {
            if !(w > 0.0 && w.is_finite()) {
                return Err(Error::input(format!(
                    "gate_window must be positive, got {w}"
                )));
            }
        }
        if self.grid_points < 2 || self.step_budget == 0 || self.stall_steps == 0 {
            return Err(Error::input(
                "grid_points must be ≥ 2, step_budget and stall_steps ≥ 1",
            ));
        }
        let cell = self.search_window.min(self.gate_window()) / self.grid_points as f64;
        if self.refine_tolerance >= cell {
            return Err(Error::input(format!(
                "refine_tolerance {} must be below the grid cell {cell}",
                self.refine_tolerance
            )));
        }
        Ok(())
    }

    pub fn gate_window(&self) -> f64 {
        self.gate_window.unwrap_or(self.search_window)
    }
}

/// `H` for one setting of the switch.
pub fn build_switched(
    spec: &ChainSpec,
    mode: SwitchMode,
    delta_on: bool,
) -> Result<SectorHamiltonian> {
    if spec.coupling_model != CouplingModel::Xy {
        return Err(Error::input("switched dynamics are defined for XY chains"));
    }
    mode.validate(spec)?;
    let n = spec.n_sites;
    let j = spec.base_coupling;
    match mode {
        SwitchMode::Coupling { bond_scale } => {
            let h = build_xy(spec, false)?;
            if !delta_on {
                return Ok(h);
            }
            let mut m = h.matrix().clone();
            m[(n + 1, n)] = Complex64::new(bond_scale * j, 0.0);
            m[(n, n + 1)] = Complex64::new(bond_scale * j, 0.0);
            SectorHamiltonian::from_matrix(h.spec().clone(), m, true)
        }
        SwitchMode::Field { .. } => {
            let b = mode.field_strength(spec)?;
            let h = build_xy(spec, true)?;
            let mut m = h.matrix().clone();
            if delta_on {
                // σᶻ flips sign on the target excitation; uniform offsets dropped
                m[(n + 1, n + 1)] += Complex64::new(2.0 * b, 0.0);
            }
            let mut s = h.spec().clone();
            s.field_strength = Some(b);
            SectorHamiltonian::from_matrix(s, m, true)
        }
    }
}

fn check_dims(state: &SectorState, p: &SpectralPropagator) -> Result<()> {
    if state.dimension() != p.dimension() {
        return Err(Error::input("state and Hamiltonian dimensions differ"));
    }
    Ok(())
}

/// Two-level reachable target population for end amplitudes `a` (site N) and
/// `b` (target).
fn phase_matched(a: Complex64, b: Complex64) -> f64 {
    let pa = a.norm_sqr();
    let pb = b.norm_sqr();
    let cross = (b.conj() * Complex64::new(0.0, -1.0) * a).re;
    0.5 * (pa + pb) + (0.25 * (pb - pa).powi(2) + cross * cross).sqrt()
}

/// Frozen-phase evolution time `t*` in `(0, search_window]` at which the
/// amplitude on site `N` peaks, and that amplitude `⟨N|U(t*)|ψ⟩`.
pub fn find_next_peak(
    state: &SectorState,
    h_frozen: &SectorHamiltonian,
    params: &GreedyParams,
) -> Result<(f64, Complex64)> {
    params.validate()?;
    let p = diagonalize(h_frozen)?;
    find_next_peak_with(state, &p, params)
}

fn find_next_peak_with(
    state: &SectorState,
    frozen: &SpectralPropagator,
    params: &GreedyParams,
) -> Result<(f64, Complex64)> {
    check_dims(state, frozen)?;
    let n = state.n_sites();
    let end = frozen.amplitude_series(state, n);
    let peak = match params.peak_objective {
        PeakObjective::SiteAmplitude => search::next_peak(
            |t| end.probability(t),
            params.search_window,
            params.grid_points,
            params.refine_tolerance,
        ),
        PeakObjective::PhaseMatched => {
            let target = frozen.amplitude_series(state, n + 1);
            // the relative phase turns over at the detuning rate, so sample finer
            search::next_peak(
                |t| phase_matched(end.amplitude(t), target.amplitude(t)),
                params.search_window,
                params.grid_points * 8,
                params.refine_tolerance,
            )
        }
    };
    let amp = end.amplitude(peak.t);
    if amp.norm_sqr() <= GATE_EPSILON {
        return Err(Error::numerical(format!(
            "no amplitude reaches site {n} within {} time units",
            params.search_window
        )));
    }
    Ok((peak.t, amp))
}

/// Gate-phase duration in `(0, gate_window]` maximizing the target population,
/// and the gain over the current population (may be ≤ 0).
pub fn optimize_switch_interval(
    state: &SectorState,
    h_gate: &SectorHamiltonian,
    params: &GreedyParams,
) -> Result<(f64, f64)> {
    params.validate()?;
    let p = diagonalize(h_gate)?;
    optimize_with(state, &p, params.gate_window(), params)
}

fn optimize_with(
    state: &SectorState,
    gate: &SpectralPropagator,
    window: f64,
    params: &GreedyParams,
) -> Result<(f64, f64)> {
    check_dims(state, gate)?;
    let target = gate.amplitude_series(state, state.n_sites() + 1);
    let best = search::maximize_earliest(
        |t| target.probability(t),
        0.0,
        window,
        params.grid_points,
        params.refine_tolerance,
        // refined values are only good to about this much
        1e-2 * params.gain_threshold,
    );
    Ok((best.t, best.value - state.probability(state.n_sites() + 1)))
}

/// One constant-Hamiltonian piece of a switching waveform.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub duration: f64,
    pub delta_on: bool,
    /// Target population at the end of the segment.
    pub target_probability: f64,
}

/// One greedy step: a frozen phase to the next peak and a trial gate phase.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GreedyStep {
    pub frozen_duration: f64,
    /// Zero when the trial was rejected.
    pub gate_duration: f64,
    pub accepted: bool,
    /// Trial gain, accepted or not.
    pub gain: f64,
    /// `|a_N|` and `|a_T|` at the peak, normalized by their joint norm; the
    /// magnitudes an instantaneous end gate would use.
    pub c_abs: f64,
    pub d_abs: f64,
    pub target_probability: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    Budget,
    Stalled,
    /// The frozen phase no longer brings amplitude to site `N`.
    Exhausted,
}

/// Realized switching waveform with its bookkeeping.
#[derive(Debug, Clone)]
pub struct SegmentPlan {
    pub spec: ChainSpec,
    pub mode: SwitchMode,
    pub segments: Vec<Segment>,
    pub steps: Vec<GreedyStep>,
    pub stop: StopReason,
    pub final_state: SectorState,
}

impl SegmentPlan {
    pub fn final_probability(&self) -> f64 {
        self.final_state.probability(self.spec.n_sites + 1)
    }

    pub fn accepted(&self) -> usize {
        self.steps.iter().filter(|s| s.accepted).count()
    }

    pub fn total_time(&self) -> f64 {
        self.segments.iter().map(|s| s.duration).sum()
    }
}

/// Greedy switching schedule starting from `|1⟩`.
pub fn greedy_run(
    spec: &ChainSpec,
    mode: SwitchMode,
    params: &GreedyParams,
) -> Result<SegmentPlan> {
    params.validate()?;
    let frozen_delta = mode.frozen_delta();
    let frozen = diagonalize(&build_switched(spec, mode, frozen_delta)?)?;
    let gate = diagonalize(&build_switched(spec, mode, !frozen_delta)?)?;
    let gate_window = params
        .gate_window
        .unwrap_or(params.search_window / mode.gate_speed());

    let n = spec.n_sites;
    let mut state = SectorState::basis(n, 1);
    let mut segments = Vec::new();
    let mut steps = Vec::new();
    let mut best = 0.0;
    let mut stalled = 0;
    let mut stop = StopReason::Budget;

    for _ in 0..params.step_budget {
        let (t_peak, _) = match find_next_peak_with(&state, &frozen, params) {
            Ok(found) => found,
            Err(Error::Numerical(_)) => {
                stop = StopReason::Exhausted;
                break;
            }
            Err(e) => return Err(e),
        };
        state = frozen.evolve(&state, t_peak)?;
        let frozen_p = state.probability(n + 1);
        segments.push(Segment {
            duration: t_peak,
            delta_on: frozen_delta,
            target_probability: frozen_p,
        });

        let a_n = state.amplitude(n).norm();
        let a_t = state.amplitude(n + 1).norm();
        let joint = a_n.hypot(a_t);
        let (c_abs, d_abs) = if joint > 0.0 {
            (a_n / joint, a_t / joint)
        } else {
            (0.0, 1.0)
        };

        let (duration, gain) = optimize_with(&state, &gate, gate_window, params)?;
        let accepted = gain > params.gain_threshold;
        if accepted {
            state = gate.evolve(&state, duration)?;
            segments.push(Segment {
                duration,
                delta_on: !frozen_delta,
                target_probability: state.probability(n + 1),
            });
        }
        let p = state.probability(n + 1);
        steps.push(GreedyStep {
            frozen_duration: t_peak,
            gate_duration: if accepted { duration } else { 0.0 },
            accepted,
            gain,
            c_abs,
            d_abs,
            target_probability: p,
        });

        if p > best + params.gain_threshold {
            best = p;
            stalled = 0;
        } else {
            stalled += 1;
            if stalled >= params.stall_steps {
                stop = StopReason::Stalled;
                break;
            }
        }
    }

    let norm = state.norm();
    if (norm - 1.0).abs() > 1e-9 {
        return Err(Error::numerical(format!("norm drifted to {norm}")));
    }
    Ok(SegmentPlan {
        spec: spec.clone(),
        mode,
        segments,
        steps,
        stop,
        final_state: state,
    })
}

/// Re-simulates a switching waveform from `|1⟩`, returning the target
/// population after each segment.
pub fn replay_segments(
    spec: &ChainSpec,
    mode: SwitchMode,
    segments: &[(f64, bool)],
) -> Result<Vec<f64>> {
    let off = diagonalize(&build_switched(spec, mode, false)?)?;
    let on = diagonalize(&build_switched(spec, mode, true)?)?;
    let n = spec.n_sites;
    let mut v: DVector<Complex64> = SectorState::basis(n, 1).into_amplitudes();
    let mut out = Vec::with_capacity(segments.len());
    for &(duration, delta_on) in segments {
        let p = if delta_on { &on } else { &off };
        v = p.evolve_vector(&v, duration);
        out.push(v[n + 1].norm_sqr());
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn params(spec: &ChainSpec) -> GreedyParams {
        GreedyParams::for_chain(spec)
    }

    #[test]
    fn coupling_off_equals_bare_chain() {
        let spec = ChainSpec::xy(5);
        let a = build_switched(&spec, SwitchMode::coupling(), false).unwrap();
        let b = build_xy(&spec, false).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn coupling_on_adds_target_bond() {
        let spec = ChainSpec::xy(2);
        let h = build_switched(&spec, SwitchMode::coupling(), true).unwrap();
        assert_eq!(h.element(3, 2), Complex64::new(1.0, 0.0));
        assert_eq!(h.element(2, 3), Complex64::new(1.0, 0.0));
        assert!(h.couples_target());
        let strong =
            build_switched(&spec, SwitchMode::Coupling { bond_scale: 100.0 }, true).unwrap();
        assert_eq!(strong.element(3, 2), Complex64::new(100.0, 0.0));
    }

    #[test]
    fn field_mode_shifts_target_energy() {
        let spec = ChainSpec::xy(3);
        let on = build_switched(&spec, SwitchMode::field(20.0), true).unwrap();
        let off = build_switched(&spec, SwitchMode::field(20.0), false).unwrap();
        assert_eq!(on.element(4, 4), Complex64::new(40.0, 0.0));
        assert_eq!(off.element(4, 4), Complex64::new(0.0, 0.0));
        assert_eq!(on.element(4, 3), Complex64::new(1.0, 0.0));
        assert_eq!(on.element(0, 0), Complex64::new(0.0, 0.0));
    }

    #[test]
    fn field_mode_requires_field() {
        let spec = ChainSpec::xy(3);
        let mode = SwitchMode::Field {
            field_strength: None,
        };
        assert!(build_switched(&spec, mode, true).is_err());
        assert!(build_switched(&spec.clone().with_field(5.0), mode, true).is_ok());
        assert!(build_switched(&ChainSpec::heisenberg(3), SwitchMode::coupling(), true).is_err());
    }

    #[test]
    fn params_validation() {
        let spec = ChainSpec::xy(10);
        let mut p = params(&spec);
        assert!(p.validate().is_ok());
        p.refine_tolerance = 1.0;
        assert!(p.validate().is_err());
        let mut p = params(&spec);
        p.grid_points = 0;
        assert!(p.validate().is_err());
        let mut p = params(&spec);
        p.gain_threshold = 0.0;
        assert!(p.validate().is_err());
    }

    #[test]
    fn two_site_peak() {
        let spec = ChainSpec::xy(2);
        let h = build_switched(&spec, SwitchMode::coupling(), false).unwrap();
        let mut p = params(&spec);
        p.search_window = 2.0 * PI;
        let (t, amp) = find_next_peak(&SectorState::basis(2, 1), &h, &p).unwrap();
        assert!((t - PI / 2.0).abs() < p.refine_tolerance);
        assert!((amp.norm() - 1.0).abs() < 1e-8);
    }

    #[test]
    fn vacuum_never_reaches_the_end() {
        let spec = ChainSpec::xy(4);
        let h = build_switched(&spec, SwitchMode::coupling(), false).unwrap();
        assert!(find_next_peak(&SectorState::basis(4, 0), &h, &params(&spec)).is_err());
    }

    #[test]
    fn isolated_bond_rabi() {
        // N = 1: site N is the whole chain, so the switched bond is isolated
        let spec = ChainSpec::xy(1);
        let h = build_switched(&spec, SwitchMode::coupling(), true).unwrap();
        let mut p = params(&spec);
        p.search_window = 2.0 * PI;
        let (d, gain) = optimize_switch_interval(&SectorState::basis(1, 1), &h, &p).unwrap();
        assert!((d - PI / 2.0).abs() < p.refine_tolerance);
        assert!((gain - 1.0).abs() < 1e-8);
    }

    #[test]
    fn two_site_gate_from_end_site() {
        // three coupled sites from the middle: ψ₃(t) = -i sin(√2 t)/√2
        let spec = ChainSpec::xy(2);
        let h = build_switched(&spec, SwitchMode::coupling(), true).unwrap();
        let mut p = params(&spec);
        p.search_window = 2.0 * PI;
        let (d, gain) = optimize_switch_interval(&SectorState::basis(2, 2), &h, &p).unwrap();
        assert!((d - PI / (2.0 * 2f64.sqrt())).abs() < p.refine_tolerance);
        assert!((gain - 0.5).abs() < 1e-8);
    }

    #[test]
    fn full_target_cannot_gain() {
        let spec = ChainSpec::xy(6);
        let h = build_switched(&spec, SwitchMode::coupling(), true).unwrap();
        let (_, gain) =
            optimize_switch_interval(&SectorState::basis(6, 7), &h, &params(&spec)).unwrap();
        assert!(gain <= 1e-12, "{gain}");
    }

    #[test]
    fn phase_matched_objective_is_two_level_maximum() {
        let a = Complex64::new(0.3, 0.4);
        let b = Complex64::new(-0.2, 0.6);
        let brute = (0..200_000)
            .map(|k| {
                let th = PI * k as f64 / 200_000.0;
                (b * th.cos() - Complex64::new(0.0, 1.0) * a * th.sin()).norm_sqr()
            })
            .fold(0.0, f64::max);
        assert!((phase_matched(a, b) - brute).abs() < 1e-9);
    }

    #[test]
    fn two_site_greedy_converges() {
        // three-site closed forms: 1/2 after the first gate, (2+√3)/4 after the second
        let spec = ChainSpec::xy(2);
        let mut p = params(&spec);
        p.refine_tolerance = 1e-9;
        let plan = greedy_run(&spec, SwitchMode::coupling(), &p).unwrap();
        let accepted: Vec<f64> = plan
            .steps
            .iter()
            .filter(|s| s.accepted)
            .map(|s| s.target_probability)
            .collect();
        assert!((accepted[0] - 0.5).abs() < 1e-7);
        assert!((accepted[1] - (2.0 + 3f64.sqrt()) / 4.0).abs() < 1e-7);
        assert!(plan.final_probability() >= 1.0 - 1e-6);
        assert!(plan.accepted() <= 4);
        // the first gate takes the first Rabi maximum, t = π/(2√2)
        assert!((plan.steps[0].gate_duration - PI / (2.0 * 2f64.sqrt())).abs() < 1e-6);
    }

    #[test]
    fn replay_reproduces_plan() {
        let spec = ChainSpec::xy(6);
        let mut p = params(&spec);
        p.step_budget = 10;
        let plan = greedy_run(&spec, SwitchMode::field(20.0), &p).unwrap();
        let segs: Vec<(f64, bool)> = plan
            .segments
            .iter()
            .map(|s| (s.duration, s.delta_on))
            .collect();
        let probs = replay_segments(&spec, plan.mode, &segs).unwrap();
        for (s, q) in plan.segments.iter().zip(probs) {
            assert!((s.target_probability - q).abs() < 1e-9);
        }
    }
}
