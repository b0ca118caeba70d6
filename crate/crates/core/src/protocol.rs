//! End-gate extraction protocol with instantaneous gates.
//!
//! Starting from `|1⟩`, the chain evolves freely for an interval `t_k` while
//! the target is decoupled, then a two-qubit gate `W(c_k, d_k)` on sites `N`
//! and `N+1` rotates everything on `|N⟩` into the target. After `k` steps the
//! target holds amplitude `√p_k` with `p_k` non-decreasing in `k`.

use nalgebra::DVector;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::propagator::{diagonalize, SpectralPropagator};
use crate::sector::{ChainSpec, SectorHamiltonian, SectorState};

/// Gates are skipped when `|a_N|² + |a_T|²` does not exceed this value.
pub const GATE_EPSILON: f64 = 1e-14;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// The gate `W(c, d)`: identity on sites `0..N`, and on `(|N⟩, |N+1⟩)` the
/// unitary `[[d, -c], [c*, d*]]`, which maps `c|N⟩ + d|N+1⟩` to `|N+1⟩`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EndGate {
    c: Complex64,
    d: Complex64,
}

impl EndGate {
    pub const NORM_TOLERANCE: f64 = 1e-12;

    pub fn new(c: Complex64, d: Complex64) -> Result<Self> {
        let norm = c.norm_sqr() + d.norm_sqr();
        if (norm - 1.0).abs() > Self::NORM_TOLERANCE {
            return Err(Error::input(format!("gate needs |c|²+|d|²=1, got {norm}")));
        }
        Ok(Self { c, d })
    }

    pub fn identity() -> Self {
        Self {
            c: ZERO,
            d: Complex64::new(1.0, 0.0),
        }
    }

    pub fn c(&self) -> Complex64 {
        self.c
    }

    pub fn d(&self) -> Complex64 {
        self.d
    }

    /// `W†`, which is again an end gate: `W(c, d)† = W(-c, d*)`.
    pub fn adjoint(&self) -> Self {
        Self {
            c: -self.c,
            d: self.d.conj(),
        }
    }

    /// `(a_N, a_T) ↦ (d a_N − c a_T, c* a_N + d* a_T)`.
    pub fn act(&self, a_n: Complex64, a_t: Complex64) -> (Complex64, Complex64) {
        (
            self.d * a_n - self.c * a_t,
            self.c.conj() * a_n + self.d.conj() * a_t,
        )
    }

    pub(crate) fn apply_in_place(&self, v: &mut DVector<Complex64>) {
        let n = v.len() - 2;
        let (a_n, a_t) = self.act(v[n], v[n + 1]);
        v[n] = a_n;
        v[n + 1] = a_t;
    }
}

/// What happened at the end of a step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GateAction {
    Applied(EndGate),
    /// Both end amplitudes vanished, so no gate is defined; identity applied.
    Skipped,
}

impl GateAction {
    pub fn gate(&self) -> Option<&EndGate> {
        match self {
            GateAction::Applied(g) => Some(g),
            GateAction::Skipped => None,
        }
    }

    pub fn is_applied(&self) -> bool {
        matches!(self, GateAction::Applied(_))
    }

    /// The gate, or the identity when skipped.
    pub fn effective(&self) -> EndGate {
        self.gate().copied().unwrap_or_else(EndGate::identity)
    }
}

/// Gate for end amplitudes `(a_N, a_T)` and the probability `p = |a_N|² + |a_T|²`
/// that the target holds once it is applied.
pub fn compute_gate(a_n: Complex64, a_t: Complex64) -> (GateAction, f64) {
    let p = a_n.norm_sqr() + a_t.norm_sqr();
    if p > GATE_EPSILON {
        let s = p.sqrt();
        (
            GateAction::Applied(EndGate {
                c: a_n / s,
                d: a_t / s,
            }),
            p,
        )
    } else {
        (GateAction::Skipped, p)
    }
}

pub fn apply_gate(state: &SectorState, gate: &EndGate) -> SectorState {
    let mut v = state.amplitudes().clone();
    gate.apply_in_place(&mut v);
    SectorState::from_raw(v)
}

/// Intervals for `gates` equidistant gates over `total_time`.
pub fn equidistant_schedule(total_time: f64, gates: usize) -> Result<Vec<f64>> {
    if gates == 0 {
        return Err(Error::input("gate count must be at least 1"));
    }
    if !(total_time > 0.0 && total_time.is_finite()) {
        return Err(Error::input(format!(
            "total time must be positive, got {total_time}"
        )));
    }
    Ok(vec![total_time / gates as f64; gates])
}

/// One protocol step: free evolution for `time`, then the gate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepRecord {
    pub time: f64,
    pub gate: GateAction,
    /// `p_k`: probability that the excitation sits on the target after the gate.
    pub cumulative_probability: f64,
}

/// Complete record of a protocol run, sufficient to replay it.
#[derive(Debug, Clone)]
pub struct ProtocolTrace {
    hamiltonian: SectorHamiltonian,
    steps: Vec<StepRecord>,
    final_state: SectorState,
    residual: f64,
}

impl ProtocolTrace {
    pub fn spec(&self) -> &ChainSpec {
        self.hamiltonian.spec()
    }

    pub fn hamiltonian(&self) -> &SectorHamiltonian {
        &self.hamiltonian
    }

    pub fn steps(&self) -> &[StepRecord] {
        &self.steps
    }

    pub fn final_state(&self) -> &SectorState {
        &self.final_state
    }

    /// `1 − p_ℓ`.
    pub fn residual(&self) -> f64 {
        self.residual
    }

    pub fn final_probability(&self) -> f64 {
        self.steps.last().map_or(0.0, |s| s.cumulative_probability)
    }

    pub fn probabilities(&self) -> Vec<f64> {
        self.steps
            .iter()
            .map(|s| s.cumulative_probability)
            .collect()
    }

    pub fn intervals(&self) -> Vec<f64> {
        self.steps.iter().map(|s| s.time).collect()
    }

    pub fn gates_applied(&self) -> usize {
        self.steps.iter().filter(|s| s.gate.is_applied()).count()
    }

    /// Time elapsed at the end of each step.
    pub fn elapsed(&self) -> Vec<f64> {
        self.steps
            .iter()
            .scan(0.0, |acc, s| {
                *acc += s.time;
                Some(*acc)
            })
            .collect()
    }
}

/// When to stop a run that repeats a fixed interval.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StopRule {
    pub max_gates: usize,
    /// Stop once `1 − p_k` is at or below this value.
    pub residual_tolerance: f64,
}

fn check_frozen_target(h: &SectorHamiltonian) -> Result<()> {
    if h.couples_target() {
        return Err(Error::input(
            "the protocol needs a Hamiltonian that leaves the target uncoupled",
        ));
    }
    Ok(())
}

fn check_intervals(intervals: &[f64]) -> Result<()> {
    if intervals.is_empty() {
        return Err(Error::input("interval list is empty"));
    }
    if let Some(t) = intervals.iter().find(|t| !(t.is_finite() && **t >= 0.0)) {
        return Err(Error::input(format!("invalid interval {t}")));
    }
    Ok(())
}

struct Runner<'a> {
    propagator: &'a SpectralPropagator,
    state: DVector<Complex64>,
    steps: Vec<StepRecord>,
}

impl<'a> Runner<'a> {
    fn new(propagator: &'a SpectralPropagator, n_sites: usize) -> Self {
        Self {
            propagator,
            state: SectorState::basis(n_sites, 1).into_amplitudes(),
            steps: Vec::new(),
        }
    }

    fn step(&mut self, dt: f64) -> f64 {
        self.state = self.propagator.evolve_vector(&self.state, dt);
        let n = self.state.len() - 2;
        let (gate, p) = compute_gate(self.state[n], self.state[n + 1]);
        let p = match gate {
            GateAction::Applied(g) => {
                g.apply_in_place(&mut self.state);
                p
            }
            GateAction::Skipped => self.state[n + 1].norm_sqr(),
        };
        self.steps.push(StepRecord {
            time: dt,
            gate,
            cumulative_probability: p,
        });
        p
    }

    fn finish(self, h: &SectorHamiltonian) -> Result<ProtocolTrace> {
        let final_state = SectorState::from_amplitudes(self.state)?;
        let p = self.steps.last().map_or(0.0, |s| s.cumulative_probability);
        Ok(ProtocolTrace {
            hamiltonian: h.clone(),
            steps: self.steps,
            final_state,
            residual: 1.0 - p,
        })
    }
}

fn propagator_for(h: &SectorHamiltonian, p: &SpectralPropagator) -> Result<()> {
    if !p.diagonalizes(h) {
        return Err(Error::input(
            "propagator was built from a different Hamiltonian",
        ));
    }
    Ok(())
}

/// Runs the protocol from `|1⟩` with one gate after each interval.
pub fn run_protocol(h: &SectorHamiltonian, intervals: &[f64]) -> Result<ProtocolTrace> {
    let p = diagonalize(h)?;
    run_protocol_with(h, &p, intervals)
}

/// As [`run_protocol`], reusing an existing diagonalization of `h`.
pub fn run_protocol_with(
    h: &SectorHamiltonian,
    propagator: &SpectralPropagator,
    intervals: &[f64],
) -> Result<ProtocolTrace> {
    check_frozen_target(h)?;
    check_intervals(intervals)?;
    propagator_for(h, propagator)?;
    let mut runner = Runner::new(propagator, h.n_sites());
    for &dt in intervals {
        runner.step(dt);
    }
    runner.finish(h)
}

/// Repeats the interval `tau` until `stop` triggers.
pub fn run_until(h: &SectorHamiltonian, tau: f64, stop: StopRule) -> Result<ProtocolTrace> {
    let p = diagonalize(h)?;
    run_until_with(h, &p, tau, stop)
}

pub fn run_until_with(
    h: &SectorHamiltonian,
    propagator: &SpectralPropagator,
    tau: f64,
    stop: StopRule,
) -> Result<ProtocolTrace> {
    check_frozen_target(h)?;
    check_intervals(&[tau])?;
    propagator_for(h, propagator)?;
    if stop.max_gates == 0 {
        return Err(Error::input("gate budget must be at least 1"));
    }
    let mut runner = Runner::new(propagator, h.n_sites());
    for _ in 0..stop.max_gates {
        let p = runner.step(tau);
        if 1.0 - p <= stop.residual_tolerance {
            break;
        }
    }
    runner.finish(h)
}

/// `p_ℓ = 1 − ‖(Π_k P U_k)|1⟩‖²`, where `P` removes `|0⟩`, `|N⟩` and `|N+1⟩`.
/// Computed without constructing any gate.
pub fn residual_probability(h: &SectorHamiltonian, intervals: &[f64]) -> Result<f64> {
    check_frozen_target(h)?;
    check_intervals(intervals)?;
    let p = diagonalize(h)?;
    let n = h.n_sites();
    let mut v = SectorState::basis(n, 1).into_amplitudes();
    for &dt in intervals {
        v = p.evolve_vector(&v, dt);
        project_out_ends(&mut v);
    }
    Ok(1.0 - v.norm_squared())
}

fn project_out_ends(v: &mut DVector<Complex64>) {
    let n = v.len() - 2;
    v[0] = ZERO;
    v[n] = ZERO;
    v[n + 1] = ZERO;
}

/// Success probability after `gates` equidistant gates spread over `total_time`,
/// via the projector formula. Used for scanning `p_ℓ(t)` curves.
pub fn equidistant_probability(
    propagator: &SpectralPropagator,
    total_time: f64,
    gates: usize,
) -> f64 {
    let n = propagator.n_sites();
    if n == 1 {
        return 1.0;
    }
    let dt = total_time / gates as f64;
    // P U P on chain sites 1..N-1, the range of P, applied as V_s Φ V_s†
    let vs = propagator.eigenvectors().rows(1, n - 1);
    let phases: DVector<Complex64> = DVector::from_iterator(
        propagator.dimension(),
        propagator
            .eigenvalues()
            .iter()
            .map(|&l| Complex64::from_polar(1.0, -l * dt)),
    );
    let mut v = DVector::from_element(n - 1, ZERO);
    v[0] = Complex64::new(1.0, 0.0);
    for _ in 0..gates {
        let coeffs = vs.ad_mul(&v).component_mul(&phases);
        v = vs * coeffs;
    }
    1.0 - v.norm_squared()
}

/// Applies the steps of a run (evolution, then gate or identity) to `state`.
pub fn apply_steps(
    propagator: &SpectralPropagator,
    state: &SectorState,
    steps: &[StepRecord],
) -> Result<SectorState> {
    if state.dimension() != propagator.dimension() {
        return Err(Error::input("state and propagator dimensions differ"));
    }
    let mut v = state.amplitudes().clone();
    for s in steps {
        v = propagator.evolve_vector(&v, s.time);
        if let GateAction::Applied(g) = s.gate {
            g.apply_in_place(&mut v);
        }
    }
    Ok(SectorState::from_raw(v))
}

/// Sends the qubit `α|0⟩ + β|1⟩` through the gate sequence computed for `|1⟩`.
pub fn transfer_qubit(
    alpha: Complex64,
    beta: Complex64,
    h: &SectorHamiltonian,
    intervals: &[f64],
) -> Result<SectorState> {
    let input = SectorState::qubit(h.n_sites(), alpha, beta)?;
    let p = diagonalize(h)?;
    let trace = run_protocol_with(h, &p, intervals)?;
    apply_steps(&p, &input, trace.steps())
}

/// Runs a trace backwards from its own final state.
pub fn adjoint_replay(trace: &ProtocolTrace) -> Result<SectorState> {
    adjoint_replay_from(trace, trace.final_state())
}

/// Applies `(W_k U_k)†` for `k = ℓ, …, 1` to `state`. Starting from `|N+1⟩`
/// this prepares a state whose overlap with `|1⟩` is `√p_ℓ`.
pub fn adjoint_replay_from(trace: &ProtocolTrace, state: &SectorState) -> Result<SectorState> {
    let p = diagonalize(trace.hamiltonian())?;
    if state.dimension() != p.dimension() {
        return Err(Error::input("state and trace dimensions differ"));
    }
    let mut v = state.amplitudes().clone();
    for s in trace.steps().iter().rev() {
        if let GateAction::Applied(g) = s.gate {
            g.adjoint().apply_in_place(&mut v);
        }
        v = p.evolve_vector(&v, -s.time);
    }
    Ok(SectorState::from_raw(v))
}

/// Average fidelity `1/2 + √p/3 + p/6` of the phase-corrected qubit channel
/// whose excitation survives with probability `p`.
pub fn average_fidelity(p: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::input(format!("probability {p} outside [0, 1]")));
    }
    Ok(0.5 + p.sqrt() / 3.0 + p / 6.0)
}
