//! End-gate state transfer along spin chains.
//!
//! The crate simulates a chain of qubits `1..=N` plus a target qubit `N+1` in
//! the single-excitation sector, and implements a protocol that pulls the
//! excitation out of the chain with a sequence of two-qubit gates applied to
//! the last chain site and the target. Success probability grows monotonically
//! with every gate and converges to one.
//!
//! Module map:
//!
//! - [`sector`]: chain descriptions, basis states and sector Hamiltonians.
//! - [`propagator`]: exact time evolution by spectral decomposition.
//! - [`protocol`]: end gates, the iterated extraction loop and bookkeeping.
//! - [`switched`]: finite-duration gates from a switchable bond or field,
//!   driven by a greedy time optimizer.
//! - [`search`]: grid scans with golden-section refinement.
//! - [`experiment`], [`config`], [`schedule`]: the configuration-driven runner
//!   behind the `endgate` binary.

pub mod config;
pub mod error;
pub mod experiment;
pub mod propagator;
pub mod protocol;
pub mod schedule;
pub mod search;
pub mod sector;
pub mod switched;

pub use error::{Error, Result};
pub use propagator::SpectralPropagator;
pub use protocol::{EndGate, GateAction, ProtocolTrace, StepRecord};
pub use sector::{ChainSpec, CouplingModel, DisorderSpec, SectorHamiltonian, SectorState};
pub use switched::{GreedyParams, SegmentPlan, SwitchMode};

pub use num_complex::Complex64;
