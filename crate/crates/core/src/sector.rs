//! Single-excitation sector of a chain of `N` qubits plus one target qubit.
//!
//! The basis is `|0⟩` (all spins down), followed by `|n⟩ = σ⁺_n|0⟩` for
//! `n = 1..=N+1`, so vectors and matrices have dimension `N + 2` and are
//! indexed directly by site number. Energies are in units of the base coupling
//! `J`, times in units of `1/J`, with `ħ = 1`.

use std::collections::hash_map::DefaultHasher;
use std::hash::{Hash, Hasher};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Nearest-neighbour interaction used along the chain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CouplingModel {
    /// `J (σ⁻_n σ⁺_{n+1} + h.c.)`: pure hopping with amplitude `J`.
    Xy,
    /// `J σ⃗_n·σ⃗_{n+1}`, shifted so that `|0⟩` has zero energy.
    Heisenberg,
    /// XY hopping with the mirror-symmetric profile `J √(n (N − n))`.
    Engineered,
}

impl std::fmt::Display for CouplingModel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            CouplingModel::Xy => "xy",
            CouplingModel::Heisenberg => "heisenberg",
            CouplingModel::Engineered => "engineered",
        })
    }
}

/// Seeded multiplicative bond disorder: every chain bond is scaled by `1 + δ`
/// with `δ` uniform on `[-σ, σ]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DisorderSpec {
    pub relative_amplitude: f64,
    pub seed: u64,
}

impl DisorderSpec {
    pub fn new(relative_amplitude: f64, seed: u64) -> Result<Self> {
        let d = Self {
            relative_amplitude,
            seed,
        };
        d.validate()?;
        Ok(d)
    }

    pub fn validate(&self) -> Result<()> {
        let s = self.relative_amplitude;
        if !(0.0..1.0).contains(&s) {
            return Err(Error::input(format!(
                "disorder amplitude must lie in [0, 1), got {s}"
            )));
        }
        Ok(())
    }
}

fn default_coupling() -> f64 {
    1.0
}

/// Static description of a chain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainSpec {
    /// Number of chain qubits `N`, not counting the target.
    pub n_sites: usize,
    pub coupling_model: CouplingModel,
    #[serde(default = "default_coupling")]
    pub base_coupling: f64,
    #[serde(default)]
    pub disorder: Option<DisorderSpec>,
    /// Switchable field on the target, only read by field-mode switching.
    #[serde(default)]
    pub field_strength: Option<f64>,
}

impl ChainSpec {
    pub fn new(n_sites: usize, coupling_model: CouplingModel) -> Self {
        Self {
            n_sites,
            coupling_model,
            base_coupling: 1.0,
            disorder: None,
            field_strength: None,
        }
    }

    pub fn xy(n_sites: usize) -> Self {
        Self::new(n_sites, CouplingModel::Xy)
    }

    pub fn heisenberg(n_sites: usize) -> Self {
        Self::new(n_sites, CouplingModel::Heisenberg)
    }

    pub fn engineered(n_sites: usize) -> Self {
        Self::new(n_sites, CouplingModel::Engineered)
    }

    pub fn with_coupling(mut self, j: f64) -> Self {
        self.base_coupling = j;
        self
    }

    pub fn with_disorder(mut self, disorder: DisorderSpec) -> Self {
        self.disorder = Some(disorder);
        self
    }

    pub fn with_field(mut self, b: f64) -> Self {
        self.field_strength = Some(b);
        self
    }

    /// Dimension of the sector, `N + 2`.
    pub fn dimension(&self) -> usize {
        self.n_sites + 2
    }

    pub fn validate(&self) -> Result<()> {
        let min_sites = match self.coupling_model {
            CouplingModel::Engineered => 2,
            _ => 1,
        };
        if self.n_sites < min_sites {
            return Err(Error::input(format!(
                "{} chain needs at least {min_sites} site(s), got {}",
                self.coupling_model, self.n_sites
            )));
        }
        if !(self.base_coupling > 0.0 && self.base_coupling.is_finite()) {
            return Err(Error::input(format!(
                "base coupling must be positive, got {}",
                self.base_coupling
            )));
        }
        if let Some(b) = self.field_strength {
            if !(b >= 0.0 && b.is_finite()) {
                return Err(Error::input(format!(
                    "field strength must be non-negative, got {b}"
                )));
            }
        }
        if let Some(d) = &self.disorder {
            d.validate()?;
        }
        Ok(())
    }

    /// Clean chain bond strengths `J_n` for bonds `(n, n+1)`, `n = 1..N`.
    fn clean_bonds(&self) -> Vec<f64> {
        let n = self.n_sites;
        let j = self.base_coupling;
        (1..n)
            .map(|k| match self.coupling_model {
                CouplingModel::Engineered => j * ((k * (n - k)) as f64).sqrt(),
                _ => j,
            })
            .collect()
    }
}

/// Hermitian operator on the `(N+2)`-dimensional sector.
#[derive(Debug, Clone, PartialEq)]
pub struct SectorHamiltonian {
    spec: ChainSpec,
    matrix: DMatrix<Complex64>,
    couples_target: bool,
}

impl SectorHamiltonian {
    /// Wraps an explicit matrix after checking the sector invariants.
    pub fn from_matrix(
        spec: ChainSpec,
        matrix: DMatrix<Complex64>,
        couples_target: bool,
    ) -> Result<Self> {
        let dim = spec.dimension();
        if matrix.nrows() != dim || matrix.ncols() != dim {
            return Err(Error::input(format!(
                "matrix is {}x{}, sector dimension is {dim}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        let h = Self {
            spec,
            matrix,
            couples_target,
        };
        h.check_hermitian(1e-12)?;
        for i in 0..dim {
            if h.matrix[(0, i)] != ZERO || h.matrix[(i, 0)] != ZERO {
                return Err(Error::input("row/column of |0⟩ must vanish"));
            }
            if !couples_target && (h.matrix[(dim - 1, i)] != ZERO || h.matrix[(i, dim - 1)] != ZERO)
            {
                return Err(Error::input(
                    "target row/column must vanish for an uncoupled target",
                ));
            }
        }
        Ok(h)
    }

    pub fn spec(&self) -> &ChainSpec {
        &self.spec
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.matrix
    }

    pub fn couples_target(&self) -> bool {
        self.couples_target
    }

    pub fn n_sites(&self) -> usize {
        self.spec.n_sites
    }

    pub fn dimension(&self) -> usize {
        self.matrix.nrows()
    }

    /// `⟨row|H|col⟩`.
    pub fn element(&self, row: usize, col: usize) -> Complex64 {
        self.matrix[(row, col)]
    }

    /// Sites carrying dynamics: `1..=N`, plus the target when it is coupled.
    pub fn coupled_sites(&self) -> std::ops::RangeInclusive<usize> {
        let last = if self.couples_target {
            self.spec.n_sites + 1
        } else {
            self.spec.n_sites
        };
        1..=last
    }

    pub fn max_hermiticity_error(&self) -> f64 {
        let m = &self.matrix;
        let mut worst: f64 = 0.0;
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
            }
        }
        worst
    }

    pub fn check_hermitian(&self, tol: f64) -> Result<()> {
        let err = self.max_hermiticity_error();
        if err > tol {
            return Err(Error::numerical(format!(
                "Hamiltonian not Hermitian: max |H - H†| = {err:e}"
            )));
        }
        Ok(())
    }

    /// Adds `c` to the diagonal of the coupled block. Transition
    /// probabilities are unchanged; only a global phase is introduced.
    pub fn with_uniform_shift(&self, c: f64) -> Self {
        let mut out = self.clone();
        for i in self.coupled_sites() {
            out.matrix[(i, i)] += Complex64::new(c, 0.0);
        }
        out
    }

    /// Stable in-process fingerprint of the matrix entries, used to tie a
    /// propagator to the Hamiltonian it was built from.
    pub fn fingerprint(&self) -> u64 {
        let mut hasher = DefaultHasher::new();
        self.matrix.nrows().hash(&mut hasher);
        self.couples_target.hash(&mut hasher);
        for z in self.matrix.iter() {
            z.re.to_bits().hash(&mut hasher);
            z.im.to_bits().hash(&mut hasher);
        }
        hasher.finish()
    }

    /// `H·v` for a sector vector.
    pub fn apply(&self, v: &DVector<Complex64>) -> DVector<Complex64> {
        &self.matrix * v
    }

    /// `⟨ψ|H|ψ⟩`.
    pub fn expectation(&self, state: &SectorState) -> f64 {
        let hv = self.apply(state.amplitudes());
        state.amplitudes().dotc(&hv).re
    }
}

/// Assembles a sector matrix from chain bond strengths.
///
/// `target_bond` adds the bond `(N, N+1)`. Heisenberg bonds contribute
/// hopping `2J_b` and `-2J_b` on both diagonal entries; XY-type bonds
/// contribute hopping `J_b` only.
fn assemble(
    spec: &ChainSpec,
    heisenberg: bool,
    bonds: &[f64],
    target_bond: Option<f64>,
) -> DMatrix<Complex64> {
    let n = spec.n_sites;
    let mut m = DMatrix::from_element(n + 2, n + 2, ZERO);
    let mut add_bond = |site: usize, strength: f64| {
        let (hop, diag) = if heisenberg {
            (2.0 * strength, -2.0 * strength)
        } else {
            (strength, 0.0)
        };
        m[(site + 1, site)] += hop;
        m[(site, site + 1)] += hop;
        if heisenberg {
            m[(site, site)] += diag;
            m[(site + 1, site + 1)] += diag;
        }
    };
    for (k, &b) in bonds.iter().enumerate() {
        add_bond(k + 1, b);
    }
    if let Some(b) = target_bond {
        add_bond(n, b);
    }
    m
}

fn build_model(
    spec: &ChainSpec,
    model: CouplingModel,
    couple_target: bool,
) -> Result<SectorHamiltonian> {
    if spec.coupling_model != model {
        return Err(Error::input(format!(
            "builder for {model} chains called with a {} spec",
            spec.coupling_model
        )));
    }
    spec.validate()?;
    let clean_spec = ChainSpec {
        disorder: None,
        ..spec.clone()
    };
    let target = couple_target.then_some(spec.base_coupling);
    let matrix = assemble(
        &clean_spec,
        model == CouplingModel::Heisenberg,
        &clean_spec.clean_bonds(),
        target,
    );
    let h = SectorHamiltonian {
        spec: clean_spec,
        matrix,
        couples_target: couple_target,
    };
    match spec.disorder {
        Some(d) => apply_disorder(&h, d),
        None => Ok(h),
    }
}

/// Uniform XY chain; `couple_target` adds the `(N, N+1)` bond of strength `J`.
pub fn build_xy(spec: &ChainSpec, couple_target: bool) -> Result<SectorHamiltonian> {
    build_model(spec, CouplingModel::Xy, couple_target)
}

/// Heisenberg chain `J Σ σ⃗_n·σ⃗_{n+1}` minus the energy of `|0⟩`.
pub fn build_heisenberg(spec: &ChainSpec, couple_target: bool) -> Result<SectorHamiltonian> {
    build_model(spec, CouplingModel::Heisenberg, couple_target)
}

/// XY chain with hoppings `J √(n (N − n))`, which transfers `|1⟩` to `|N⟩`
/// perfectly at `t = π / (2J)`.
pub fn build_engineered(spec: &ChainSpec, couple_target: bool) -> Result<SectorHamiltonian> {
    build_model(spec, CouplingModel::Engineered, couple_target)
}

/// Dispatches on `spec.coupling_model`.
pub fn build(spec: &ChainSpec, couple_target: bool) -> Result<SectorHamiltonian> {
    build_model(spec, spec.coupling_model, couple_target)
}

/// Scales every chain bond `(n, n+1)`, `n < N`, by `1 + δ_n` with
/// `δ_n ~ U[-σ, σ]` drawn in bond order from a ChaCha8 stream seeded with
/// `d.seed`. The target bond, if any, is left clean. For Heisenberg chains the
/// bond's diagonal contribution is scaled together with its hopping.
pub fn apply_disorder(h: &SectorHamiltonian, d: DisorderSpec) -> Result<SectorHamiltonian> {
    d.validate()?;
    if h.spec.disorder.is_some() {
        return Err(Error::input("Hamiltonian already carries disorder"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(d.seed);
    let sigma = d.relative_amplitude;
    let heisenberg = h.spec.coupling_model == CouplingModel::Heisenberg;
    let mut out = h.clone();
    for site in 1..h.spec.n_sites {
        let delta: f64 = rng.random_range(-sigma..=sigma);
        let hop = h.matrix[(site + 1, site)];
        let scaled = hop * (1.0 + delta);
        out.matrix[(site + 1, site)] = scaled;
        out.matrix[(site, site + 1)] = scaled.conj();
        if heisenberg {
            // hopping is 2J_b, diagonal contribution -2J_b
            let shift = hop.re * delta;
            out.matrix[(site, site)] -= shift;
            out.matrix[(site + 1, site + 1)] -= shift;
        }
    }
    out.spec.disorder = Some(d);
    Ok(out)
}

/// Normalized state vector in the sector basis `|0⟩, |1⟩, …, |N+1⟩`.
#[derive(Debug, Clone, PartialEq)]
pub struct SectorState {
    amplitudes: DVector<Complex64>,
}

impl SectorState {
    pub const NORM_TOLERANCE: f64 = 1e-10;

    pub fn from_amplitudes(amplitudes: DVector<Complex64>) -> Result<Self> {
        if amplitudes.len() < 3 {
            return Err(Error::input("sector vectors need at least 3 components"));
        }
        let norm = amplitudes.norm();
        if (norm - 1.0).abs() > Self::NORM_TOLERANCE {
            return Err(Error::numerical(format!(
                "state norm {norm} differs from 1"
            )));
        }
        Ok(Self { amplitudes })
    }

    pub(crate) fn from_raw(amplitudes: DVector<Complex64>) -> Self {
        Self { amplitudes }
    }

    /// Basis state `|index⟩` of a chain with `n_sites` sites.
    pub fn basis(n_sites: usize, index: usize) -> Self {
        assert!(index < n_sites + 2, "basis index {index} out of range");
        let mut v = DVector::from_element(n_sites + 2, ZERO);
        v[index] = Complex64::new(1.0, 0.0);
        Self { amplitudes: v }
    }

    /// `α|0⟩ + β|1⟩`: the logical qubit loaded onto the first chain site.
    pub fn qubit(n_sites: usize, alpha: Complex64, beta: Complex64) -> Result<Self> {
        let norm2 = alpha.norm_sqr() + beta.norm_sqr();
        if (norm2 - 1.0).abs() > 1e-12 {
            return Err(Error::input(format!(
                "qubit amplitudes must satisfy |α|²+|β|²=1, got {norm2}"
            )));
        }
        let mut v = DVector::from_element(n_sites + 2, ZERO);
        v[0] = alpha;
        v[1] = beta;
        Ok(Self { amplitudes: v })
    }

    pub fn amplitudes(&self) -> &DVector<Complex64> {
        &self.amplitudes
    }

    pub fn into_amplitudes(self) -> DVector<Complex64> {
        self.amplitudes
    }

    pub fn dimension(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn n_sites(&self) -> usize {
        self.amplitudes.len() - 2
    }

    pub fn amplitude(&self, index: usize) -> Complex64 {
        self.amplitudes[index]
    }

    pub fn probability(&self, index: usize) -> f64 {
        self.amplitudes[index].norm_sqr()
    }

    /// Amplitude on the last chain site `|N⟩`.
    pub fn end_amplitude(&self) -> Complex64 {
        self.amplitudes[self.n_sites()]
    }

    /// Amplitude on the target `|N+1⟩`.
    pub fn target_amplitude(&self) -> Complex64 {
        self.amplitudes[self.n_sites() + 1]
    }

    pub fn norm(&self) -> f64 {
        self.amplitudes.norm()
    }

    /// `⟨self|other⟩`.
    pub fn overlap(&self, other: &SectorState) -> Complex64 {
        self.amplitudes.dotc(&other.amplitudes)
    }

    /// `|⟨self|other⟩|²`.
    pub fn fidelity(&self, other: &SectorState) -> f64 {
        self.overlap(other).norm_sqr()
    }

    /// Largest componentwise distance to `other`.
    pub fn max_distance(&self, other: &SectorState) -> f64 {
        self.amplitudes
            .iter()
            .zip(other.amplitudes.iter())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }
}
