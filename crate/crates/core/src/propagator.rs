//! Exact time evolution `U(t) = exp(-iHt)` in the sector.
//!
//! Only the coupled block of `H` is diagonalized. Sites outside it (`|0⟩`,
//! and the target when it is frozen) are exact zero-energy eigenvectors, so
//! they are carried through any evolution without rounding.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::sector::{SectorHamiltonian, SectorState};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Eigendecomposition `H = V diag(λ) V†` of a sector Hamiltonian.
#[derive(Debug, Clone)]
pub struct SpectralPropagator {
    eigenvalues: Vec<f64>,
    vectors: DMatrix<Complex64>,
    source: u64,
}

impl SpectralPropagator {
    pub const HERMITICITY_TOLERANCE: f64 = 1e-10;

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// Orthonormal eigenvectors, one per column, in eigenvalue order.
    pub fn eigenvectors(&self) -> &DMatrix<Complex64> {
        &self.vectors
    }

    pub fn dimension(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn n_sites(&self) -> usize {
        self.dimension() - 2
    }

    /// Fingerprint of the Hamiltonian this propagator diagonalizes.
    pub fn source(&self) -> u64 {
        self.source
    }

    pub fn diagonalizes(&self, h: &SectorHamiltonian) -> bool {
        h.fingerprint() == self.source && h.dimension() == self.dimension()
    }

    /// Largest entry of `V diag(λ) V† - H`.
    pub fn reconstruction_error(&self, h: &SectorHamiltonian) -> f64 {
        let lambda = DMatrix::from_diagonal(&DVector::from_iterator(
            self.dimension(),
            self.eigenvalues.iter().map(|&l| Complex64::new(l, 0.0)),
        ));
        let rebuilt = &self.vectors * lambda * self.vectors.adjoint();
        (rebuilt - h.matrix())
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max)
    }

    /// Largest entry of `V†V - I`.
    pub fn orthonormality_error(&self) -> f64 {
        let gram = self.vectors.adjoint() * &self.vectors;
        let id = DMatrix::<Complex64>::identity(self.dimension(), self.dimension());
        (gram - id).iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    fn phases(&self, t: f64) -> impl Iterator<Item = Complex64> + '_ {
        self.eigenvalues
            .iter()
            .map(move |&l| Complex64::from_polar(1.0, -l * t))
    }

    /// `U(t)|ψ⟩`. Negative times run the evolution backwards.
    pub fn evolve(&self, state: &SectorState, t: f64) -> Result<SectorState> {
        if state.dimension() != self.dimension() {
            return Err(Error::input(format!(
                "state has dimension {}, propagator {}",
                state.dimension(),
                self.dimension()
            )));
        }
        Ok(SectorState::from_raw(
            self.evolve_vector(state.amplitudes(), t),
        ))
    }

    pub(crate) fn evolve_vector(&self, v: &DVector<Complex64>, t: f64) -> DVector<Complex64> {
        let mut coeffs = self.vectors.ad_mul(v);
        for (c, phase) in coeffs.iter_mut().zip(self.phases(t)) {
            *c *= phase;
        }
        &self.vectors * coeffs
    }

    /// The full matrix `U(t)`.
    pub fn unitary(&self, t: f64) -> DMatrix<Complex64> {
        let mut scaled = self.vectors.clone();
        for (mut col, phase) in scaled.column_iter_mut().zip(self.phases(t)) {
            col *= phase;
        }
        scaled * self.vectors.adjoint()
    }

    /// `⟨N|U(t)|1⟩`.
    pub fn transfer_amplitude(&self, t: f64) -> Complex64 {
        let n = self.n_sites();
        self.vectors
            .row(n)
            .iter()
            .zip(self.vectors.row(1).iter())
            .zip(self.phases(t))
            .map(|((a, b), p)| a * b.conj() * p)
            .sum()
    }

    /// `t ↦ ⟨site|U(t)|ψ⟩` as a sum of exponentials, cheap to evaluate many times.
    pub fn amplitude_series(&self, state: &SectorState, site: usize) -> AmplitudeSeries {
        let coeffs = self.vectors.ad_mul(state.amplitudes());
        let weights = self
            .vectors
            .row(site)
            .iter()
            .zip(coeffs.iter())
            .map(|(v, c)| v * c)
            .collect();
        AmplitudeSeries {
            eigenvalues: self.eigenvalues.clone(),
            weights,
        }
    }
}

/// `a(t) = Σ_k w_k exp(-iλ_k t)`.
#[derive(Debug, Clone)]
pub struct AmplitudeSeries {
    eigenvalues: Vec<f64>,
    weights: Vec<Complex64>,
}

impl AmplitudeSeries {
    pub fn amplitude(&self, t: f64) -> Complex64 {
        self.eigenvalues
            .iter()
            .zip(&self.weights)
            .map(|(&l, w)| w * Complex64::from_polar(1.0, -l * t))
            .sum()
    }

    pub fn probability(&self, t: f64) -> f64 {
        self.amplitude(t).norm_sqr()
    }
}

/// Eigendecomposition of `h` with eigenvalues in ascending order (ties keep
/// basis order) and each eigenvector's largest-magnitude component made real
/// and positive.
pub fn diagonalize(h: &SectorHamiltonian) -> Result<SpectralPropagator> {
    h.check_hermitian(SpectralPropagator::HERMITICITY_TOLERANCE)?;
    let dim = h.dimension();
    let block: Vec<usize> = h.coupled_sites().collect();
    let m = block.len();

    let sub = DMatrix::from_fn(m, m, |r, c| {
        // symmetrize so the solver sees an exactly Hermitian block
        let a = h.element(block[r], block[c]);
        let b = h.element(block[c], block[r]).conj();
        (a + b) * 0.5
    });
    let eig = SymmetricEigen::new(sub);

    let mut columns: Vec<(f64, DVector<Complex64>)> = Vec::with_capacity(dim);
    let unit = |i: usize| {
        let mut v = DVector::from_element(dim, ZERO);
        v[i] = Complex64::new(1.0, 0.0);
        v
    };
    columns.push((0.0, unit(0)));
    for k in 0..m {
        let mut v = DVector::from_element(dim, ZERO);
        for (r, &site) in block.iter().enumerate() {
            v[site] = eig.eigenvectors[(r, k)];
        }
        columns.push((eig.eigenvalues[k], v));
    }
    if !h.couples_target() {
        columns.push((0.0, unit(dim - 1)));
    }
    columns.sort_by(|a, b| a.0.total_cmp(&b.0));

    let mut vectors = DMatrix::from_element(dim, dim, ZERO);
    let mut eigenvalues = Vec::with_capacity(dim);
    for (k, (lambda, mut v)) in columns.into_iter().enumerate() {
        fix_phase(&mut v);
        vectors.set_column(k, &v);
        eigenvalues.push(lambda);
    }
    if eigenvalues.iter().any(|l| !l.is_finite()) {
        return Err(Error::numerical(
            "eigenvalue solver returned non-finite values",
        ));
    }
    Ok(SpectralPropagator {
        eigenvalues,
        vectors,
        source: h.fingerprint(),
    })
}

fn fix_phase(v: &mut DVector<Complex64>) {
    let max = v.iter().map(|z| z.norm()).fold(0.0, f64::max);
    if max == 0.0 {
        return;
    }
    let pivot = v
        .iter()
        .position(|z| z.norm() >= max * (1.0 - 1e-12))
        .expect("max is attained");
    let z = v[pivot];
    let rot = z.conj() / z.norm();
    *v *= rot;
    v[pivot] = Complex64::new(v[pivot].norm(), 0.0);
}
