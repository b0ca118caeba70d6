//! Independent reference implementations used by the integration tests: the
//! chain Hamiltonian on the full `2^(N+1)`-dimensional register, a Taylor
//! scaling-and-squaring matrix exponential, and the end-gate loop run in that
//! space with the gate embedded as a genuine two-qubit unitary.
#![allow(dead_code)]

use endgate::{Complex64, CouplingModel, SectorHamiltonian};
use nalgebra::{DMatrix, DVector};

pub const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Register index of the basis state with a single excitation on qubit `site`
/// (1-based); qubit `n` is bit `n - 1`.
pub fn excitation(site: usize) -> usize {
    1 << (site - 1)
}

/// Bond list `(i, j, J_ij)` of a chain, read from the nearest-neighbour
/// off-diagonals of a sector matrix (hopping `J` for XY-type, `2J` for
/// Heisenberg bonds).
pub fn bonds_of(h: &SectorHamiltonian) -> Vec<(usize, usize, f64)> {
    let heis = h.spec().coupling_model == CouplingModel::Heisenberg;
    let last = if h.couples_target() {
        h.n_sites()
    } else {
        h.n_sites() - 1
    };
    (1..=last)
        .map(|i| {
            let hop = h.element(i + 1, i).re;
            (i, i + 1, if heis { hop / 2.0 } else { hop })
        })
        .collect()
}

/// Clean bonds from the textbook definitions, independent of the crate.
pub fn textbook_bonds(
    n: usize,
    model: CouplingModel,
    j: f64,
    couple_target: bool,
) -> Vec<(usize, usize, f64)> {
    let mut out: Vec<(usize, usize, f64)> = (1..n)
        .map(|i| {
            let strength = match model {
                CouplingModel::Engineered => j * ((i * (n - i)) as f64).sqrt(),
                _ => j,
            };
            (i, i + 1, strength)
        })
        .collect();
    if couple_target {
        out.push((n, n + 1, j));
    }
    out
}

/// Full-register Hamiltonian on `qubits` qubits. XY bonds are
/// `J(σ⁺σ⁻ + σ⁻σ⁺)`; Heisenberg bonds are `J σ⃗·σ⃗` with the all-down energy
/// subtracted.
pub fn full_hamiltonian(
    qubits: usize,
    bonds: &[(usize, usize, f64)],
    heisenberg: bool,
) -> DMatrix<Complex64> {
    let dim = 1usize << qubits;
    let mut h = DMatrix::from_element(dim, dim, ZERO);
    for x in 0..dim {
        for &(i, j, jb) in bonds {
            let bi = (x >> (i - 1)) & 1;
            let bj = (x >> (j - 1)) & 1;
            if bi != bj {
                // flip-flop term, coefficient J for XY and 2J for σ⃗·σ⃗
                let y = x ^ excitation(i) ^ excitation(j);
                let amp = if heisenberg { 2.0 * jb } else { jb };
                h[(y, x)] += Complex64::new(amp, 0.0);
            }
            if heisenberg {
                let zz = if bi == bj { 1.0 } else { -1.0 };
                // σᶻσᶻ minus its all-down value
                h[(x, x)] += Complex64::new(jb * (zz - 1.0), 0.0);
            }
        }
    }
    h
}

/// `H` restricted to the vacuum plus single excitations, ordered
/// `|0⟩, |1⟩, …, |qubits⟩`.
pub fn restrict(full: &DMatrix<Complex64>, qubits: usize) -> DMatrix<Complex64> {
    let idx: Vec<usize> = std::iter::once(0)
        .chain((1..=qubits).map(excitation))
        .collect();
    DMatrix::from_fn(idx.len(), idx.len(), |r, c| full[(idx[r], idx[c])])
}

fn one_norm(m: &DMatrix<Complex64>) -> f64 {
    m.column_iter()
        .map(|c| c.iter().map(|z| z.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// `exp(A)` by scaling to norm ≤ 1/2, a 30-term Taylor series and repeated
/// squaring.
pub fn expm(a: &DMatrix<Complex64>) -> DMatrix<Complex64> {
    let n = a.nrows();
    let norm = one_norm(a);
    let s = if norm > 0.5 {
        (norm / 0.5).log2().ceil() as i32
    } else {
        0
    };
    let scaled = a.map(|z| z / 2f64.powi(s));
    let mut term = DMatrix::<Complex64>::identity(n, n);
    let mut sum = term.clone();
    for k in 1..=30 {
        term = (&term * &scaled).map(|z| z / k as f64);
        sum += &term;
    }
    for _ in 0..s {
        sum = &sum * &sum;
    }
    sum
}

pub fn propagator(h: &DMatrix<Complex64>, t: f64) -> DMatrix<Complex64> {
    expm(&h.map(|z| Complex64::new(0.0, -t) * z))
}

/// Probability that the target qubit `target` (1-based) is excited.
pub fn target_population(psi: &DVector<Complex64>, target: usize) -> f64 {
    psi.iter()
        .enumerate()
        .filter(|(x, _)| x & excitation(target) != 0)
        .map(|(_, z)| z.norm_sqr())
        .sum()
}

/// Applies `W(c, d)` to qubits `(a, b)`: identity on `|00⟩`, `|11⟩`, and on
/// `{|10⟩, |01⟩}` (excitation on `a` resp. `b`) the matrix `[[d, -c], [c*, d*]]`.
pub fn apply_two_qubit(
    psi: &mut DVector<Complex64>,
    a: usize,
    b: usize,
    c: Complex64,
    d: Complex64,
) {
    let (ma, mb) = (excitation(a), excitation(b));
    for x in 0..psi.len() {
        if x & ma != 0 && x & mb == 0 {
            let y = x ^ ma ^ mb;
            let (on_a, on_b) = (psi[x], psi[y]);
            psi[x] = d * on_a - c * on_b;
            psi[y] = c.conj() * on_a + d.conj() * on_b;
        }
    }
}

/// End-gate run on the full register from `σ⁺_1|0⟩`, returning `p_k`.
pub fn full_space_run(h: &DMatrix<Complex64>, n: usize, intervals: &[f64]) -> Vec<f64> {
    let qubits = n + 1;
    let mut psi = DVector::from_element(1 << qubits, ZERO);
    psi[excitation(1)] = Complex64::new(1.0, 0.0);
    let mut out = Vec::new();
    for &dt in intervals {
        psi = propagator(h, dt) * psi;
        let a_n = psi[excitation(n)];
        let a_t = psi[excitation(n + 1)];
        let p = a_n.norm_sqr() + a_t.norm_sqr();
        if p > 1e-14 {
            let s = p.sqrt();
            apply_two_qubit(&mut psi, n, n + 1, a_n / s, a_t / s);
        }
        out.push(target_population(&psi, n + 1));
    }
    out
}

/// Max-abs entrywise difference.
pub fn max_diff(a: &DMatrix<Complex64>, b: &DMatrix<Complex64>) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}
