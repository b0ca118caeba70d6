mod common;

use common::*;
use endgate::protocol::run_protocol;
use endgate::sector::build;
use endgate::{ChainSpec, Complex64, CouplingModel, DisorderSpec};
use nalgebra::DMatrix;

fn models(n: usize) -> Vec<CouplingModel> {
    let mut m = vec![CouplingModel::Xy, CouplingModel::Heisenberg];
    if n >= 2 {
        m.push(CouplingModel::Engineered);
    }
    m
}

#[test]
fn sector_matches_full_register() {
    for n in 1..=6 {
        for model in models(n) {
            for couple in [false, true] {
                let spec = ChainSpec::new(n, model).with_coupling(0.7);
                let h = build(&spec, couple).unwrap();
                let bonds = textbook_bonds(n, model, 0.7, couple);
                let full = full_hamiltonian(n + 1, &bonds, model == CouplingModel::Heisenberg);
                let err = max_diff(&restrict(&full, n + 1), h.matrix());
                assert!(err <= 1e-12, "N={n} {model} couple={couple}: {err:e}");
            }
        }
    }
}

#[test]
fn disordered_sector_matches_full_register() {
    for n in 2..=6 {
        for model in [CouplingModel::Xy, CouplingModel::Heisenberg] {
            let spec =
                ChainSpec::new(n, model).with_disorder(DisorderSpec::new(0.2, n as u64).unwrap());
            let h = build(&spec, true).unwrap();
            let full = full_hamiltonian(n + 1, &bonds_of(&h), model == CouplingModel::Heisenberg);
            let err = max_diff(&restrict(&full, n + 1), h.matrix());
            assert!(err <= 1e-12, "N={n} {model}: {err:e}");
        }
    }
}

#[test]
fn full_register_conserves_excitations() {
    let bonds = textbook_bonds(4, CouplingModel::Heisenberg, 1.0, true);
    let h = full_hamiltonian(5, &bonds, true);
    for r in 0..h.nrows() {
        for c in 0..h.ncols() {
            if h[(r, c)] != Complex64::new(0.0, 0.0) {
                assert_eq!(r.count_ones(), c.count_ones());
            }
        }
    }
}

#[test]
fn taylor_exponential_is_unitary_and_composes() {
    let bonds = textbook_bonds(3, CouplingModel::Xy, 1.0, false);
    let h = full_hamiltonian(4, &bonds, false);
    let u = propagator(&h, 2.3);
    let eye = DMatrix::<Complex64>::identity(16, 16);
    assert!(max_diff(&(u.adjoint() * &u), &eye) < 1e-13);
    let split = propagator(&h, 1.0) * propagator(&h, 1.3);
    assert!(max_diff(&split, &u) < 1e-13);
}

#[test]
fn full_register_end_gate_run_matches_sector() {
    let intervals = [0.9, 2.1, 0.0, 1.4, 3.3, 0.6, 2.7];
    for n in 1..=4 {
        for model in models(n) {
            let spec = ChainSpec::new(n, model);
            let h = build(&spec, false).unwrap();
            let trace = run_protocol(&h, &intervals).unwrap();
            let bonds = textbook_bonds(n, model, 1.0, false);
            let full = full_hamiltonian(n + 1, &bonds, model == CouplingModel::Heisenberg);
            let reference = full_space_run(&full, n, &intervals);
            for (k, (a, b)) in trace.probabilities().iter().zip(&reference).enumerate() {
                assert!((a - b).abs() <= 1e-10, "N={n} {model} step {k}: {a} vs {b}");
            }
        }
    }
}
