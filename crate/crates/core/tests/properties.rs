//! Invariants checked over randomised inputs with a fixed seed.

mod common;

use common::{run_suite, SUITES};

const BUDGET: u32 = 256;

fn check(name: &str) {
    let s = SUITES.iter().find(|s| s.name == name).expect("suite exists");
    if let Err(e) = run_suite(s, BUDGET) {
        panic!("{name}: {e}");
    }
}

#[test]
fn hamiltonians_of_abstract_networks_are_hermitian() {
    check("hermiticity of abstract networks");
}

#[test]
fn full_model_hamiltonian_is_hermitian() {
    check("hermiticity of the full model");
}

#[test]
fn pulsed_chains_conserve_the_norm() {
    check("norm conservation");
}

#[test]
fn triangle_populations_are_gauge_invariant() {
    check("gauge invariance");
}

#[test]
fn three_j_symbols_are_orthogonal() {
    check("wigner orthogonality");
}

#[test]
fn forbidden_dipole_transitions_vanish() {
    check("dipole selection rules");
}

#[test]
fn full_model_truncates_to_the_four_state_model() {
    check("truncation consistency");
}
