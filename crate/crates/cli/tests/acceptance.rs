//! One test per acceptance criterion. Each prints a single `[PASS]`/`[FAIL]`
//! line; run with `--nocapture` to see them.

use embedlab::suites::{run_suite, DEFAULT_SEED};

fn criterion(id: usize) {
    let outcome = run_suite(id, DEFAULT_SEED).expect("suite runs");
    println!("{}", outcome.line());
    assert!(outcome.passed, "{}", outcome.line());
}

#[test]
fn criterion_01_basis_identity() {
    criterion(1);
}

#[test]
fn criterion_02_singular_values_gaussian() {
    criterion(2);
}

#[test]
fn criterion_03_singular_values_logconcave() {
    criterion(3);
}

#[test]
fn criterion_04_decoupling_identity() {
    criterion(4);
}

#[test]
fn criterion_05_bilinearity_telescope() {
    criterion(5);
}

#[test]
fn criterion_06_rearrangement() {
    criterion(6);
}

#[test]
fn criterion_07_overlap_exactness() {
    criterion(7);
}

#[test]
fn criterion_08_assumption_fit_scaling() {
    criterion(8);
}

#[test]
fn criterion_09_gaussian_benchmark() {
    criterion(9);
}

#[test]
fn criterion_10_chain_decomposition() {
    criterion(10);
}

#[test]
fn criterion_11_self_bounding() {
    criterion(11);
}

#[test]
fn criterion_12_determinism() {
    criterion(12);
}
