//! Acceptance criteria 1-8. Each test prints one `AC<k> PASS|FAIL` line.
//! Run with `cargo test -p pointhom-cli --test acceptance -- --nocapture
//! --test-threads 1` for an uninterleaved report.

use pointhom_cli::suite;

fn criterion(id: u8) {
    let out = suite::run(id).unwrap_or_else(|e| panic!("AC{id} FAIL: {e:#}"));
    println!("{}", out.line());
    assert!(out.passed, "{}", out.line());
}

#[test]
fn ac1_one_center_closed_form() {
    criterion(1);
}

#[test]
fn ac2_ground_state_homogenization() {
    criterion(2);
}

#[test]
fn ac3_equi_coerciveness() {
    criterion(3);
}

#[test]
fn ac4_riesz_and_pair_sums() {
    criterion(4);
}

#[test]
fn ac5_gamma_limsup() {
    criterion(5);
}

#[test]
fn ac6_resolvent_contracts() {
    criterion(6);
}

#[test]
fn ac7_kernel_certification() {
    criterion(7);
}

#[test]
fn ac8_thread_count_does_not_change_tables() {
    criterion(8);
}
