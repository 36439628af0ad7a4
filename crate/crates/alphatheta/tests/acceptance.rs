//! End-to-end acceptance run: every criterion of the verification suite at
//! its full budget, one test per criterion, printing one pass/fail line
//! each (visible with `--nocapture`).

use alphatheta::runner::default_workers;
use alphatheta::verify::{run_suite, Suite, SuiteReport, DEFAULT_SEED};
use std::sync::OnceLock;

fn full_suite() -> &'static SuiteReport {
    static REPORT: OnceLock<SuiteReport> = OnceLock::new();
    REPORT.get_or_init(|| run_suite(Suite::Full, DEFAULT_SEED, default_workers()))
}

fn check(id: u32) {
    let report = full_suite();
    let criterion = report
        .criteria
        .iter()
        .find(|c| c.id == id)
        .expect("criterion present");
    println!("{}", report.lines()[(id - 1) as usize]);
    assert!(
        criterion.pass,
        "criterion {:02} {} failed: {}",
        criterion.id, criterion.name, criterion.detail
    );
}

#[test]
fn criterion_01_decrement_matrix_exact() {
    check(1);
}

#[test]
fn criterion_02_symmetrized_splitting_match() {
    check(2);
}

#[test]
fn criterion_03_sampling_defect_closed_form() {
    check(3);
}

#[test]
fn criterion_04_exact_tree_laws() {
    check(4);
}

#[test]
fn criterion_05_sampler_vs_exact_law() {
    check(5);
}

#[test]
fn criterion_06_local_time_first_moment() {
    check(6);
}

#[test]
fn criterion_07_interval_partition_agree() {
    check(7);
}

#[test]
fn criterion_08_customer1_location() {
    check(8);
}

#[test]
fn criterion_09_numeric_closed_forms() {
    check(9);
}

#[test]
fn criterion_10_two_leaf_length_moment() {
    check(10);
}

#[test]
fn criterion_11_bead_chain_shape_and_mass() {
    check(11);
}

#[test]
fn criterion_12_worker_count_determinism() {
    check(12);
}
