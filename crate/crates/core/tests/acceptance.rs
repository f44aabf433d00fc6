//! Acceptance suite: one test per criterion, each printing a PASS/FAIL line
//! followed by the measured values.

use crossing_core::acceptance::{run_criterion, CriterionReport};

fn verify(id: u8) {
    let report: CriterionReport = run_criterion(id).expect("criterion ran to completion");
    println!("{report}");
    for line in &report.details {
        println!("    {line}");
    }
    assert!(report.passed, "{report}\n{}", report.details.join("\n"));
}

#[test]
fn criterion_1_independent_case_exactness() {
    verify(1);
}

#[test]
fn criterion_2_weak_regime_joint_gumbel() {
    verify(2);
}

#[test]
fn criterion_3_strong_regime_mixture_limits() {
    verify(3);
}

#[test]
fn criterion_4_mixture_quadrature_matches_monte_carlo() {
    verify(4);
}

#[test]
fn criterion_5_fully_mixed_regime() {
    verify(5);
}

#[test]
fn criterion_6_comparison_bound() {
    verify(6);
}

#[test]
fn criterion_7_maxima_sanity() {
    verify(7);
}

#[test]
fn criterion_8_determinism_and_truncation() {
    verify(8);
}
