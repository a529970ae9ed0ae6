//! End-to-end acceptance checks, one test per verified property.
//!
//! Each test runs the same check function the CLI verification suites use,
//! prints one line per record, and fails if any record fails. The default
//! workbench (16 modes, 4096 steps, seed 42) is built once and shared.

use roughmild::studies::{
    check_change_of_variable, check_chasles_linearity, check_chen_relation,
    check_commuting_solve, check_derivative_uniqueness, check_fixed_point,
    check_integral_representation, check_lift_shift, check_mollified_driver,
    check_semigroup_constants, check_sewing_limit_oracle, check_smooth_path_integral,
    check_smoothing_profile, check_young_rough_agreement, StudyOutput, Workbench,
};
use std::sync::OnceLock;

fn workbench() -> &'static Workbench {
    static WB: OnceLock<Workbench> = OnceLock::new();
    WB.get_or_init(|| Workbench::standard().expect("default workbench"))
}

fn assert_all_pass(out: StudyOutput) {
    let mut ok = true;
    for rec in &out.records {
        println!("{rec}");
        ok = ok && rec.pass;
    }
    assert!(ok, "at least one acceptance record failed");
}

#[test]
fn chen_relation_on_random_triples() {
    assert_all_pass(check_chen_relation(workbench()).unwrap());
}

#[test]
fn sewing_limit_recovers_coboundary_germ() {
    assert_all_pass(check_sewing_limit_oracle(workbench()).unwrap());
}

#[test]
fn convolution_integral_matches_smooth_quadrature() {
    assert_all_pass(check_smooth_path_integral(workbench()).unwrap());
}

#[test]
fn chasles_split_and_linearity_are_exact() {
    assert_all_pass(check_chasles_linearity(workbench()).unwrap());
}

#[test]
fn commuting_solve_matches_analytic_exponential() {
    assert_all_pass(check_commuting_solve(workbench()).unwrap());
}

#[test]
fn area_shift_moves_the_drift_as_predicted() {
    assert_all_pass(check_lift_shift(workbench()).unwrap());
}

#[test]
fn first_order_and_compensated_sums_agree_above_threshold() {
    assert_all_pass(check_young_rough_agreement(workbench()).unwrap());
}

#[test]
fn fixed_point_iteration_contracts() {
    assert_all_pass(check_fixed_point(workbench()).unwrap());
}

#[test]
fn weighted_profile_stays_bounded_near_zero() {
    assert_all_pass(check_smoothing_profile(workbench()).unwrap());
}

#[test]
fn integral_representation_residual_refines() {
    assert_all_pass(check_integral_representation(workbench()).unwrap());
}

#[test]
fn change_of_variable_residuals_behave() {
    assert_all_pass(check_change_of_variable(workbench()).unwrap());
}

#[test]
fn mollified_drivers_converge_to_the_rough_solution() {
    assert_all_pass(check_mollified_driver(workbench()).unwrap());
}

#[test]
fn wrong_derivative_datum_is_detected() {
    assert_all_pass(check_derivative_uniqueness(workbench()).unwrap());
}

#[test]
fn semigroup_scale_constants_are_stable() {
    assert_all_pass(check_semigroup_constants(workbench()).unwrap());
}
