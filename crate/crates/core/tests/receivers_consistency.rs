//! Consistency checks between the closed-form receiver theory and the
//! operator / quadrature pipelines, on grids and on seeded random
//! parameter sets.

mod common;

use std::f64::consts::PI;

use dpc_core::fock::plus_minus_states;
use dpc_core::quad;
use dpc_core::receivers::{
    closest_to_vacuum_beta, gaussian_decision_rule, gaussian_error, gaussian_povm_element,
    kennedy_error, kennedy_povm, DecisionRule, GaussianParams, KennedyParams,
};
use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

const SQRT_2: f64 = std::f64::consts::SQRT_2;

fn random_params(rng: &mut ChaCha12Rng) -> GaussianParams {
    let alpha = C64::new(rng.random_range(-0.5..0.5), rng.random_range(-0.5..0.5));
    let phi = rng.random_range(-PI..PI);
    let theta = rng.random_range(-PI..PI);
    let r = rng.random_range(0.0..1.0);
    GaussianParams::new(alpha, phi, r, theta).unwrap()
}

/// Probability densities of observing outcome `x` given `|+>` / `|->`.
fn conditional_densities(params: &GaussianParams, x: f64) -> (f64, f64) {
    let m = gaussian_povm_element(params, x).unwrap().matrix;
    let m00 = m.entry(0, 0).re;
    let m01 = m.entry(0, 1).re;
    let m11 = m.entry(1, 1).re;
    (0.5 * (m00 + 2.0 * m01 + m11), 0.5 * (m00 - 2.0 * m01 + m11))
}

#[test]
fn closed_form_error_matches_operator_expectation_on_grid() {
    let dim = 15;
    let (plus, minus) = plus_minus_states(dim).unwrap();
    for k in 0..30 {
        let beta = -1.5 + 1.5 * k as f64 / 29.0;
        let params = KennedyParams::real(beta).unwrap();
        let povm = kennedy_povm(&params, dim).unwrap();
        let p_plus_given_minus = povm.element(0).expectation(&minus).unwrap().re;
        let p_minus_given_plus = povm.element(1).expectation(&plus).unwrap().re;
        let operator_error = 0.5 * (p_plus_given_minus + p_minus_given_plus);
        let closed = kennedy_error(&params);
        assert!(
            (operator_error - closed).abs() < 1e-6,
            "beta {beta}: operator {operator_error} vs closed form {closed}"
        );
    }
}

#[test]
fn closest_to_vacuum_displacement_is_golden_ratio_root() {
    // the overlap |<0|D(beta)|+>|^2 is stationary where beta^2 - beta - 1 = 0
    let oracle = (1.0 - 5.0f64.sqrt()) / 2.0;
    let found = closest_to_vacuum_beta().unwrap();
    assert!(
        (found - oracle).abs() < 1e-9,
        "found {found}, polynomial root {oracle}, difference {:.3e}",
        (found - oracle).abs()
    );
}

#[test]
fn quadrature_completeness_on_random_parameter_sets() {
    let mut rng = ChaCha12Rng::seed_from_u64(2024);
    for set in 0..10 {
        let params = random_params(&mut rng);
        let x_bar = SQRT_2 * params.alpha().re;
        for (i, j) in [(0, 0), (0, 1), (1, 1)] {
            let entry = |x: f64| gaussian_povm_element(&params, x).unwrap().matrix.entry(i, j);
            let re = quad::integrate(|x| entry(x).re, x_bar - 15.0, x_bar + 15.0, 1e-8);
            let im = quad::integrate(|x| entry(x).im, x_bar - 15.0, x_bar + 15.0, 1e-8);
            let expected = if i == j { 1.0 } else { 0.0 };
            assert!(
                (re - expected).abs() < 1e-6 && im.abs() < 1e-6,
                "set {set} entry ({i},{j}): integral {re} + {im}i"
            );
        }
    }
}

#[test]
fn closed_form_error_matches_half_line_integral_on_random_sets() {
    let mut rng = ChaCha12Rng::seed_from_u64(31);
    for set in 0..10 {
        let params = random_params(&mut rng);
        let x_bar = SQRT_2 * params.alpha().re;
        let (lo, hi) = (x_bar - 15.0, x_bar + 15.0);
        let plus_on_upper = gaussian_decision_rule(&params) == DecisionRule::PlusOnNonNegative;
        // error = P(guess + | -)/2 + P(guess - | +)/2, split at x_tilde = 0
        let density_plus = |x: f64| conditional_densities(&params, x).0;
        let density_minus = |x: f64| conditional_densities(&params, x).1;
        let integral = if plus_on_upper {
            0.5 * quad::integrate(density_minus, x_bar, hi, 1e-8)
                + 0.5 * quad::integrate(density_plus, lo, x_bar, 1e-8)
        } else {
            0.5 * quad::integrate(density_minus, lo, x_bar, 1e-8)
                + 0.5 * quad::integrate(density_plus, x_bar, hi, 1e-8)
        };
        let closed = gaussian_error(&params);
        assert!(
            (integral - closed).abs() < 2e-4,
            "set {set}: integral {integral} vs closed form {closed}"
        );
    }
}

#[test]
fn matrix_entries_follow_epsilon_structure() {
    let mut rng = ChaCha12Rng::seed_from_u64(57);
    for set in 0..20 {
        let params = random_params(&mut rng);
        for x in [-2.3, -0.4, 0.15, 1.9] {
            let el = gaussian_povm_element(&params, x).unwrap();
            let m = &el.matrix;
            let off_dev = (m.entry(0, 1) - el.epsilon * el.x_tilde * m.entry(0, 0)).norm();
            let diag_dev =
                (m.entry(1, 1).re - el.epsilon.norm_sqr() * el.x_tilde * el.x_tilde * m.entry(0, 0).re)
                    .abs();
            assert!(off_dev < 1e-8, "set {set} x {x}: off-diagonal deviation {off_dev:.3e}");
            assert!(diag_dev < 1e-8, "set {set} x {x}: diagonal deviation {diag_dev:.3e}");
        }
    }
}

#[test]
fn derived_normalization_matches_matrix_and_integrates_to_one() {
    // two closed forms of the (0,0) entry are in circulation; the one the
    // matrix follows is N = sech(r)/(sqrt(pi)|1-xi|) exp(-sech^2(r)
    // x_tilde^2/|1-xi|^2). The variant with |1-xi|^2 in the prefactor and
    // an extra sqrt(pi) inside the exponent fails completeness, so the
    // assertions below pin down the correct one. Both coincide at r = 0.
    let params = GaussianParams::new(C64::new(0.2, -0.1), 0.3, 0.4, -0.7).unwrap();
    let sech = 1.0 / params.r().cosh();
    let one_minus_xi_sq =
        (C64::new(1.0, 0.0) - C64::from_polar(params.r().tanh(), 2.0 * params.phi())).norm_sqr();

    let derived = |x_tilde: f64| {
        sech / (PI.sqrt() * one_minus_xi_sq.sqrt())
            * (-sech * sech * x_tilde * x_tilde / one_minus_xi_sq).exp()
    };
    let variant = |x_tilde: f64| {
        sech / (PI.sqrt() * one_minus_xi_sq)
            * (-sech * sech * x_tilde * x_tilde / (PI.sqrt() * one_minus_xi_sq)).exp()
    };

    let x_bar = SQRT_2 * params.alpha().re;
    for x_tilde in [-1.3, 0.0, 0.6, 2.2] {
        let m00 = gaussian_povm_element(&params, x_bar + x_tilde).unwrap().matrix.entry(0, 0).re;
        assert!(
            (m00 - derived(x_tilde)).abs() < 1e-12,
            "x_tilde {x_tilde}: matrix {m00} vs derived {}",
            derived(x_tilde)
        );
    }

    let derived_mass = quad::integrate(derived, -15.0, 15.0, 1e-9);
    let variant_mass = quad::integrate(variant, -15.0, 15.0, 1e-9);
    println!("vacuum-row mass: derived form {derived_mass:.12}, variant form {variant_mass:.12}");
    assert!((derived_mass - 1.0).abs() < 1e-6);
    assert!(
        (variant_mass - 1.0).abs() > 0.01,
        "the variant normalization unexpectedly satisfies completeness"
    );
}
