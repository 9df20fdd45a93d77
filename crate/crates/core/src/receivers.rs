//! Closed-form theory of the two receivers compared throughout the crate:
//! the displaced photon counter (Kennedy receiver) and the general
//! Gaussian-unitary + homodyne benchmark.
//!
//! Quadrature conventions: `x = (a + a^dag)/sqrt(2)`,
//! `<x|0> = pi^{-1/4} e^{-x^2/2}`, `<x|1> = pi^{-1/4} sqrt(2) x e^{-x^2/2}`.
//! The Gaussian unitary is `U_G = D(alpha) R(phi) S(r) R(theta)` with
//! `R(phi) = e^{i phi n}` and `S(r) = exp[(r/2)(a^2 - a^dag^2)]`.

use std::f64::consts::{FRAC_1_SQRT_2, PI, SQRT_2};

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::fock::{displacement_matrix, plus_minus_states, FockOperator};
use crate::tomography::{BinaryPovm, PovmSet};

/// Displacement amplitude of the photon-counting receiver.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KennedyParams {
    beta: C64,
}

impl KennedyParams {
    pub fn new(beta: C64) -> Result<Self> {
        if !beta.re.is_finite() || !beta.im.is_finite() {
            return Err(Error::InvalidInput("displacement amplitude must be finite".into()));
        }
        Ok(Self { beta })
    }

    pub fn real(beta: f64) -> Result<Self> {
        Self::new(C64::new(beta, 0.0))
    }

    pub fn beta(&self) -> C64 {
        self.beta
    }
}

/// Parameters of the Gaussian unitary `D(alpha) R(phi) S(r) R(theta)`.
/// Angles are stored wrapped into `(-pi, pi]`; `r >= 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianParams {
    alpha: C64,
    phi: f64,
    r: f64,
    theta: f64,
}

fn wrap_angle(a: f64) -> f64 {
    let t = (a + PI).rem_euclid(2.0 * PI);
    if t == 0.0 { PI } else { t - PI }
}

impl GaussianParams {
    /// Squeezing beyond `r = 50` is rejected: `tanh r` is then 1 to
    /// machine precision and the receiver degenerates.
    pub fn new(alpha: C64, phi: f64, r: f64, theta: f64) -> Result<Self> {
        if !alpha.re.is_finite() || !alpha.im.is_finite() {
            return Err(Error::InvalidInput("displacement must be finite".into()));
        }
        if !phi.is_finite() || !theta.is_finite() {
            return Err(Error::InvalidInput("rotation angles must be finite".into()));
        }
        if !(0.0..=50.0).contains(&r) {
            return Err(Error::InvalidInput(format!(
                "squeezing parameter must lie in [0, 50], got {r}"
            )));
        }
        Ok(Self { alpha, phi: wrap_angle(phi), r, theta: wrap_angle(theta) })
    }

    /// No displacement, rotation, or squeezing.
    pub fn identity() -> Self {
        Self { alpha: C64::new(0.0, 0.0), phi: 0.0, r: 0.0, theta: 0.0 }
    }

    pub fn alpha(&self) -> C64 {
        self.alpha
    }

    pub fn phi(&self) -> f64 {
        self.phi
    }

    pub fn r(&self) -> f64 {
        self.r
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }
}

/// Qubit-block matrix of the homodyne POVM density at outcome `x`, after
/// the Gaussian unitary: entries `<i|U^dag|x><x|U|j>` for `i, j` in
/// `{0, 1}`, together with the closed-form structure constants.
#[derive(Debug, Clone)]
pub struct GaussianElement {
    /// Homodyne outcome.
    pub x: f64,
    /// `x - sqrt(2) Re[alpha]`: outcome relative to the displaced center.
    pub x_tilde: f64,
    /// Off-diagonal structure constant: the matrix is proportional to
    /// `[[1, eps x_tilde], [eps* x_tilde, |eps|^2 x_tilde^2]]`.
    pub epsilon: C64,
    /// `e^{2 i phi} tanh r`.
    pub xi: C64,
    /// Derived normalization: the `(0,0)` entry, `|<x|U|0>|^2`.
    pub norm_n: f64,
    /// The rank-1 PSD matrix itself (2 x 2).
    pub matrix: FockOperator,
}

/// The no-click projector conjugated by the displacement:
/// `D(beta)^dag |0><0| D(beta)` on `dim` Fock levels, with matrix
/// elements taken from the guard-dimension displacement so the block is
/// accurate (not merely unitary-truncated).
pub fn displaced_vacuum_projector(beta: C64, dim: usize) -> Result<FockOperator> {
    let dm = displacement_matrix(beta, dim)?;
    FockOperator::from_fn(dim, |i, j| dm.entry(0, i).conj() * dm.entry(0, j))
}

/// `{Pi_+ = D^dag |0><0| D, Pi_- = I - Pi_+}` on `dim >= 2` levels.
pub fn kennedy_povm(params: &KennedyParams, dim: usize) -> Result<BinaryPovm> {
    if dim < 2 {
        return Err(Error::InvalidInput(format!(
            "Kennedy POVM needs dimension >= 2, got {dim}"
        )));
    }
    let plus = displaced_vacuum_projector(params.beta(), dim)?;
    let minus = FockOperator::identity(dim).sub(&plus);
    PovmSet::binary(plus, minus)
}

/// Average error probability of the photon-counting receiver on the
/// equal-prior `|+->` pair: `1/2 + Re[beta] e^{-|beta|^2}`.
pub fn kennedy_error(params: &KennedyParams) -> f64 {
    let beta = params.beta();
    let p = 0.5 + beta.re * (-beta.norm_sqr()).exp();
    debug_assert!((0.0..=1.0).contains(&p));
    p
}

/// Real displacement minimizing the error: `d/d beta = 0` gives
/// `2 beta^2 = 1` with the negative root, so `beta = -1/sqrt(2)` and
/// error `1/2 - e^{-1/2}/sqrt(2)`.
pub fn optimal_kennedy_beta() -> (f64, f64) {
    let beta = -FRAC_1_SQRT_2;
    let params = KennedyParams::real(beta).expect("constant is finite");
    (beta, kennedy_error(&params))
}

fn vacuum_overlap_sq(beta: f64) -> Result<f64> {
    let dm = displacement_matrix(C64::new(beta, 0.0), 2)?;
    let (plus, _) = plus_minus_states(2)?;
    Ok(dm.apply(&plus)?.amplitude(0).norm_sqr())
}

/// Real displacement maximizing the vacuum overlap `|<0|D(beta)|+>|^2`,
/// found numerically from the operator pipeline (coarse grid, then
/// bisection on the sign of a central-difference derivative). Distinct
/// from the error-optimal displacement.
pub fn closest_to_vacuum_beta() -> Result<f64> {
    let mut best_b = 0.0;
    let mut best = -1.0;
    let n = 400;
    for k in 0..=n {
        let b = -2.0 + 2.0 * k as f64 / n as f64;
        let v = vacuum_overlap_sq(b)?;
        if v > best {
            best = v;
            best_b = b;
        }
    }
    let h = 1e-5;
    let slope = |b: f64| -> Result<f64> { Ok(vacuum_overlap_sq(b + h)? - vacuum_overlap_sq(b - h)?) };
    let mut lo = best_b - 0.02;
    let mut hi = best_b + 0.02;
    if !(slope(lo)? > 0.0 && slope(hi)? < 0.0) {
        lo -= 0.05;
        hi += 0.05;
        if !(slope(lo)? > 0.0 && slope(hi)? < 0.0) {
            return Err(Error::NumericalFailure {
                iteration: 0,
                reason: "vacuum-overlap maximum not bracketed".into(),
            });
        }
    }
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if slope(mid)? > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-10 {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// First-principles qubit-block POVM element of the Gaussian receiver.
///
/// `U_G|0>` is the Gaussian state annihilated by the transformed mode
/// operator; its position wavefunction is
/// `psi_0 = C exp(-(P/Q) x^2/2 + sqrt(2)(mu/Q) x)` with
/// `P = e^{-i phi} cosh r + e^{i phi} sinh r`,
/// `Q = e^{-i phi} cosh r - e^{i phi} sinh r`, and
/// `mu = e^{-i phi} cosh r alpha + e^{i phi} sinh r alpha*`.
/// `psi_1` follows from the transformed creation operator acting on
/// `psi_0`. The reported `epsilon` and `xi` are the closed-form structure
/// constants the matrix must reproduce.
pub fn gaussian_povm_element(params: &GaussianParams, x: f64) -> Result<GaussianElement> {
    if !x.is_finite() {
        return Err(Error::InvalidInput("homodyne outcome must be finite".into()));
    }
    let (c, s) = (params.r.cosh(), params.r.sinh());
    let eiphi = C64::from_polar(1.0, params.phi);
    let p_coef = eiphi.conj() * c + eiphi * s;
    let q_coef = eiphi.conj() * c - eiphi * s;
    let mu = eiphi.conj() * c * params.alpha + eiphi * s * params.alpha.conj();
    let x_bar = SQRT_2 * params.alpha.re;
    let x_tilde = x - x_bar;
    let q_norm_sqr = q_coef.norm_sqr();

    // normalization exponent kept inside a single complex exp so strongly
    // squeezed or displaced parameters cannot overflow intermediates
    let ln_c = -0.25 * PI.ln() - 0.25 * q_norm_sqr.ln() - x_bar * x_bar / (2.0 * q_norm_sqr);
    let exponent = -(p_coef / q_coef) * (0.5 * x * x) + (mu / q_coef) * (SQRT_2 * x) + ln_c;
    let psi0 = exponent.exp();
    // logarithmic derivative of psi_0, then psi_1 via the transformed a^dag
    let dlog = -(p_coef / q_coef) * x + (mu / q_coef) * SQRT_2;
    let eitheta = C64::from_polar(1.0, params.theta);
    let psi1 = eitheta * ((p_coef.conj() * x - q_coef.conj() * dlog) * FRAC_1_SQRT_2 - mu.conj()) * psi0;

    let matrix = FockOperator::from_fn(2, |i, j| {
        let vi = if i == 0 { psi0 } else { psi1 };
        let vj = if j == 0 { psi0 } else { psi1 };
        vi.conj() * vj
    })?;

    let xi = eiphi * eiphi * params.r.tanh();
    let one_minus_xi = C64::new(1.0, 0.0) - xi;
    let epsilon = C64::from_polar(SQRT_2 / c, params.theta + params.phi) / one_minus_xi;
    if !epsilon.is_finite() {
        return Err(Error::InvalidInput(
            "degenerate parameters: tanh r reaches 1 at phi = 0".into(),
        ));
    }
    Ok(GaussianElement { x, x_tilde, epsilon, xi, norm_n: matrix.entry(0, 0).re, matrix })
}

/// Which half-line of `x_tilde` the `+` outcome occupies.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DecisionRule {
    /// Guess `+` on `x_tilde >= 0` (the rule for `Re[epsilon] >= 0`).
    PlusOnNonNegative,
    /// Guess `+` on `x_tilde < 0`.
    PlusOnNegative,
}

/// Binary decision rule for the homodyne outcomes. `Re[epsilon]` has the
/// sign of `cos(theta + phi) - cos(theta - phi) tanh r`, which is what is
/// evaluated so the rule stays defined at degenerate parameters.
pub fn gaussian_decision_rule(params: &GaussianParams) -> DecisionRule {
    let t = params.r.tanh();
    let re_sign = (params.theta + params.phi).cos() - (params.theta - params.phi).cos() * t;
    if re_sign >= 0.0 {
        DecisionRule::PlusOnNonNegative
    } else {
        DecisionRule::PlusOnNegative
    }
}

fn gaussian_error_parts(theta: f64, phi: f64, r: f64) -> f64 {
    let t = r.tanh();
    let denom_sqr = 1.0 - 2.0 * (2.0 * phi).cos() * t + t * t;
    if denom_sqr <= f64::MIN_POSITIVE {
        log::warn!("degenerate Gaussian receiver (tanh r -> 1 with cos 2phi -> 1); returning 0.5");
        return 0.5;
    }
    let contrast = ((theta + phi).cos() - (theta - phi).cos() * t).abs();
    0.5 - contrast / ((2.0 * PI).sqrt() * denom_sqr.sqrt())
}

/// Closed-form average error of the Gaussian receiver with the optimal
/// half-line decision; independent of `alpha` (the `x_tilde` shift
/// absorbs the displacement).
pub fn gaussian_error(params: &GaussianParams) -> f64 {
    gaussian_error_parts(params.theta, params.phi, params.r)
}

/// `1/2 - 1/sqrt(2 pi)`, the best error any Gaussian receiver attains.
pub fn homodyne_limit() -> f64 {
    0.5 - 1.0 / (2.0 * PI).sqrt()
}

/// Minimizes [`gaussian_error`] over `theta`, `phi`, and `r` in `[0, 3]`
/// by grid search plus compass refinement. Ties (the minimum is attained
/// for any `r` once `theta = phi = 0`) resolve toward the smallest
/// parameter norm, so the reported minimizer is the `theta = phi = 0`
/// family representative.
pub fn min_gaussian_error() -> (GaussianParams, f64) {
    const VALUE_TIE: f64 = 1e-15;
    let norm_sqr = |p: &[f64; 3]| p[0] * p[0] + p[1] * p[1] + p[2] * p[2];
    // point layout: [theta, phi, r]
    let mut best = [PI, PI, 0.0];
    let mut best_v = f64::INFINITY;
    let consider = |cand: [f64; 3], v: f64, best: &mut [f64; 3], best_v: &mut f64| {
        if v < *best_v - VALUE_TIE
            || (v <= *best_v + VALUE_TIE && norm_sqr(&cand) < norm_sqr(best) - VALUE_TIE)
        {
            *best = cand;
            *best_v = (*best_v).min(v);
        }
    };

    let n_ang = 24;
    for i in 1..=n_ang {
        let theta = -PI + 2.0 * PI * i as f64 / n_ang as f64;
        for j in 1..=n_ang {
            let phi = -PI + 2.0 * PI * j as f64 / n_ang as f64;
            for k in 0..=12 {
                let r = 0.25 * k as f64;
                let cand = [theta, phi, r];
                let v = gaussian_error_parts(theta, phi, r);
                consider(cand, v, &mut best, &mut best_v);
            }
        }
    }

    let mut step = 0.2;
    let mut guard = 0;
    while step > 1e-9 && guard < 200_000 {
        let mut moved = false;
        for axis in 0..3 {
            for dir in [-1.0, 1.0] {
                guard += 1;
                let mut cand = best;
                cand[axis] += dir * step;
                if axis == 2 {
                    cand[2] = cand[2].clamp(0.0, 3.0);
                }
                let v = gaussian_error_parts(cand[0], cand[1], cand[2]);
                let before = best;
                consider(cand, v, &mut best, &mut best_v);
                if best != before {
                    moved = true;
                }
            }
        }
        if !moved {
            step *= 0.5;
        }
    }

    let params = GaussianParams::new(C64::new(0.0, 0.0), best[1], best[2], best[0])
        .expect("search stays inside the valid domain");
    (params, best_v)
}
