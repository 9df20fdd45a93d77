//! Detector POVMs and their maximum-likelihood reconstruction from
//! probe-state outcome frequencies.
//!
//! The reconstruction is the iterated fixed-point map
//! `Pi_l <- lambda^-1 R_l Pi_l R_l lambda^-1` with
//! `R_l = sum_m (f_ml / Tr[rho_m Pi_l]) rho_m` and
//! `lambda = (sum_l R_l Pi_l R_l)^{1/2}`, which preserves positivity and
//! completeness by construction. A damping fallback keeps the likelihood
//! trace monotone when the raw map overshoots.

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::detector::{FrequencyTable, ProbeEnsemble};
use crate::error::{Error, Result};
use crate::fock::{hermitian_eig, FockOperator};

/// Frobenius tolerance for `sum_l Pi_l = I`.
pub const COMPLETENESS_TOL: f64 = 1e-8;
/// Largest per-step likelihood decrease tolerated before the damping
/// fallback engages.
pub const MONOTONICITY_TOL: f64 = 1e-9;
/// Default floor applied to `Tr[rho Pi]` inside logarithms and ratios.
pub const DEFAULT_PROB_FLOOR: f64 = 1e-12;

/// Outcome label for the no-click event.
pub const LABEL_PLUS: &str = "+";
/// Outcome label for the click event.
pub const LABEL_MINUS: &str = "-";

/// Smallest damping weight tried before a step is abandoned.
const MIN_DAMPING_WEIGHT: f64 = 1e-9;

/// A labeled set of POVM elements on a truncated Fock space.
///
/// Construction validates that every element is Hermitian and positive
/// semidefinite; completeness is measured and recorded in the
/// [`is_complete`](PovmSet::is_complete) flag rather than enforced, so
/// truncated (non-complete) sets can be represented.
#[derive(Debug, Clone, PartialEq)]
pub struct PovmSet {
    dim: usize,
    labels: Vec<String>,
    elements: Vec<FockOperator>,
    complete: bool,
}

/// A [`PovmSet`] with two outcomes labeled `+` (no click) and `-` (click).
pub type BinaryPovm = PovmSet;

impl PovmSet {
    pub fn new(labels: Vec<String>, elements: Vec<FockOperator>) -> Result<Self> {
        if elements.is_empty() {
            return Err(Error::InvalidInput("POVM needs at least one element".into()));
        }
        if labels.len() != elements.len() {
            return Err(Error::InvalidInput(format!(
                "{} labels for {} POVM elements",
                labels.len(),
                elements.len()
            )));
        }
        let dim = elements[0].dim();
        for el in &elements {
            if el.dim() != dim {
                return Err(Error::DimensionMismatch(format!(
                    "POVM elements mix dimensions {} and {}",
                    dim,
                    el.dim()
                )));
            }
            let dev = el.hermiticity_deviation();
            if dev >= crate::fock::HERMITICITY_TOL {
                return Err(Error::NotHermitian { max_dev: dev });
            }
            let eig = hermitian_eig(el)?;
            if eig.min_eigenvalue() < -crate::fock::PSD_TOL {
                return Err(Error::NotPsd { min_eig: eig.min_eigenvalue() });
            }
        }
        let mut set = Self { dim, labels, elements, complete: false };
        set.complete = set.completeness_deviation() < COMPLETENESS_TOL;
        Ok(set)
    }

    /// Two-outcome set labeled `+` / `-`.
    pub fn binary(plus: FockOperator, minus: FockOperator) -> Result<Self> {
        Self::new(vec![LABEL_PLUS.into(), LABEL_MINUS.into()], vec![plus, minus])
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of outcomes.
    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn elements(&self) -> &[FockOperator] {
        &self.elements
    }

    pub fn element(&self, l: usize) -> &FockOperator {
        &self.elements[l]
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|s| s == label)
    }

    /// Whether the elements were measured to sum to the identity within
    /// [`COMPLETENESS_TOL`].
    pub fn is_complete(&self) -> bool {
        self.complete
    }

    pub fn require_complete(&self) -> Result<&Self> {
        if self.complete {
            Ok(self)
        } else {
            Err(Error::InvalidInput(format!(
                "POVM is not complete: ||sum - I||_F = {:.3e}",
                self.completeness_deviation()
            )))
        }
    }

    /// `||sum_l Pi_l - I||_F`.
    pub fn completeness_deviation(&self) -> f64 {
        let mut sum = FockOperator::zeros(self.dim);
        for el in &self.elements {
            sum = sum.add(el);
        }
        sum.sub(&FockOperator::identity(self.dim)).frobenius_norm()
    }

    /// Smallest eigenvalue over all elements.
    pub fn min_eigenvalue(&self) -> Result<f64> {
        let mut min = f64::INFINITY;
        for el in &self.elements {
            min = min.min(hermitian_eig(el)?.min_eigenvalue());
        }
        Ok(min)
    }

    pub fn to_document(&self) -> PovmDocument {
        let elements = self
            .elements
            .iter()
            .map(|el| {
                (0..self.dim)
                    .map(|i| (0..self.dim).map(|j| [el.entry(i, j).re, el.entry(i, j).im]).collect())
                    .collect()
            })
            .collect();
        PovmDocument {
            dim: self.dim,
            complete: self.complete,
            labels: self.labels.clone(),
            elements,
        }
    }

    pub fn from_document(doc: &PovmDocument) -> Result<Self> {
        if doc.elements.is_empty() {
            return Err(Error::Parse {
                location: "elements".into(),
                reason: "document contains no POVM elements".into(),
            });
        }
        let mut elements = Vec::with_capacity(doc.elements.len());
        for (l, rows) in doc.elements.iter().enumerate() {
            if rows.len() != doc.dim || rows.iter().any(|r| r.len() != doc.dim) {
                return Err(Error::Parse {
                    location: format!("elements[{l}]"),
                    reason: format!("matrix is not {0}x{0}", doc.dim),
                });
            }
            let mat = DMatrix::from_fn(doc.dim, doc.dim, |i, j| {
                C64::new(rows[i][j][0], rows[i][j][1])
            });
            elements.push(FockOperator::from_matrix(mat)?);
        }
        let set = Self::new(doc.labels.clone(), elements)?;
        if set.complete != doc.complete {
            log::warn!(
                "POVM document declared complete={} but measured complete={}",
                doc.complete,
                set.complete
            );
        }
        Ok(set)
    }

    pub fn to_json_string(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(&self.to_document())?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let doc: PovmDocument = serde_json::from_str(s)?;
        Self::from_document(&doc)
    }
}

/// Serialization form of a [`PovmSet`]: each element a nested `dim x dim`
/// array of `[re, im]` pairs. Floats round-trip bit-exactly through JSON.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PovmDocument {
    pub dim: usize,
    pub complete: bool,
    pub labels: Vec<String>,
    pub elements: Vec<Vec<Vec<[f64; 2]>>>,
}

/// Iteration controls for [`ml_reconstruct`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MlConfig {
    pub max_iterations: usize,
    /// Largest per-element Frobenius change below which the iteration is
    /// declared converged.
    pub convergence_tol: f64,
    /// Floor on `Tr[rho Pi]` in likelihood terms and `R_l` ratios.
    pub prob_floor: f64,
    /// Pseudo-inverse floor on the eigenvalues of the normalizer `lambda`.
    pub eig_floor: f64,
}

impl Default for MlConfig {
    fn default() -> Self {
        Self {
            max_iterations: 10_000,
            convergence_tol: 1e-8,
            prob_floor: DEFAULT_PROB_FLOOR,
            eig_floor: 1e-12,
        }
    }
}

impl MlConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iterations == 0 {
            return Err(Error::InvalidInput("max_iterations must be at least 1".into()));
        }
        for (name, v) in [
            ("convergence_tol", self.convergence_tol),
            ("prob_floor", self.prob_floor),
            ("eig_floor", self.eig_floor),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::InvalidInput(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(())
    }
}

/// Diagnostics of one [`ml_reconstruct`] run.
///
/// The stopping rule, initialization, and damping behavior are artifact
/// choices surfaced here: `damped_steps` counts iterations that needed the
/// monotonicity fallback, and `probed_support_dim` is the dimension of the
/// span actually constrained by the probe set (the complement keeps its
/// initialized value). Likelihood values are mean log-likelihood per shot,
/// as returned by [`log_likelihood`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MlReport {
    pub iterations_run: usize,
    pub final_log_likelihood: f64,
    pub log_likelihood_trace: Vec<f64>,
    pub max_constraint_violation: f64,
    pub converged: bool,
    pub damped_steps: usize,
    pub probed_support_dim: usize,
}

/// Mean log-likelihood per shot, `(1/N) sum_ml f_ml ln Tr[rho_m Pi_l]`
/// with `N` the total count over all probes, zero-count terms contributing
/// exactly zero, and traces floored at [`DEFAULT_PROB_FLOOR`].
///
/// The per-shot normalization keeps the value O(1) for any shot count, so
/// tolerances on likelihood differences (monotonicity, optimality gaps)
/// stay meaningful: at raw-count scale a table with 1e9 shots would push
/// the sum's floating-point resolution above the tolerances themselves.
pub fn log_likelihood(
    povm: &PovmSet,
    ensemble: &ProbeEnsemble,
    table: &FrequencyTable,
) -> Result<f64> {
    if povm.dim() != ensemble.dim() {
        return Err(Error::DimensionMismatch(format!(
            "POVM dimension {} vs probe dimension {}",
            povm.dim(),
            ensemble.dim()
        )));
    }
    if table.n_probes() != ensemble.len() || table.n_outcomes() != povm.len() {
        return Err(Error::DimensionMismatch(format!(
            "table {}x{} vs {} probes and {} outcomes",
            table.n_probes(),
            table.n_outcomes(),
            ensemble.len(),
            povm.len()
        )));
    }
    let rho = ensemble.density_matrices()?;
    log_likelihood_of(&rho, table, povm.elements(), DEFAULT_PROB_FLOOR)
}

fn log_likelihood_of(
    rho: &[FockOperator],
    table: &FrequencyTable,
    povm: &[FockOperator],
    floor: f64,
) -> Result<f64> {
    let total = table.total_counts();
    if total == 0 {
        return Ok(0.0);
    }
    let mut ll = 0.0;
    for (m, rho_m) in rho.iter().enumerate() {
        for (l, pi_l) in povm.iter().enumerate() {
            let f = table.count(m, l);
            if f == 0 {
                continue;
            }
            let p = rho_m.trace_product(pi_l)?.re.max(floor);
            ll += f as f64 * p.ln();
        }
    }
    Ok(ll / total as f64)
}

/// Maximum-likelihood POVM reconstruction.
///
/// Starts from the unbiased interior point `Pi_l = I/L` and iterates the
/// fixed-point map until the per-element Frobenius change drops below
/// `config.convergence_tol` or `config.max_iterations` is reached. On the
/// subspace the probes never constrain, elements keep their current value,
/// so completeness holds on the whole space at every iteration.
pub fn ml_reconstruct(
    ensemble: &ProbeEnsemble,
    table: &FrequencyTable,
    config: &MlConfig,
) -> Result<(PovmSet, MlReport)> {
    config.validate()?;
    if table.n_probes() != ensemble.len() {
        return Err(Error::DimensionMismatch(format!(
            "frequency table has {} rows for {} probes",
            table.n_probes(),
            ensemble.len()
        )));
    }
    let l_out = table.n_outcomes();
    let dim = ensemble.dim();
    let n_total = table.total_counts();
    if n_total == 0 {
        return Err(Error::InvalidInput("frequency table holds no counts".into()));
    }
    let rho = ensemble.density_matrices()?;
    // weights f_ml / N keep the normalizer O(1) regardless of shot count;
    // the fixed-point map is invariant under this common rescaling of R_l
    let weights: Vec<Vec<f64>> = (0..ensemble.len())
        .map(|m| (0..l_out).map(|l| table.count(m, l) as f64 / n_total as f64).collect())
        .collect();

    let mut povm: Vec<FockOperator> =
        vec![FockOperator::identity(dim).scaled_re(1.0 / l_out as f64); l_out];
    let mut ll_prev = log_likelihood_of(&rho, table, &povm, config.prob_floor)?;
    if !ll_prev.is_finite() {
        return Err(Error::NumericalFailure {
            iteration: 0,
            reason: format!("initial log-likelihood is {ll_prev}"),
        });
    }

    let mut trace = Vec::new();
    let mut damped_steps = 0usize;
    let mut probed_support_dim = dim;
    let mut converged = false;
    let mut prev_prev: Option<Vec<FockOperator>> = None;
    let max_change = |a: &[FockOperator], b: &[FockOperator]| {
        a.iter().zip(b).map(|(x, y)| x.sub(y).frobenius_norm()).fold(0.0, f64::max)
    };

    for iter in 0..config.max_iterations {
        let (candidate, support) = rr_step(&rho, &weights, &povm, config, iter)?;
        if iter == 0 {
            probed_support_dim = support;
        }

        let mut accepted = candidate.clone();
        let mut ll_new = log_likelihood_of(&rho, table, &accepted, config.prob_floor)?;
        let mut weight = 1.0;
        while ll_new < ll_prev - MONOTONICITY_TOL && weight > MIN_DAMPING_WEIGHT {
            weight *= 0.5;
            accepted = blend(&povm, &candidate, weight);
            ll_new = log_likelihood_of(&rho, table, &accepted, config.prob_floor)?;
        }
        if !ll_new.is_finite() {
            return Err(Error::NumericalFailure {
                iteration: iter,
                reason: format!("log-likelihood became {ll_new}"),
            });
        }
        if ll_new < ll_prev - MONOTONICITY_TOL {
            // no step length restored monotonicity; hold position
            accepted = povm.clone();
            ll_new = ll_prev;
        }
        if weight < 1.0 {
            damped_steps += 1;
        }

        let mut delta = max_change(&accepted, &povm);
        // A neutrally stable fixed point leaves a period-2 residual: the
        // one-step change stalls while the two-step change vanishes. The
        // cycle midpoint sits on the fixed point to first order, so step
        // there instead; local concavity keeps the likelihood monotone.
        if delta >= config.convergence_tol {
            if let Some(pp) = &prev_prev {
                if max_change(&accepted, pp) < config.convergence_tol {
                    accepted = blend(&povm, &accepted, 0.5);
                    ll_new = log_likelihood_of(&rho, table, &accepted, config.prob_floor)?;
                    damped_steps += 1;
                    delta = max_change(&accepted, &povm);
                }
            }
        }

        prev_prev = Some(std::mem::replace(&mut povm, accepted));
        ll_prev = ll_new;
        trace.push(ll_new);
        if delta < config.convergence_tol {
            converged = true;
            break;
        }
    }

    let labels: Vec<String> = if l_out == 2 {
        vec![LABEL_PLUS.into(), LABEL_MINUS.into()]
    } else {
        (0..l_out).map(|l| l.to_string()).collect()
    };
    let set = PovmSet::new(labels, povm)?;
    let violation = set
        .completeness_deviation()
        .max((-set.min_eigenvalue()?).max(0.0));
    if violation > 1e-6 {
        log::warn!("reconstruction ended with constraint violation {violation:.3e}");
    }
    let report = MlReport {
        iterations_run: trace.len(),
        final_log_likelihood: ll_prev,
        log_likelihood_trace: trace,
        max_constraint_violation: violation,
        converged,
        damped_steps,
        probed_support_dim,
    };
    Ok((set, report))
}

fn blend(old: &[FockOperator], new: &[FockOperator], weight: f64) -> Vec<FockOperator> {
    old.iter()
        .zip(new)
        .map(|(a, b)| a.scaled_re(1.0 - weight).add(&b.scaled_re(weight)))
        .collect()
}

/// One raw fixed-point step; returns the candidate elements and the
/// dimension of the normalizer's retained support.
fn rr_step(
    rho: &[FockOperator],
    weights: &[Vec<f64>],
    povm: &[FockOperator],
    config: &MlConfig,
    iter: usize,
) -> Result<(Vec<FockOperator>, usize)> {
    let dim = povm[0].dim();
    let l_out = povm.len();

    let mut r_ops = Vec::with_capacity(l_out);
    for (l, pi_l) in povm.iter().enumerate() {
        let mut r = FockOperator::zeros(dim);
        for (m, rho_m) in rho.iter().enumerate() {
            let w = weights[m][l];
            if w == 0.0 {
                continue;
            }
            let p = rho_m.trace_product(pi_l)?.re.max(config.prob_floor);
            r = r.add(&rho_m.scaled_re(w / p));
        }
        r_ops.push(r.symmetrized());
    }

    let mut normalizer = FockOperator::zeros(dim);
    for (l, pi_l) in povm.iter().enumerate() {
        normalizer = normalizer.add(&r_ops[l].mul(pi_l).mul(&r_ops[l]));
    }
    let normalizer = normalizer.symmetrized();
    let eig = hermitian_eig(&normalizer)?;
    let scale = eig.max_eigenvalue().max(1.0);
    if eig.min_eigenvalue() < -1e-6 * scale {
        return Err(Error::NumericalFailure {
            iteration: iter,
            reason: format!("normalizer lost positivity: min eigenvalue {:.3e}", eig.min_eigenvalue()),
        });
    }
    let floor = config.eig_floor;
    let keep = |g: f64| g.max(0.0).sqrt() > floor;
    let support = eig.eigenvalues().iter().copied().filter(|&g| keep(g)).count();
    let lambda_inv = eig.map(|g| {
        if keep(g) { C64::new(g.sqrt().recip(), 0.0) } else { C64::new(0.0, 0.0) }
    });
    let kept_proj = eig.map(|g| if keep(g) { C64::new(1.0, 0.0) } else { C64::new(0.0, 0.0) });
    let null_proj = FockOperator::identity(dim).sub(&kept_proj);

    let mut out = Vec::with_capacity(l_out);
    for (l, pi_l) in povm.iter().enumerate() {
        let map = lambda_inv.mul(&r_ops[l]);
        let mut updated = map.mul(pi_l).mul(&map.adjoint());
        if support < dim {
            updated = updated.add(&null_proj.mul(pi_l).mul(&null_proj));
        }
        out.push(updated.symmetrized());
    }
    Ok((out, support))
}

/// Top-left `sub_dim` block of every element. The result stays PSD but is
/// generally not complete; its flag records the measured outcome.
pub fn truncate_povm(povm: &PovmSet, sub_dim: usize) -> Result<PovmSet> {
    if sub_dim > povm.dim() {
        return Err(Error::InvalidInput(format!(
            "cannot truncate dim-{} POVM to dim {sub_dim}",
            povm.dim()
        )));
    }
    let cropped: Result<Vec<_>> = povm.elements().iter().map(|el| el.crop(sub_dim)).collect();
    PovmSet::new(povm.labels().to_vec(), cropped?)
}
