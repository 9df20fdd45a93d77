//! Test-side oracles, written independently of the library internals:
//! closed-form displacement matrix elements via the generalized Laguerre
//! recurrence, Poisson partial sums, and a brute-force search for the
//! best binary qubit POVM under a multinomial likelihood.
#![allow(dead_code)]

use dpc_core::fock::FockOperator;
use nalgebra::DMatrix;
use num_complex::Complex64 as C64;

/// `L_n^{(k)}(x)` by the three-term recurrence
/// `(n+1) L_{n+1} = (2n+1+k-x) L_n - (n+k) L_{n-1}`.
fn laguerre(n: usize, k: f64, x: f64) -> f64 {
    let mut prev = 1.0;
    if n == 0 {
        return prev;
    }
    let mut cur = 1.0 + k - x;
    for j in 1..n {
        let jf = j as f64;
        let next = ((2.0 * jf + 1.0 + k - x) * cur - (jf + k) * prev) / (jf + 1.0);
        prev = cur;
        cur = next;
    }
    cur
}

/// `<m|D(beta)|n>` in closed form:
/// `e^{-|beta|^2/2} sqrt(n!/m!) beta^{m-n} L_n^{(m-n)}(|beta|^2)` for
/// `m >= n`, and the conjugate-mirror expression with `(-beta*)^{n-m}`
/// otherwise.
pub fn laguerre_displacement_entry(m: usize, n: usize, beta: C64) -> C64 {
    let x = beta.norm_sqr();
    let envelope = (-0.5 * x).exp();
    let (lo, hi, base) = if m >= n { (n, m, beta) } else { (m, n, -beta.conj()) };
    let mut fact_ratio = 1.0; // lo!/hi!
    for j in (lo + 1)..=hi {
        fact_ratio /= j as f64;
    }
    let k = hi - lo;
    base.powu(k as u32) * (envelope * fact_ratio.sqrt() * laguerre(lo, k as f64, x))
}

/// `sum_{n < dim} e^{-mean} mean^n / n!`: probability a Poisson variable
/// falls below `dim`.
pub fn poisson_partial_sum(mean: f64, dim: usize) -> f64 {
    let mut term = (-mean).exp();
    let mut sum = term;
    for n in 1..dim {
        term *= mean / n as f64;
        sum += term;
    }
    sum
}

/// `(1/N) sum_ml f_ml ln(f_ml / N_m)`: the multinomial entropy bound in
/// mean-per-shot units, matching `log_likelihood`. No POVM can exceed
/// this log-likelihood on the given counts.
pub fn entropy_bound(counts: &[[u64; 2]]) -> f64 {
    let mut bound = 0.0;
    let mut total = 0u64;
    for row in counts {
        let n = (row[0] + row[1]) as f64;
        total += row[0] + row[1];
        for &f in row {
            if f > 0 {
                bound += f as f64 * ((f as f64 / n).ln());
            }
        }
    }
    bound / total as f64
}

/// Hilbert-Schmidt inner product of Hermitian operators (real).
fn hs_inner(a: &FockOperator, b: &FockOperator) -> f64 {
    a.trace_product(b).unwrap().re
}

/// Orthonormal basis of the span of a set of Hermitian operators, built
/// from the eigendecomposition of their Gram matrix. Used to compare
/// POVMs only along the directions a probe set actually measures.
pub struct OperatorSpan {
    basis: Vec<FockOperator>,
}

impl OperatorSpan {
    pub fn from_states(rhos: &[FockOperator]) -> Self {
        let n = rhos.len();
        let gram = DMatrix::<f64>::from_fn(n, n, |i, j| hs_inner(&rhos[i], &rhos[j]));
        let eig = nalgebra::SymmetricEigen::new(gram);
        let max_eval = eig.eigenvalues.iter().cloned().fold(0.0f64, f64::max);
        let mut basis = Vec::new();
        for k in 0..n {
            let lambda = eig.eigenvalues[k];
            if lambda <= 1e-10 * max_eval {
                continue;
            }
            let mut op = FockOperator::zeros(rhos[0].dim());
            for i in 0..n {
                op = op.add(&rhos[i].scaled_re(eig.eigenvectors[(i, k)]));
            }
            basis.push(op.scaled_re(1.0 / lambda.sqrt()));
        }
        Self { basis }
    }

    pub fn rank(&self) -> usize {
        self.basis.len()
    }

    pub fn project(&self, x: &FockOperator) -> FockOperator {
        let mut out = FockOperator::zeros(x.dim());
        for b in &self.basis {
            out = out.add(&b.scaled_re(hs_inner(b, x)));
        }
        out
    }
}

const QUBIT_PROB_FLOOR: f64 = 1e-12;

/// Coordinates `(a, b, Re c, Im c)` of `Pi_+ = [[a, c], [c*, b]]`.
/// Feasibility (`Pi_+ >= 0` and `I - Pi_+ >= 0`) is `0 <= a, b <= 1` with
/// `|c|^2 <= min(ab, (1-a)(1-b))`; out-of-range points are projected back.
fn project(p: &mut [f64; 4]) {
    p[0] = p[0].clamp(0.0, 1.0);
    p[1] = p[1].clamp(0.0, 1.0);
    let cap = (p[0] * p[1]).min((1.0 - p[0]) * (1.0 - p[1])).max(0.0).sqrt();
    let mag = (p[2] * p[2] + p[3] * p[3]).sqrt();
    if mag > cap {
        let scale = if mag == 0.0 { 0.0 } else { cap / mag };
        p[2] *= scale;
        p[3] *= scale;
    }
}

fn qubit_log_likelihood(p: &[f64; 4], rhos: &[FockOperator], counts: &[[u64; 2]]) -> f64 {
    let c = C64::new(p[2], p[3]);
    let mut ll = 0.0;
    let mut total = 0u64;
    for (rho, row) in rhos.iter().zip(counts) {
        let t = rho.entry(0, 0).re * p[0]
            + rho.entry(1, 1).re * p[1]
            + 2.0 * (rho.entry(1, 0) * c).re;
        let p_plus = t.clamp(QUBIT_PROB_FLOOR, 1.0);
        let p_minus = (1.0 - t).clamp(QUBIT_PROB_FLOOR, 1.0);
        total += row[0] + row[1];
        if row[0] > 0 {
            ll += row[0] as f64 * p_plus.ln();
        }
        if row[1] > 0 {
            ll += row[1] as f64 * p_minus.ln();
        }
    }
    ll / total as f64
}

/// Best mean-per-shot log-likelihood over all binary qubit POVMs, by coarse
/// grid plus compass-pattern refinement, restarted from `extra_starts` too.
pub fn exhaustive_qubit_binary_ml(
    rhos: &[FockOperator],
    counts: &[[u64; 2]],
    extra_starts: &[[f64; 4]],
) -> f64 {
    assert_eq!(rhos.len(), counts.len());
    for rho in rhos {
        assert_eq!(rho.dim(), 2, "oracle works on the qubit block");
    }

    let mut starts = Vec::new();
    for &a in &[0.1, 0.3, 0.5, 0.7, 0.9] {
        for &b in &[0.1, 0.3, 0.5, 0.7, 0.9] {
            starts.push([a, b, 0.0, 0.0]);
            starts.push([a, b, 0.2, 0.0]);
            starts.push([a, b, -0.2, 0.1]);
        }
    }
    starts.extend_from_slice(extra_starts);

    let mut best = f64::NEG_INFINITY;
    for start in starts {
        let mut point = start;
        project(&mut point);
        let mut value = qubit_log_likelihood(&point, rhos, counts);
        let mut step = 0.25;
        while step > 1e-10 {
            let mut improved = false;
            for axis in 0..4 {
                for dir in [-1.0, 1.0] {
                    let mut cand = point;
                    cand[axis] += dir * step;
                    project(&mut cand);
                    let v = qubit_log_likelihood(&cand, rhos, counts);
                    if v > value {
                        point = cand;
                        value = v;
                        improved = true;
                    }
                }
            }
            if !improved {
                step *= 0.5;
            }
        }
        best = best.max(value);
    }
    best
}
