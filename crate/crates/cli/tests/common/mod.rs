//! Test-side oracles for the acceptance suite, written independently of
//! the library internals: a multinomial entropy bound, a brute-force
//! search over binary qubit POVMs, and deterministic count tables built
//! from exact outcome probabilities.
#![allow(dead_code)]

use dpc_core::detector::{FrequencyTable, ProbeEnsemble};
use dpc_core::fock::FockOperator;
use dpc_core::tomography::PovmSet;
use num_complex::Complex64 as C64;

/// Counts `round(p * shots)` for outcome `+`, remainder for `-`.
pub fn counts_from_probabilities(
    ensemble: &ProbeEnsemble,
    povm: &PovmSet,
    shots: u64,
) -> FrequencyTable {
    let rho = ensemble.density_matrices().unwrap();
    let mut counts = Vec::new();
    for rho_m in &rho {
        let p_plus = rho_m.trace_product(povm.element(0)).unwrap().re.clamp(0.0, 1.0);
        let n_plus = (p_plus * shots as f64).round() as u64;
        counts.push(vec![n_plus, shots - n_plus]);
    }
    FrequencyTable::new(counts, vec![shots; ensemble.len()]).unwrap()
}

pub fn count_rows(table: &FrequencyTable) -> Vec<[u64; 2]> {
    (0..table.n_probes()).map(|m| [table.count(m, 0), table.count(m, 1)]).collect()
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
