//! Evaluation metrics: discrimination error of a binary POVM on the
//! `|+->` pair, fidelity between POVM elements, and theory curves for the
//! ideal and imperfect photon-counting receiver.

use std::fmt;
use std::io::{Read, Write};

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::detector::DetectorModel;
use crate::error::{Error, Result};
use crate::fock::{plus_minus_states, psd_sqrt, FockOperator};
use crate::receivers::homodyne_limit;
use crate::tomography::{truncate_povm, PovmSet};

/// Where a POVM under evaluation came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PovmSource {
    Analytic,
    Reconstructed,
}

impl fmt::Display for PovmSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PovmSource::Analytic => write!(f, "analytic"),
            PovmSource::Reconstructed => write!(f, "reconstructed"),
        }
    }
}

/// Discrimination performance of a binary POVM on the equal-prior
/// `|+->` pair.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DiscriminationReport {
    /// Average error probability.
    pub p_error: f64,
    /// `<-|Pi_+|->`: probability of guessing `+` when `-` was sent.
    pub p_error_plus_given_minus: f64,
    /// `<+|Pi_-|+>`: probability of guessing `-` when `+` was sent.
    pub p_error_minus_given_plus: f64,
    /// Displacement the POVM is nominally operating at.
    pub beta_nominal: C64,
    /// Provenance of the POVM.
    pub source: PovmSource,
}

/// Evaluates a two-outcome POVM on the qubit block. The POVM must be
/// two-dimensional with outcomes labeled `+` and `-`.
pub fn discrimination_error(
    povm: &PovmSet,
    beta_nominal: C64,
    source: PovmSource,
) -> Result<DiscriminationReport> {
    if povm.dim() != 2 {
        return Err(Error::DimensionMismatch(format!(
            "discrimination error is defined on the 2-level block, got dimension {}",
            povm.dim()
        )));
    }
    if povm.len() != 2 {
        return Err(Error::InvalidInput(format!(
            "expected a binary POVM, got {} outcomes",
            povm.len()
        )));
    }
    let plus_idx = povm.index_of("+").ok_or_else(|| {
        Error::InvalidInput("binary POVM must carry a '+' outcome label".into())
    })?;
    let minus_idx = povm.index_of("-").ok_or_else(|| {
        Error::InvalidInput("binary POVM must carry a '-' outcome label".into())
    })?;
    let (plus_state, minus_state) = plus_minus_states(2)?;
    let p_plus_given_minus = povm.element(plus_idx).expectation(&minus_state)?.re;
    let p_minus_given_plus = povm.element(minus_idx).expectation(&plus_state)?.re;
    Ok(DiscriminationReport {
        p_error: 0.5 * (p_plus_given_minus + p_minus_given_plus),
        p_error_plus_given_minus: p_plus_given_minus,
        p_error_minus_given_plus: p_minus_given_plus,
        beta_nominal,
        source,
    })
}

/// Elementwise fidelities between a reconstructed binary POVM and a
/// reference one.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FidelityReport {
    pub f_plus: f64,
    pub f_minus: f64,
}

fn element_fidelity(a: &FockOperator, b: &FockOperator) -> Result<f64> {
    let (ta, tb) = (a.trace().re, b.trace().re);
    if ta <= 1e-12 || tb <= 1e-12 {
        return Err(Error::UndefinedFidelity(format!(
            "fidelity needs strictly positive traces, got {ta:.3e} and {tb:.3e}"
        )));
    }
    let sqrt_a = psd_sqrt(a)?;
    let inner = sqrt_a.mul(&b.mul(&sqrt_a)).symmetrized();
    let overlap = psd_sqrt(&inner)?.trace().re;
    Ok((overlap * overlap / (ta * tb)).clamp(0.0, 1.0))
}

/// Normalized fidelity `F(A, B) = Tr[sqrt(sqrt(A) B sqrt(A))]^2 / (Tr A Tr B)`
/// between matching elements of two binary POVMs; symmetric in its
/// arguments and invariant under positive rescaling of either element.
pub fn povm_fidelity(reconstructed: &PovmSet, reference: &PovmSet) -> Result<FidelityReport> {
    if reconstructed.dim() != reference.dim() {
        return Err(Error::DimensionMismatch(format!(
            "POVM dimensions differ: {} vs {}",
            reconstructed.dim(),
            reference.dim()
        )));
    }
    let pair = |label: &str| -> Result<f64> {
        let i = reconstructed.index_of(label).ok_or_else(|| {
            Error::InvalidInput(format!("reconstructed POVM lacks outcome '{label}'"))
        })?;
        let j = reference.index_of(label).ok_or_else(|| {
            Error::InvalidInput(format!("reference POVM lacks outcome '{label}'"))
        })?;
        element_fidelity(reconstructed.element(i), reference.element(j))
    };
    Ok(FidelityReport { f_plus: pair("+")?, f_minus: pair("-")? })
}

/// One row of the theory curve table.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CurvePoint {
    pub beta: f64,
    pub pe_ideal: f64,
    pub pe_imperfect: f64,
    pub pe_homodyne: f64,
}

/// Ideal and imperfect error curves over a grid of real displacements.
/// The ideal curve is the closed form `1/2 + beta e^{-beta^2}`; the
/// imperfect one is read off the detector model's POVM, built on 4 Fock
/// levels and truncated to the qubit block.
pub fn theory_curves(beta_grid: &[f64], model: &DetectorModel) -> Result<Vec<CurvePoint>> {
    if beta_grid.is_empty() {
        return Err(Error::InvalidInput("empty displacement grid".into()));
    }
    let homodyne = homodyne_limit();
    let mut out = Vec::with_capacity(beta_grid.len());
    for &beta in beta_grid {
        if !beta.is_finite() {
            return Err(Error::InvalidInput("displacement grid must be finite".into()));
        }
        let ideal = crate::receivers::kennedy_error(&crate::receivers::KennedyParams::real(beta)?);
        let imperfect_povm = model.with_beta(C64::new(beta, 0.0))?.imperfect_povm(4)?;
        let qubit = truncate_povm(&imperfect_povm, 2)?;
        let report = discrimination_error(&qubit, C64::new(beta, 0.0), PovmSource::Analytic)?;
        out.push(CurvePoint {
            beta,
            pe_ideal: ideal,
            pe_imperfect: report.p_error,
            pe_homodyne: homodyne,
        });
    }
    Ok(out)
}

/// Writes curve rows as CSV, preceded by `#`-prefixed comment lines.
pub fn write_curve_csv<W: Write>(
    writer: W,
    points: &[CurvePoint],
    comments: &[String],
) -> Result<()> {
    let mut writer = writer;
    for line in comments {
        writeln!(writer, "# {line}")?;
    }
    let mut csv_writer = csv::Writer::from_writer(writer);
    for point in points {
        csv_writer.serialize(point)?;
    }
    csv_writer.flush()?;
    Ok(())
}

/// Reads curve rows back, skipping `#` comment lines.
pub fn read_curve_csv<R: Read>(reader: R) -> Result<Vec<CurvePoint>> {
    let mut csv_reader = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(reader);
    let mut out = Vec::new();
    for (i, record) in csv_reader.deserialize::<CurvePoint>().enumerate() {
        let point = record.map_err(|e| Error::Parse {
            location: format!("data row {i}"),
            reason: e.to_string(),
        })?;
        if !(point.beta.is_finite() && point.pe_ideal.is_finite() && point.pe_imperfect.is_finite())
        {
            return Err(Error::Parse {
                location: format!("data row {i}"),
                reason: "non-finite value".into(),
            });
        }
        out.push(point);
    }
    if out.is_empty() {
        return Err(Error::Parse { location: "curve file".into(), reason: "no data rows".into() });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::receivers::{kennedy_povm, KennedyParams};
    use crate::tomography::PovmSet;
    use std::f64::consts::FRAC_1_SQRT_2;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn projector_povm(plus: FockOperator) -> PovmSet {
        let minus = FockOperator::identity(plus.dim()).sub(&plus);
        PovmSet::binary(plus, minus).unwrap()
    }

    #[test]
    fn perfect_projector_discriminates_exactly() {
        let (plus_state, _) = plus_minus_states(2).unwrap();
        let povm = projector_povm(plus_state.outer());
        let report = discrimination_error(&povm, c(0.0, 0.0), PovmSource::Analytic).unwrap();
        assert!(report.p_error.abs() < 1e-14);
        assert!(report.p_error_plus_given_minus.abs() < 1e-14);
        assert!(report.p_error_minus_given_plus.abs() < 1e-14);
    }

    #[test]
    fn coin_flip_povm_errs_half_the_time() {
        let povm = projector_povm(FockOperator::identity(2).scaled_re(0.5));
        let report = discrimination_error(&povm, c(0.0, 0.0), PovmSource::Analytic).unwrap();
        assert!((report.p_error - 0.5).abs() < 1e-14);
    }

    #[test]
    fn kennedy_povm_matches_closed_form_error() {
        let params = KennedyParams::real(-FRAC_1_SQRT_2).unwrap();
        let povm = truncate_povm(&kennedy_povm(&params, 20).unwrap(), 2).unwrap();
        let report = discrimination_error(&povm, params.beta(), PovmSource::Analytic).unwrap();
        let expected = 0.5 - (-0.5f64).exp() * FRAC_1_SQRT_2;
        assert!((report.p_error - expected).abs() < 1e-6, "got {}", report.p_error);
    }

    #[test]
    fn discrimination_rejects_wrong_shape() {
        let params = KennedyParams::real(-0.7).unwrap();
        let tall = kennedy_povm(&params, 4).unwrap();
        assert!(discrimination_error(&tall, params.beta(), PovmSource::Analytic).is_err());
    }

    #[test]
    fn fidelity_of_identical_povms_is_one() {
        let params = KennedyParams::real(-0.7).unwrap();
        let povm = kennedy_povm(&params, 4).unwrap();
        let report = povm_fidelity(&povm, &povm).unwrap();
        assert!((report.f_plus - 1.0).abs() < 1e-10);
        assert!((report.f_minus - 1.0).abs() < 1e-10);
    }

    #[test]
    fn fidelity_is_scale_invariant_and_symmetric() {
        let params = KennedyParams::real(-0.6).unwrap();
        let povm = kennedy_povm(&params, 3).unwrap();
        let scaled = PovmSet::binary(
            povm.element(0).scaled_re(0.37),
            povm.element(1).scaled_re(2.5),
        )
        .unwrap();
        let fwd = povm_fidelity(&scaled, &povm).unwrap();
        let rev = povm_fidelity(&povm, &scaled).unwrap();
        assert!((fwd.f_plus - 1.0).abs() < 1e-10);
        assert!((fwd.f_minus - 1.0).abs() < 1e-10);
        assert!((fwd.f_plus - rev.f_plus).abs() < 1e-12);
        assert!((fwd.f_minus - rev.f_minus).abs() < 1e-12);
    }

    #[test]
    fn orthogonal_projectors_have_zero_fidelity() {
        let e0 = crate::fock::FockVector::basis_state(0, 2).unwrap();
        let e1 = crate::fock::FockVector::basis_state(1, 2).unwrap();
        let a = PovmSet::binary(e0.outer(), e1.outer()).unwrap();
        let b = PovmSet::binary(e1.outer(), e0.outer()).unwrap();
        let report = povm_fidelity(&a, &b).unwrap();
        assert!(report.f_plus.abs() < 1e-12);
        assert!(report.f_minus.abs() < 1e-12);
    }

    #[test]
    fn zero_trace_element_is_rejected() {
        let zero = FockOperator::zeros(2);
        let id = FockOperator::identity(2);
        let degenerate = PovmSet::binary(zero, id.clone()).unwrap();
        let healthy = PovmSet::binary(id.scaled_re(0.5), id.scaled_re(0.5)).unwrap();
        match povm_fidelity(&degenerate, &healthy) {
            Err(Error::UndefinedFidelity(_)) => {}
            other => panic!("expected undefined fidelity, got {other:?}"),
        }
    }

    #[test]
    fn curves_ideal_column_matches_closed_form_and_imperfect_sits_above() {
        let model = DetectorModel::new(c(-0.7, 0.0), 0.99, 1e-3, 1.0).unwrap();
        let grid = [-1.0, -0.7, -0.4];
        let points = theory_curves(&grid, &model).unwrap();
        for p in &points {
            let ideal = 0.5 + p.beta * (-p.beta * p.beta).exp();
            assert!((p.pe_ideal - ideal).abs() < 1e-12);
            assert!(p.pe_imperfect > p.pe_ideal);
            assert!((p.pe_homodyne - homodyne_limit()).abs() < 1e-15);
        }
    }

    #[test]
    fn ideal_model_curves_coincide() {
        let model = DetectorModel::ideal(c(-0.7, 0.0));
        let points = theory_curves(&[-0.7], &model).unwrap();
        assert!((points[0].pe_imperfect - points[0].pe_ideal).abs() < 1e-9);
    }

    #[test]
    fn curve_csv_round_trips_bit_exactly() {
        let model = DetectorModel::new(c(-0.7, 0.0), 0.991, 3.1e-4, 1.0).unwrap();
        let points = theory_curves(&[-1.0, -0.71, -0.4], &model).unwrap();
        let mut buf = Vec::new();
        write_curve_csv(&mut buf, &points, &["generated by unit test".into()]).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("# generated by unit test\n"));
        assert!(text.contains("beta,pe_ideal,pe_imperfect,pe_homodyne"));
        let back = read_curve_csv(buf.as_slice()).unwrap();
        assert_eq!(back.len(), points.len());
        for (a, b) in back.iter().zip(points.iter()) {
            assert_eq!(a.beta.to_bits(), b.beta.to_bits());
            assert_eq!(a.pe_ideal.to_bits(), b.pe_ideal.to_bits());
            assert_eq!(a.pe_imperfect.to_bits(), b.pe_imperfect.to_bits());
            assert_eq!(a.pe_homodyne.to_bits(), b.pe_homodyne.to_bits());
        }
    }

    #[test]
    fn malformed_curve_csv_is_rejected() {
        let text = "beta,pe_ideal,pe_imperfect,pe_homodyne\n-0.7,0.07,abc,0.10\n";
        assert!(read_curve_csv(text.as_bytes()).is_err());
        let empty = "beta,pe_ideal,pe_imperfect,pe_homodyne\n";
        assert!(read_curve_csv(empty.as_bytes()).is_err());
    }
}
