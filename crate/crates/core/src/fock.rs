//! Truncated Fock-space linear algebra.
//!
//! State vectors and operators are stored as dense complex matrices in the
//! photon-number basis `|0>..|d-1>`. Displacement matrices are obtained by
//! exponentiating the truncated generator at a guard dimension and cropping,
//! so the retained block carries accurate infinite-dimensional matrix
//! elements.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};

/// Entrywise tolerance for treating an operator as Hermitian.
pub const HERMITICITY_TOL: f64 = 1e-10;
/// Magnitude of negative eigenvalue tolerated in a positive-semidefinite
/// operator.
pub const PSD_TOL: f64 = 1e-9;
/// Default eigenvalue floor below which the pseudo-inverse maps to zero.
pub const DEFAULT_PINV_FLOOR: f64 = 1e-12;

const GUARD_PAD: usize = 12;
const GUARD_MIN: usize = 20;

/// Guard dimension at which displacement generators are exponentiated
/// before cropping back to the working dimension.
pub fn guard_dim(dim: usize) -> usize {
    (dim + GUARD_PAD).max(GUARD_MIN)
}

fn check_dim(dim: usize) -> Result<()> {
    if dim == 0 {
        return Err(Error::InvalidInput("dimension must be at least 1".into()));
    }
    Ok(())
}

/// State vector on the truncated photon-number basis.
#[derive(Debug, Clone, PartialEq)]
pub struct FockVector {
    amps: DVector<C64>,
}

impl FockVector {
    /// Build from raw amplitudes; rejects empty or non-finite input.
    pub fn new(amplitudes: Vec<C64>) -> Result<Self> {
        if amplitudes.is_empty() {
            return Err(Error::InvalidInput("state vector must be non-empty".into()));
        }
        if amplitudes.iter().any(|a| !a.re.is_finite() || !a.im.is_finite()) {
            return Err(Error::InvalidInput("state vector has non-finite amplitude".into()));
        }
        Ok(Self { amps: DVector::from_vec(amplitudes) })
    }

    /// Number state `|n>` embedded in dimension `dim`.
    pub fn basis_state(n: usize, dim: usize) -> Result<Self> {
        check_dim(dim)?;
        if n >= dim {
            return Err(Error::InvalidInput(format!(
                "basis index {n} outside dimension {dim}"
            )));
        }
        let mut amps = DVector::from_element(dim, C64::new(0.0, 0.0));
        amps[n] = C64::new(1.0, 0.0);
        Ok(Self { amps })
    }

    pub(crate) fn from_dvector(amps: DVector<C64>) -> Self {
        Self { amps }
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn amplitude(&self, n: usize) -> C64 {
        self.amps[n]
    }

    pub fn amplitudes(&self) -> &[C64] {
        self.amps.as_slice()
    }

    pub fn as_vector(&self) -> &DVector<C64> {
        &self.amps
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    /// True if the Euclidean norm is within 1e-12 of 1.
    pub fn is_normalized(&self) -> bool {
        (self.norm() - 1.0).abs() < 1e-12
    }

    /// Rescale to unit norm.
    pub fn normalized(&self) -> Result<Self> {
        let n = self.norm();
        if n <= 0.0 || !n.is_finite() {
            return Err(Error::InvalidInput("cannot normalize a zero vector".into()));
        }
        Ok(Self { amps: self.amps.map(|a| a / n) })
    }

    /// Inner product `<self|other>` (conjugate-linear in `self`).
    pub fn inner(&self, other: &FockVector) -> Result<C64> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch(format!(
                "inner product between dims {} and {}",
                self.dim(),
                other.dim()
            )));
        }
        Ok(self.amps.dotc(&other.amps))
    }

    /// Outer product `|v><v|`.
    pub fn outer(&self) -> FockOperator {
        let d = self.dim();
        let mat = DMatrix::from_fn(d, d, |i, j| self.amps[i] * self.amps[j].conj());
        FockOperator { mat }
    }
}

/// Operator on the truncated photon-number basis.
#[derive(Debug, Clone, PartialEq)]
pub struct FockOperator {
    mat: DMatrix<C64>,
}

impl FockOperator {
    /// Wrap a square matrix; rejects empty, non-square, or non-finite input.
    pub fn from_matrix(mat: DMatrix<C64>) -> Result<Self> {
        if mat.nrows() == 0 || mat.nrows() != mat.ncols() {
            return Err(Error::InvalidInput(format!(
                "operator must be square and non-empty, got {}x{}",
                mat.nrows(),
                mat.ncols()
            )));
        }
        if mat.iter().any(|a| !a.re.is_finite() || !a.im.is_finite()) {
            return Err(Error::InvalidInput("operator has non-finite entry".into()));
        }
        Ok(Self { mat })
    }

    pub fn from_fn(dim: usize, f: impl Fn(usize, usize) -> C64) -> Result<Self> {
        check_dim(dim)?;
        Self::from_matrix(DMatrix::from_fn(dim, dim, f))
    }

    pub fn identity(dim: usize) -> Self {
        Self { mat: DMatrix::identity(dim, dim) }
    }

    pub fn zeros(dim: usize) -> Self {
        Self { mat: DMatrix::zeros(dim, dim) }
    }

    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    pub fn entry(&self, row: usize, col: usize) -> C64 {
        self.mat[(row, col)]
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.mat
    }

    pub fn adjoint(&self) -> Self {
        Self { mat: self.mat.adjoint() }
    }

    pub fn trace(&self) -> C64 {
        self.mat.trace()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.mat.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Largest entrywise deviation from the adjoint.
    pub fn hermiticity_deviation(&self) -> f64 {
        let d = self.dim();
        let mut max_dev: f64 = 0.0;
        for i in 0..d {
            for j in i..d {
                let dev = (self.mat[(i, j)] - self.mat[(j, i)].conj()).norm();
                max_dev = max_dev.max(dev);
            }
        }
        max_dev
    }

    pub fn is_hermitian(&self) -> bool {
        self.hermiticity_deviation() < HERMITICITY_TOL
    }

    /// `(A + A^dag) / 2`.
    pub fn symmetrized(&self) -> Self {
        let adj = self.mat.adjoint();
        Self { mat: (&self.mat + adj).map(|a| a * 0.5) }
    }

    pub fn scaled(&self, factor: C64) -> Self {
        Self { mat: self.mat.map(|a| a * factor) }
    }

    pub fn scaled_re(&self, factor: f64) -> Self {
        self.scaled(C64::new(factor, 0.0))
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!(self.dim(), other.dim(), "operator dimensions differ");
        Self { mat: &self.mat + &other.mat }
    }

    pub fn sub(&self, other: &Self) -> Self {
        assert_eq!(self.dim(), other.dim(), "operator dimensions differ");
        Self { mat: &self.mat - &other.mat }
    }

    pub fn mul(&self, other: &Self) -> Self {
        assert_eq!(self.dim(), other.dim(), "operator dimensions differ");
        Self { mat: &self.mat * &other.mat }
    }

    /// `Tr[self * other]` without forming the product matrix.
    pub fn trace_product(&self, other: &Self) -> Result<C64> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch(format!(
                "trace product between dims {} and {}",
                self.dim(),
                other.dim()
            )));
        }
        let d = self.dim();
        let mut acc = C64::new(0.0, 0.0);
        for i in 0..d {
            for j in 0..d {
                acc += self.mat[(i, j)] * other.mat[(j, i)];
            }
        }
        Ok(acc)
    }

    /// `<v|A|v>`.
    pub fn expectation(&self, v: &FockVector) -> Result<C64> {
        if self.dim() != v.dim() {
            return Err(Error::DimensionMismatch(format!(
                "expectation of dim-{} operator in dim-{} state",
                self.dim(),
                v.dim()
            )));
        }
        let av = &self.mat * v.as_vector();
        Ok(v.as_vector().dotc(&av))
    }

    pub fn apply(&self, v: &FockVector) -> Result<FockVector> {
        if self.dim() != v.dim() {
            return Err(Error::DimensionMismatch(format!(
                "applying dim-{} operator to dim-{} state",
                self.dim(),
                v.dim()
            )));
        }
        Ok(FockVector::from_dvector(&self.mat * v.as_vector()))
    }

    /// Top-left `sub_dim x sub_dim` block.
    pub fn crop(&self, sub_dim: usize) -> Result<Self> {
        check_dim(sub_dim)?;
        if sub_dim > self.dim() {
            return Err(Error::InvalidInput(format!(
                "cannot crop dim-{} operator to dim {sub_dim}",
                self.dim()
            )));
        }
        Ok(Self { mat: self.mat.view((0, 0), (sub_dim, sub_dim)).into_owned() })
    }
}

/// Hermitian eigen-decomposition with eigenvalues sorted ascending.
#[derive(Debug, Clone)]
pub struct EigenDecomposition {
    eigenvalues: Vec<f64>,
    eigenvectors: DMatrix<C64>,
}

impl EigenDecomposition {
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// Orthonormal eigenvectors as matrix columns, in eigenvalue order.
    pub fn eigenvectors(&self) -> &DMatrix<C64> {
        &self.eigenvectors
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues[0]
    }

    pub fn max_eigenvalue(&self) -> f64 {
        self.eigenvalues[self.eigenvalues.len() - 1]
    }

    /// Rebuild `V f(Lambda) V^dag`.
    pub fn map(&self, f: impl Fn(f64) -> C64) -> FockOperator {
        let d = self.eigenvalues.len();
        let diag = DMatrix::from_fn(d, d, |i, j| {
            if i == j { f(self.eigenvalues[i]) } else { C64::new(0.0, 0.0) }
        });
        FockOperator { mat: &self.eigenvectors * diag * self.eigenvectors.adjoint() }
    }
}

/// Eigen-decomposition of a Hermitian operator.
///
/// Rejects operators whose hermiticity deviation exceeds [`HERMITICITY_TOL`].
pub fn hermitian_eig(op: &FockOperator) -> Result<EigenDecomposition> {
    let dev = op.hermiticity_deviation();
    if dev >= HERMITICITY_TOL {
        return Err(Error::NotHermitian { max_dev: dev });
    }
    let se = nalgebra::SymmetricEigen::new(op.mat.clone());
    let d = op.dim();
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| se.eigenvalues[a].total_cmp(&se.eigenvalues[b]));
    let eigenvalues: Vec<f64> = order.iter().map(|&i| se.eigenvalues[i]).collect();
    let eigenvectors = DMatrix::from_fn(d, d, |i, j| se.eigenvectors[(i, order[j])]);
    Ok(EigenDecomposition { eigenvalues, eigenvectors })
}

/// Square root of a positive-semidefinite Hermitian operator.
///
/// Eigenvalues in `[-PSD_TOL, 0)` are clipped to zero; anything more
/// negative is an error.
pub fn psd_sqrt(op: &FockOperator) -> Result<FockOperator> {
    let eig = hermitian_eig(op)?;
    if eig.min_eigenvalue() < -PSD_TOL {
        return Err(Error::NotPsd { min_eig: eig.min_eigenvalue() });
    }
    Ok(eig.map(|x| C64::new(x.max(0.0).sqrt(), 0.0)))
}

/// Moore-Penrose pseudo-inverse of a positive-semidefinite Hermitian
/// operator; eigenvalues at or below `floor` invert to zero.
pub fn psd_pinv(op: &FockOperator, floor: f64) -> Result<FockOperator> {
    let eig = hermitian_eig(op)?;
    if eig.min_eigenvalue() < -PSD_TOL {
        return Err(Error::NotPsd { min_eig: eig.min_eigenvalue() });
    }
    Ok(eig.map(|x| if x > floor { C64::new(1.0 / x, 0.0) } else { C64::new(0.0, 0.0) }))
}

/// Coherent-state amplitudes `e^{-|alpha|^2/2} alpha^n / sqrt(n!)` on the
/// first `dim` number states.
///
/// Returns the vector together with its captured probability, the squared
/// norm before any renormalization. With `renormalize` set the vector is
/// scaled to unit norm.
pub fn coherent_vector(alpha: C64, dim: usize, renormalize: bool) -> Result<(FockVector, f64)> {
    check_dim(dim)?;
    if !alpha.re.is_finite() || !alpha.im.is_finite() {
        return Err(Error::InvalidInput("coherent amplitude must be finite".into()));
    }
    let mut amps = Vec::with_capacity(dim);
    let mut c = C64::new((-alpha.norm_sqr() / 2.0).exp(), 0.0);
    for n in 0..dim {
        amps.push(c);
        c *= alpha / ((n + 1) as f64).sqrt();
    }
    let mut v = FockVector::new(amps)?;
    let captured = v.norm_sqr();
    if renormalize {
        v = v.normalized()?;
    }
    Ok((v, captured))
}

/// The pair `(|+>, |->) = (|0> +- |1>)/sqrt(2)` embedded in dimension `dim`.
pub fn plus_minus_states(dim: usize) -> Result<(FockVector, FockVector)> {
    if dim < 2 {
        return Err(Error::InvalidInput(format!(
            "superposition states need dimension >= 2, got {dim}"
        )));
    }
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let mut plus = vec![C64::new(0.0, 0.0); dim];
    let mut minus = plus.clone();
    plus[0] = C64::new(h, 0.0);
    plus[1] = C64::new(h, 0.0);
    minus[0] = C64::new(h, 0.0);
    minus[1] = C64::new(-h, 0.0);
    Ok((FockVector::new(plus)?, FockVector::new(minus)?))
}

/// Annihilation operator truncated to `dim` levels: `<n-1|a|n> = sqrt(n)`.
pub fn annihilation_matrix(dim: usize) -> Result<FockOperator> {
    check_dim(dim)?;
    FockOperator::from_fn(dim, |i, j| {
        if j == i + 1 { C64::new((j as f64).sqrt(), 0.0) } else { C64::new(0.0, 0.0) }
    })
}

/// Exponential of the truncated displacement generator at exactly `dim`
/// levels.
///
/// The generator `beta a^dag - beta* a` is anti-Hermitian, so the result is
/// unitary at this dimension, but edge matrix elements differ from the
/// infinite-dimensional operator. Use [`displacement_matrix`] when accurate
/// matrix elements are needed.
pub fn displacement_matrix_truncated(beta: C64, dim: usize) -> Result<FockOperator> {
    check_dim(dim)?;
    if !beta.re.is_finite() || !beta.im.is_finite() {
        return Err(Error::InvalidInput("displacement amplitude must be finite".into()));
    }
    let a = annihilation_matrix(dim)?;
    // K = beta a^dag - beta* a; H = -iK is Hermitian, so e^K = V e^{i L} V^dag.
    let k = a.adjoint().scaled(beta).sub(&a.scaled(beta.conj()));
    let h = k.scaled(C64::new(0.0, -1.0)).symmetrized();
    let eig = hermitian_eig(&h)?;
    Ok(eig.map(|x| C64::new(0.0, x).exp()))
}

/// Displacement operator `D(beta)` cropped to `dim` levels.
///
/// Exponentiates at the guard dimension and keeps the top-left block, so
/// the retained entries agree with the exact infinite-dimensional matrix
/// elements for moderate `|beta|`.
pub fn displacement_matrix(beta: C64, dim: usize) -> Result<FockOperator> {
    check_dim(dim)?;
    let full = displacement_matrix_truncated(beta, guard_dim(dim))?;
    full.crop(dim)
}
