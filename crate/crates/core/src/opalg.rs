//! Finite-dimensional operator algebra: `d x d` complex matrices with the
//! standard trace, the modulus `|x| = (x* x)^{1/2}`, PSD square roots and
//! Schatten norms.
//!
//! Every spectral quantity goes through one primitive, the Hermitian
//! eigendecomposition. Eigenvalues in `[-1e-10 (1 + |X|), 0)` are clamped to
//! zero; anything more negative is a [`Error::NotPsd`].

use std::fmt;
use std::ops::{Add, AddAssign, Mul, Neg, Sub, SubAssign};

use nalgebra::{DMatrix, SymmetricEigen, SVD};
use num_complex::Complex64;

use crate::error::{invalid, Error, Result};

/// Relative tolerance for accepting a matrix as PSD (and for clamping).
pub const PSD_TOLERANCE: f64 = 1e-10;
/// Relative tolerance for the Hermitian flag.
pub const HERMITIAN_TOLERANCE: f64 = 1e-12;

const EIG_EPS: f64 = 1e-15;
const EIG_MAX_ITER: usize = 10_000;

#[derive(Clone, PartialEq)]
pub struct ComplexMatrix(DMatrix<Complex64>);

impl fmt::Debug for ComplexMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ComplexMatrix{:?}", self.to_rows())
    }
}

impl ComplexMatrix {
    pub fn zeros(dim: usize) -> Self {
        ComplexMatrix(DMatrix::zeros(dim, dim))
    }

    pub fn identity(dim: usize) -> Self {
        ComplexMatrix(DMatrix::identity(dim, dim))
    }

    pub fn scalar(value: Complex64) -> Self {
        ComplexMatrix(DMatrix::from_element(1, 1, value))
    }

    pub fn from_fn(dim: usize, mut f: impl FnMut(usize, usize) -> Complex64) -> Self {
        ComplexMatrix(DMatrix::from_fn(dim, dim, |i, j| f(i, j)))
    }

    /// Builds a matrix from row slices; every row must have `rows.len()` entries.
    pub fn from_rows(rows: &[Vec<Complex64>]) -> Result<Self> {
        let dim = rows.len();
        if dim == 0 {
            return Err(invalid("rows", "matrix must have at least one row"));
        }
        if let Some(bad) = rows.iter().find(|r| r.len() != dim) {
            return Err(Error::DimensionMismatch {
                left: dim,
                right: bad.len(),
            });
        }
        Ok(Self::from_fn(dim, |i, j| rows[i][j]))
    }

    pub fn from_real_rows(rows: &[&[f64]]) -> Result<Self> {
        let rows: Vec<Vec<Complex64>> = rows
            .iter()
            .map(|r| r.iter().map(|&x| Complex64::new(x, 0.0)).collect())
            .collect();
        Self::from_rows(&rows)
    }

    pub fn diag(entries: &[Complex64]) -> Self {
        Self::from_fn(entries.len(), |i, j| {
            if i == j {
                entries[i]
            } else {
                Complex64::new(0.0, 0.0)
            }
        })
    }

    pub fn real_diag(entries: &[f64]) -> Self {
        let c: Vec<Complex64> = entries.iter().map(|&x| Complex64::new(x, 0.0)).collect();
        Self::diag(&c)
    }

    pub fn from_nalgebra(m: DMatrix<Complex64>) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::DimensionMismatch {
                left: m.nrows(),
                right: m.ncols(),
            });
        }
        Ok(ComplexMatrix(m))
    }

    pub fn as_nalgebra(&self) -> &DMatrix<Complex64> {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.0[(i, j)]
    }

    pub fn set(&mut self, i: usize, j: usize, value: Complex64) {
        self.0[(i, j)] = value;
    }

    pub fn to_rows(&self) -> Vec<Vec<Complex64>> {
        (0..self.dim())
            .map(|i| (0..self.dim()).map(|j| self.0[(i, j)]).collect())
            .collect()
    }

    pub fn adjoint(&self) -> Self {
        ComplexMatrix(self.0.adjoint())
    }

    /// `self* · other`, without materializing the adjoint.
    pub fn ad_mul(&self, other: &ComplexMatrix) -> Self {
        ComplexMatrix(self.0.ad_mul(&other.0))
    }

    /// `self += factor · (a* b)`.
    pub fn add_ad_mul(&mut self, factor: Complex64, a: &ComplexMatrix, b: &ComplexMatrix) {
        self.0.gemm_ad(factor, &a.0, &b.0, Complex64::new(1.0, 0.0));
    }

    /// `self += factor · other`.
    pub fn axpy(&mut self, factor: Complex64, other: &ComplexMatrix) {
        for (a, b) in self.0.iter_mut().zip(other.0.iter()) {
            *a += factor * b;
        }
    }

    pub fn scale(&self, factor: Complex64) -> Self {
        ComplexMatrix(&self.0 * factor)
    }

    pub fn scale_real(&self, factor: f64) -> Self {
        self.scale(Complex64::new(factor, 0.0))
    }

    pub fn trace(&self) -> Complex64 {
        self.0.trace()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.0.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn max_abs_entry(&self) -> f64 {
        self.0.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|z| *z == Complex64::new(0.0, 0.0))
    }

    pub fn hermitian_part(&self) -> Self {
        ComplexMatrix((&self.0 + self.0.adjoint()) * Complex64::new(0.5, 0.0))
    }

    pub fn is_hermitian(&self) -> bool {
        let scale = self.op_norm();
        let skew = ComplexMatrix(&self.0 - self.0.adjoint()).op_norm();
        skew <= HERMITIAN_TOLERANCE * scale.max(f64::MIN_POSITIVE) || skew == 0.0
    }

    /// Singular values in nonincreasing order.
    pub fn singular_values(&self) -> Result<Vec<f64>> {
        let svd = SVD::try_new(self.0.clone(), false, false, EIG_EPS, EIG_MAX_ITER).ok_or_else(
            || Error::Numeric {
                context: "singular value decomposition",
                report: self.condition_report(),
            },
        )?;
        let mut s: Vec<f64> = svd.singular_values.iter().copied().collect();
        s.sort_by(|a, b| b.total_cmp(a));
        Ok(s)
    }

    /// Largest singular value. Falls back to the Frobenius norm, an upper
    /// bound, only if the SVD does not converge.
    pub fn op_norm(&self) -> f64 {
        match self.singular_values() {
            Ok(s) => s.first().copied().unwrap_or(0.0),
            Err(_) => self.frobenius_norm(),
        }
    }

    /// Eigendecomposition of the Hermitian part: eigenvalues ascending, with
    /// the matching eigenvectors as columns.
    pub fn eigh(&self) -> Result<(Vec<f64>, DMatrix<Complex64>)> {
        let h = self.hermitian_part();
        let eig = SymmetricEigen::try_new(h.0, EIG_EPS, EIG_MAX_ITER).ok_or_else(|| {
            Error::Numeric {
                context: "hermitian eigendecomposition",
                report: self.condition_report(),
            }
        })?;
        let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
        let vectors = DMatrix::from_fn(self.dim(), self.dim(), |i, j| {
            eig.eigenvectors[(i, order[j])]
        });
        Ok((values, vectors))
    }

    /// Eigenvalues of the Hermitian part, ascending.
    pub fn eigenvalues_h(&self) -> Result<Vec<f64>> {
        Ok(self.eigh()?.0)
    }

    /// Applies `g` to the spectrum of the Hermitian part.
    pub fn hermitian_function(&self, g: impl Fn(f64) -> f64) -> Result<Self> {
        let (values, vectors) = self.eigh()?;
        let d = self.dim();
        let mut out = DMatrix::<Complex64>::zeros(d, d);
        for (k, &lambda) in values.iter().enumerate() {
            let gk = g(lambda);
            if gk == 0.0 {
                continue;
            }
            let col = vectors.column(k);
            for i in 0..d {
                let ci = col[i] * gk;
                for j in 0..d {
                    out[(i, j)] += ci * col[j].conj();
                }
            }
        }
        Ok(ComplexMatrix(out))
    }

    fn condition_report(&self) -> String {
        let finite = self.0.iter().all(|z| z.re.is_finite() && z.im.is_finite());
        format!(
            "dim={}, frobenius={:e}, max|entry|={:e}, finite={}",
            self.dim(),
            self.frobenius_norm(),
            self.max_abs_entry(),
            finite
        )
    }
}

impl Add for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn add(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        ComplexMatrix(&self.0 + &rhs.0)
    }
}

impl Sub for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn sub(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        ComplexMatrix(&self.0 - &rhs.0)
    }
}

impl Mul for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn mul(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        ComplexMatrix(&self.0 * &rhs.0)
    }
}

impl Neg for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn neg(self) -> ComplexMatrix {
        ComplexMatrix(-&self.0)
    }
}

impl AddAssign<&ComplexMatrix> for ComplexMatrix {
    fn add_assign(&mut self, rhs: &ComplexMatrix) {
        self.0 += &rhs.0;
    }
}

impl SubAssign<&ComplexMatrix> for ComplexMatrix {
    fn sub_assign(&mut self, rhs: &ComplexMatrix) {
        self.0 -= &rhs.0;
    }
}

/// A Hermitian positive semidefinite matrix (up to [`PSD_TOLERANCE`]).
#[derive(Clone, Debug, PartialEq)]
pub struct PsdMatrix(ComplexMatrix);

impl PsdMatrix {
    /// Validates `m`: it is Hermitized and its minimum eigenvalue checked
    /// against `-1e-10 (1 + |m|)`.
    pub fn new(m: ComplexMatrix) -> Result<Self> {
        let h = m.hermitian_part();
        let values = h.eigenvalues_h()?;
        check_psd_spectrum(&values)?;
        Ok(PsdMatrix(h))
    }

    /// Wraps a matrix that is PSD by construction (sums of `x* x`). Only the
    /// Hermitian part is kept.
    pub(crate) fn from_gram(m: ComplexMatrix) -> Self {
        PsdMatrix(m.hermitian_part())
    }

    pub fn zeros(dim: usize) -> Self {
        PsdMatrix(ComplexMatrix::zeros(dim))
    }

    pub fn identity(dim: usize) -> Self {
        PsdMatrix(ComplexMatrix::identity(dim))
    }

    pub fn dim(&self) -> usize {
        self.0.dim()
    }

    pub fn as_matrix(&self) -> &ComplexMatrix {
        &self.0
    }

    pub fn into_matrix(self) -> ComplexMatrix {
        self.0
    }

    /// Real trace (the imaginary part of a Hermitian trace is rounding).
    pub fn trace(&self) -> f64 {
        self.0.trace().re
    }

    pub fn min_eigenvalue(&self) -> Result<f64> {
        Ok(self.0.eigenvalues_h()?.first().copied().unwrap_or(0.0))
    }

    /// Operator norm, i.e. the largest eigenvalue clamped at zero.
    pub fn op_norm(&self) -> f64 {
        match self.0.eigenvalues_h() {
            Ok(v) => v.last().copied().unwrap_or(0.0).max(0.0),
            Err(_) => self.0.op_norm(),
        }
    }

    pub fn sqrt(&self) -> Result<PsdMatrix> {
        psd_sqrt(&self.0)
    }

    pub fn add(&self, other: &PsdMatrix) -> PsdMatrix {
        PsdMatrix(&self.0 + &other.0)
    }

    pub fn scale(&self, factor: f64) -> Result<PsdMatrix> {
        if factor < 0.0 {
            return Err(invalid("factor", "PSD matrices only scale by nonnegative reals"));
        }
        Ok(PsdMatrix(self.0.scale_real(factor)))
    }
}

fn psd_tolerance(values: &[f64]) -> f64 {
    let norm = values.iter().map(|v| v.abs()).fold(0.0, f64::max);
    PSD_TOLERANCE * (1.0 + norm)
}

fn check_psd_spectrum(values: &[f64]) -> Result<()> {
    let tol = psd_tolerance(values);
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    if min < -tol {
        return Err(Error::NotPsd {
            min_eigenvalue: min,
            tolerance: tol,
        });
    }
    Ok(())
}

/// PSD square root via the Hermitian eigendecomposition; slightly negative
/// eigenvalues (within tolerance) are clamped to zero.
pub fn psd_sqrt(x: &ComplexMatrix) -> Result<PsdMatrix> {
    let (values, _) = x.eigh()?;
    check_psd_spectrum(&values)?;
    let root = x.hermitian_function(|l| l.max(0.0).sqrt())?;
    Ok(PsdMatrix(root.hermitian_part()))
}

/// `|x| = (x* x)^{1/2}`.
pub fn modulus(x: &ComplexMatrix) -> Result<PsdMatrix> {
    psd_sqrt(&x.ad_mul(x))
}

/// `|x|_p = (Tr |x|^p)^{1/p}` for finite `p > 0`; the operator norm for
/// `p = f64::INFINITY`.
pub fn schatten_norm(x: &ComplexMatrix, p: f64) -> Result<f64> {
    if !(p > 0.0) {
        return Err(invalid("p", format!("Schatten exponent must be positive, got {p}")));
    }
    let s = x.singular_values()?;
    Ok(schatten_from_singular_values(&s, p))
}

/// Schatten norm of a PSD matrix from its eigenvalues (cheaper than an SVD).
pub fn schatten_norm_psd(x: &PsdMatrix, p: f64) -> Result<f64> {
    if !(p > 0.0) {
        return Err(invalid("p", format!("Schatten exponent must be positive, got {p}")));
    }
    let s: Vec<f64> = x.0.eigenvalues_h()?.into_iter().map(|l| l.max(0.0)).collect();
    Ok(schatten_from_singular_values(&s, p))
}

fn schatten_from_singular_values(s: &[f64], p: f64) -> f64 {
    if p.is_infinite() {
        return s.iter().copied().fold(0.0, f64::max);
    }
    let max = s.iter().copied().fold(0.0, f64::max);
    if max == 0.0 {
        return 0.0;
    }
    // Scale by the largest value so small p does not underflow.
    let sum: f64 = s.iter().map(|&v| (v / max).powf(p)).sum();
    max * sum.powf(1.0 / p)
}
