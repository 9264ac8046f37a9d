//! Matrix-valued functions on the unit circle with exact integration.
//!
//! Two representations are supported, both closed under the integrals the
//! rest of the crate needs:
//!
//! * band-limited: `f(θ) = Σ_{|n| ≤ N} a_n e^{inθ}`,
//! * piecewise constant on a finite partition of the circle into cells.
//!
//! Angles are radians; the measure `m` is normalized, `dm = dθ / 2π`.

use std::f64::consts::{PI, TAU};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::opalg::{psd_sqrt, schatten_norm_psd, ComplexMatrix, PsdMatrix};
use crate::quadrature::gauss_legendre_on;

/// Tolerance on the total angular measure of a partition.
pub const PARTITION_TOLERANCE: f64 = 1e-12;
const MERGE_TOLERANCE: f64 = 1e-13;

/// `∫_{c-h}^{c+h} e^{inθ} dθ/2π`.
fn exp_interval_integral(n: i64, center: f64, half: f64) -> Complex64 {
    if n == 0 {
        return Complex64::new(half / PI, 0.0);
    }
    let nf = n as f64;
    Complex64::from_polar((nf * half).sin() / (nf * PI), nf * center)
}

/// A partition of the circle into half-open cells `[b_k, b_{k+1})`, with
/// `b_K = b_0 + 2π`. `b_0 ∈ [0, 2π)`; breakpoints strictly increase.
#[derive(Clone, Debug, PartialEq)]
pub struct Partition {
    breaks: Vec<f64>,
}

impl Partition {
    pub fn new(breaks: Vec<f64>) -> Result<Self> {
        if breaks.is_empty() {
            return Err(Error::InvalidRepresentation("partition has no cells".into()));
        }
        if breaks.iter().any(|b| !b.is_finite()) {
            return Err(Error::InvalidRepresentation("non-finite breakpoint".into()));
        }
        if !(0.0..TAU).contains(&breaks[0]) {
            return Err(Error::InvalidRepresentation(format!(
                "first breakpoint {} outside [0, 2π)",
                breaks[0]
            )));
        }
        if breaks.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidRepresentation("breakpoints must strictly increase".into()));
        }
        if *breaks.last().unwrap() >= breaks[0] + TAU {
            return Err(Error::InvalidRepresentation("breakpoints span more than one turn".into()));
        }
        Ok(Partition { breaks })
    }

    /// The trivial partition with a single cell.
    pub fn full() -> Self {
        Partition { breaks: vec![0.0] }
    }

    /// Uniform partition into `n` cells starting at angle 0.
    pub fn uniform(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(invalid("n", "need at least one cell"));
        }
        Partition::new((0..n).map(|k| TAU * k as f64 / n as f64).collect())
    }

    /// Builds a partition from explicit `[start, end)` cells listed in
    /// counterclockwise order. Cells must be contiguous (modulo 2π) and cover
    /// the circle within [`PARTITION_TOLERANCE`].
    pub fn from_cells(cells: &[[f64; 2]]) -> Result<Self> {
        if cells.is_empty() {
            return Err(Error::InvalidRepresentation("partition has no cells".into()));
        }
        let mut breaks = Vec::with_capacity(cells.len());
        let mut total = 0.0;
        let mut prev_end = f64::NAN;
        for (k, &[start, end]) in cells.iter().enumerate() {
            let len = end - start;
            if !(len > 0.0) || !len.is_finite() {
                return Err(Error::InvalidRepresentation(format!("cell {k} has length {len}")));
            }
            total += len;
            let b = if k == 0 {
                start.rem_euclid(TAU).min(TAU.next_down())
            } else {
                let prev: f64 = breaks[k - 1];
                let shift = ((prev - start) / TAU).ceil();
                let mut b = start + shift * TAU;
                if b < prev {
                    b += TAU;
                }
                let gap = (prev_end - start).rem_euclid(TAU);
                let gap = gap.min(TAU - gap);
                if gap > PARTITION_TOLERANCE {
                    return Err(Error::InvalidRepresentation(format!(
                        "cell {k} does not start where cell {} ends",
                        k - 1
                    )));
                }
                b
            };
            breaks.push(b);
            prev_end = end;
        }
        if (total - TAU).abs() > PARTITION_TOLERANCE {
            return Err(Error::InvalidRepresentation(format!(
                "cells cover {total} radians, expected 2π"
            )));
        }
        Partition::new(breaks)
    }

    pub fn len(&self) -> usize {
        self.breaks.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn breaks(&self) -> &[f64] {
        &self.breaks
    }

    /// Cell `k` as `[start, end)` with `end - start > 0`.
    pub fn cell(&self, k: usize) -> (f64, f64) {
        let start = self.breaks[k];
        let end = if k + 1 < self.breaks.len() {
            self.breaks[k + 1]
        } else {
            self.breaks[0] + TAU
        };
        (start, end)
    }

    pub fn cells(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        (0..self.len()).map(|k| self.cell(k))
    }

    /// Normalized measure of cell `k`.
    pub fn cell_measure(&self, k: usize) -> f64 {
        let (a, b) = self.cell(k);
        (b - a) / TAU
    }

    /// Index of the cell containing `theta` (cells are left-closed).
    pub fn locate(&self, theta: f64) -> usize {
        let b0 = self.breaks[0];
        let mut x = (theta - b0).rem_euclid(TAU) + b0;
        if x >= b0 + TAU {
            x -= TAU;
        }
        self.breaks.partition_point(|&b| b <= x).max(1) - 1
    }

    /// Common refinement with the given extra breakpoints.
    pub fn refine(&self, extra: &[f64]) -> Partition {
        let mut all: Vec<f64> = self
            .breaks
            .iter()
            .chain(extra.iter())
            .map(|b| {
                let r = b.rem_euclid(TAU);
                if r >= TAU {
                    0.0
                } else {
                    r
                }
            })
            .collect();
        all.sort_by(f64::total_cmp);
        let mut merged: Vec<f64> = Vec::with_capacity(all.len());
        for b in all {
            match merged.last() {
                Some(&last) if b - last <= MERGE_TOLERANCE => {}
                _ => merged.push(b),
            }
        }
        if merged.len() > 1 && merged[0] + TAU - merged[merged.len() - 1] <= MERGE_TOLERANCE {
            merged.pop();
        }
        Partition { breaks: merged }
    }

    pub fn merge(&self, other: &Partition) -> Partition {
        self.refine(&other.breaks)
    }

    /// Length (radians) of the overlap of cell `k` with `[alpha, beta]`,
    /// `beta - alpha ≤ 2π`, counted periodically.
    pub fn cell_overlap(&self, k: usize, alpha: f64, beta: f64) -> f64 {
        let (a, b) = self.cell(k);
        interval_overlap(a, b, alpha, beta)
    }
}

/// Overlap length of `[a, b)` (with `b - a ≤ 2π`) and the periodic interval
/// `[alpha, beta]` (with `beta - alpha ≤ 2π`).
pub(crate) fn interval_overlap(a: f64, b: f64, alpha: f64, beta: f64) -> f64 {
    let shift = ((a - alpha) / TAU).floor() * TAU;
    let (alpha, beta) = (alpha + shift, beta + shift);
    let mut total = 0.0;
    for m in -1..=1 {
        let off = m as f64 * TAU;
        let lo = a.max(alpha + off);
        let hi = b.min(beta + off);
        if hi > lo {
            total += hi - lo;
        }
    }
    total.min(b - a)
}

/// A boundary arc `I(t₀, δ) = {t : |t − t₀| < δ}` with chordal distance.
///
/// The angular half-width is `2 arcsin(δ/2)`; `δ ≥ 2` is the whole circle.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Arc {
    pub center: f64,
    pub radius: f64,
}

impl Arc {
    pub fn new(center: f64, radius: f64) -> Result<Self> {
        if !center.is_finite() {
            return Err(invalid("center", "must be finite"));
        }
        if !(radius > 0.0) || !radius.is_finite() {
            return Err(invalid("radius", format!("chordal radius must be positive, got {radius}")));
        }
        Ok(Arc {
            center: center.rem_euclid(TAU),
            radius,
        })
    }

    pub fn full() -> Self {
        Arc {
            center: 0.0,
            radius: 2.0,
        }
    }

    /// Arc with the given angular half-width `h ∈ (0, π]`.
    pub fn from_half_width(center: f64, half_width: f64) -> Result<Self> {
        if !(half_width > 0.0 && half_width <= PI) {
            return Err(invalid("half_width", format!("must lie in (0, π], got {half_width}")));
        }
        let radius = if half_width >= PI {
            2.0
        } else {
            2.0 * (half_width / 2.0).sin()
        };
        Arc::new(center, radius)
    }

    /// Angular interval `[α, β]` spanned by the arc.
    pub fn from_interval(alpha: f64, beta: f64) -> Result<Self> {
        Arc::from_half_width(0.5 * (alpha + beta), 0.5 * (beta - alpha))
    }

    pub fn is_full(&self) -> bool {
        self.radius >= 2.0
    }

    pub fn half_width(&self) -> f64 {
        if self.is_full() {
            PI
        } else {
            2.0 * (self.radius / 2.0).asin()
        }
    }

    /// Normalized measure `m(I)`.
    pub fn measure(&self) -> f64 {
        self.half_width() / PI
    }

    pub fn bounds(&self) -> (f64, f64) {
        let h = self.half_width();
        (self.center - h, self.center + h)
    }

    /// Chordal membership test.
    pub fn contains_angle(&self, theta: f64) -> bool {
        let d = (Complex64::from_polar(1.0, theta) - Complex64::from_polar(1.0, self.center)).norm();
        self.is_full() || d < self.radius
    }
}

/// Underlying representation of a [`CircleFun`].
#[derive(Clone, Debug, PartialEq)]
pub enum Repr {
    /// `coeffs[n + degree]` is the coefficient of `e^{inθ}`.
    BandLimited { degree: usize, coeffs: Vec<ComplexMatrix> },
    PiecewiseConst { partition: Partition, values: Vec<ComplexMatrix> },
}

/// A `d x d` matrix-valued function on the circle.
#[derive(Clone, Debug, PartialEq)]
pub struct CircleFun {
    dim: usize,
    repr: Repr,
}

impl CircleFun {
    pub fn band_limited(dim: usize, coeffs: Vec<ComplexMatrix>) -> Result<Self> {
        if coeffs.len() % 2 == 0 {
            return Err(Error::InvalidRepresentation(format!(
                "band-limited function needs 2N+1 coefficients, got {}",
                coeffs.len()
            )));
        }
        check_dims(dim, &coeffs)?;
        let degree = (coeffs.len() - 1) / 2;
        Ok(CircleFun {
            dim,
            repr: Repr::BandLimited { degree, coeffs },
        })
    }

    /// Band-limited function from `(n, a_n)` pairs; repeated modes add up.
    pub fn from_modes(dim: usize, modes: &[(i64, ComplexMatrix)]) -> Result<Self> {
        let degree = modes.iter().map(|(n, _)| n.unsigned_abs() as usize).max().unwrap_or(0);
        let mut coeffs = vec![ComplexMatrix::zeros(dim); 2 * degree + 1];
        for (n, a) in modes {
            if a.dim() != dim {
                return Err(Error::DimensionMismatch { left: dim, right: a.dim() });
            }
            coeffs[(*n + degree as i64) as usize] += a;
        }
        CircleFun::band_limited(dim, coeffs)
    }

    pub fn monomial(n: i64, a: ComplexMatrix) -> Self {
        let dim = a.dim();
        CircleFun::from_modes(dim, &[(n, a)]).expect("single mode is always valid")
    }

    pub fn constant(c: ComplexMatrix) -> Self {
        CircleFun::monomial(0, c)
    }

    pub fn zero(dim: usize) -> Self {
        CircleFun::constant(ComplexMatrix::zeros(dim))
    }

    pub fn piecewise(partition: Partition, values: Vec<ComplexMatrix>) -> Result<Self> {
        if values.len() != partition.len() {
            return Err(Error::InvalidRepresentation(format!(
                "{} cells but {} values",
                partition.len(),
                values.len()
            )));
        }
        let dim = values[0].dim();
        check_dims(dim, &values)?;
        Ok(CircleFun {
            dim,
            repr: Repr::PiecewiseConst { partition, values },
        })
    }

    /// `value` on the angular interval `[alpha, beta)`, zero elsewhere.
    pub fn indicator(alpha: f64, beta: f64, value: ComplexMatrix) -> Result<Self> {
        let len = beta - alpha;
        if !(len > 0.0 && len <= TAU) {
            return Err(invalid("interval", format!("length {len} outside (0, 2π]")));
        }
        let dim = value.dim();
        if len >= TAU - MERGE_TOLERANCE {
            return CircleFun::piecewise(Partition::full(), vec![value]);
        }
        let p = Partition { breaks: Vec::new() }.refine(&[alpha, beta]);
        let values = p
            .cells()
            .map(|(a, b)| {
                let m = 0.5 * (a + b);
                if (m - alpha).rem_euclid(TAU) < len {
                    value.clone()
                } else {
                    ComplexMatrix::zeros(dim)
                }
            })
            .collect();
        CircleFun::piecewise(p, values)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn repr(&self) -> &Repr {
        &self.repr
    }

    pub fn is_band_limited(&self) -> bool {
        matches!(self.repr, Repr::BandLimited { .. })
    }

    pub fn is_piecewise(&self) -> bool {
        matches!(self.repr, Repr::PiecewiseConst { .. })
    }

    pub fn degree(&self) -> Option<usize> {
        match &self.repr {
            Repr::BandLimited { degree, .. } => Some(*degree),
            Repr::PiecewiseConst { .. } => None,
        }
    }

    /// Coefficient of `e^{inθ}` for band-limited functions (zero outside the band).
    pub fn coeff(&self, n: i64) -> Option<ComplexMatrix> {
        match &self.repr {
            Repr::BandLimited { degree, coeffs } => {
                let d = *degree as i64;
                if n.abs() > d {
                    Some(ComplexMatrix::zeros(self.dim))
                } else {
                    Some(coeffs[(n + d) as usize].clone())
                }
            }
            Repr::PiecewiseConst { .. } => None,
        }
    }

    /// Analytic means the Poisson extension is a power series in `z`:
    /// band-limited with no negative modes, or a constant.
    pub fn is_analytic(&self) -> bool {
        match &self.repr {
            Repr::BandLimited { degree, coeffs } => coeffs[..*degree].iter().all(|a| a.is_zero()),
            Repr::PiecewiseConst { values, .. } => values.windows(2).all(|w| w[0] == w[1]),
        }
    }

    /// Exact Fourier coefficient `∫ f e^{-inθ} dm`.
    pub fn fourier_coeff(&self, n: i64) -> ComplexMatrix {
        match &self.repr {
            Repr::BandLimited { .. } => self.coeff(n).unwrap(),
            Repr::PiecewiseConst { partition, values } => {
                let mut acc = ComplexMatrix::zeros(self.dim);
                for (k, v) in values.iter().enumerate() {
                    let (a, b) = partition.cell(k);
                    let w = exp_interval_integral(-n, 0.5 * (a + b), 0.5 * (b - a));
                    acc.axpy(w, v);
                }
                acc
            }
        }
    }

    /// `∫ f dm`.
    pub fn mean(&self) -> ComplexMatrix {
        self.fourier_coeff(0)
    }

    pub fn eval(&self, theta: f64) -> ComplexMatrix {
        match &self.repr {
            Repr::BandLimited { degree, coeffs } => {
                let mut acc = ComplexMatrix::zeros(self.dim);
                let d = *degree as i64;
                for (idx, a) in coeffs.iter().enumerate() {
                    let n = idx as i64 - d;
                    acc.axpy(Complex64::from_polar(1.0, n as f64 * theta), a);
                }
                acc
            }
            Repr::PiecewiseConst { partition, values } => values[partition.locate(theta)].clone(),
        }
    }

    /// Pointwise adjoint `t ↦ f(t)*`.
    pub fn adjoint(&self) -> CircleFun {
        match &self.repr {
            Repr::BandLimited { degree, coeffs } => CircleFun {
                dim: self.dim,
                repr: Repr::BandLimited {
                    degree: *degree,
                    coeffs: coeffs.iter().rev().map(|a| a.adjoint()).collect(),
                },
            },
            Repr::PiecewiseConst { partition, values } => CircleFun {
                dim: self.dim,
                repr: Repr::PiecewiseConst {
                    partition: partition.clone(),
                    values: values.iter().map(|v| v.adjoint()).collect(),
                },
            },
        }
    }

    fn map_values(&self, f: impl Fn(&ComplexMatrix) -> ComplexMatrix) -> CircleFun {
        let repr = match &self.repr {
            Repr::BandLimited { degree, coeffs } => Repr::BandLimited {
                degree: *degree,
                coeffs: coeffs.iter().map(&f).collect(),
            },
            Repr::PiecewiseConst { partition, values } => Repr::PiecewiseConst {
                partition: partition.clone(),
                values: values.iter().map(&f).collect(),
            },
        };
        let dim = match &repr {
            Repr::BandLimited { coeffs, .. } => coeffs[0].dim(),
            Repr::PiecewiseConst { values, .. } => values[0].dim(),
        };
        CircleFun { dim, repr }
    }

    pub fn scale(&self, factor: Complex64) -> CircleFun {
        self.map_values(|a| a.scale(factor))
    }

    pub fn scale_real(&self, factor: f64) -> CircleFun {
        self.scale(Complex64::new(factor, 0.0))
    }

    /// `t ↦ m f(t)`.
    pub fn left_mul(&self, m: &ComplexMatrix) -> Result<CircleFun> {
        if m.dim() != self.dim {
            return Err(Error::DimensionMismatch { left: m.dim(), right: self.dim });
        }
        Ok(self.map_values(|a| m * a))
    }

    /// `t ↦ f(t) m`.
    pub fn right_mul(&self, m: &ComplexMatrix) -> Result<CircleFun> {
        if m.dim() != self.dim {
            return Err(Error::DimensionMismatch { left: self.dim, right: m.dim() });
        }
        Ok(self.map_values(|a| a * m))
    }

    /// Piecewise-constant function re-expressed on a finer partition.
    pub fn refined(&self, partition: &Partition) -> Result<CircleFun> {
        match &self.repr {
            Repr::PiecewiseConst { .. } => {
                let values = partition
                    .cells()
                    .map(|(a, b)| self.eval(0.5 * (a + b)))
                    .collect();
                CircleFun::piecewise(partition.clone(), values)
            }
            Repr::BandLimited { .. } => Err(Error::Unsupported(
                "band-limited functions have no partition".into(),
            )),
        }
    }

    pub fn add(&self, other: &CircleFun) -> Result<CircleFun> {
        self.combine(other, Complex64::new(1.0, 0.0))
    }

    pub fn sub(&self, other: &CircleFun) -> Result<CircleFun> {
        self.combine(other, Complex64::new(-1.0, 0.0))
    }

    /// `self + factor · other`.
    pub fn combine(&self, other: &CircleFun, factor: Complex64) -> Result<CircleFun> {
        if self.dim != other.dim {
            return Err(Error::DimensionMismatch { left: self.dim, right: other.dim });
        }
        match (&self.repr, &other.repr) {
            (Repr::BandLimited { degree: n1, .. }, Repr::BandLimited { degree: n2, .. }) => {
                let n = (*n1).max(*n2) as i64;
                let coeffs = (-n..=n)
                    .map(|k| {
                        let mut a = self.coeff(k).unwrap();
                        a.axpy(factor, &other.coeff(k).unwrap());
                        a
                    })
                    .collect();
                CircleFun::band_limited(self.dim, coeffs)
            }
            (Repr::PiecewiseConst { partition: p1, .. }, Repr::PiecewiseConst { partition: p2, .. }) => {
                let p = p1.merge(p2);
                let values = p
                    .cells()
                    .map(|(a, b)| {
                        let m = 0.5 * (a + b);
                        let mut v = self.eval(m);
                        v.axpy(factor, &other.eval(m));
                        v
                    })
                    .collect();
                CircleFun::piecewise(p, values)
            }
            _ => Err(Error::Unsupported(
                "sums of band-limited and piecewise-constant functions are not representable".into(),
            )),
        }
    }

    /// `f − ∫ f dm`.
    pub fn mean_removed(&self) -> CircleFun {
        let m = self.mean();
        self.map_constant_shift(&m)
    }

    /// `f − c` for a constant matrix `c`.
    pub fn map_constant_shift(&self, c: &ComplexMatrix) -> CircleFun {
        match &self.repr {
            Repr::BandLimited { degree, coeffs } => {
                let mut coeffs = coeffs.clone();
                coeffs[*degree] -= c;
                CircleFun {
                    dim: self.dim,
                    repr: Repr::BandLimited { degree: *degree, coeffs },
                }
            }
            Repr::PiecewiseConst { .. } => self.map_values(|v| v - c),
        }
    }

    /// Autocorrelation `R_j = Σ_m a_m* a_{m+j}` for `j = −2N..=2N`, so that
    /// `f(θ)* f(θ) = Σ_j R_j e^{ijθ}`. Band-limited only.
    pub fn autocorrelation(&self) -> Option<Vec<ComplexMatrix>> {
        let Repr::BandLimited { degree, coeffs } = &self.repr else {
            return None;
        };
        let n = *degree as i64;
        let one = Complex64::new(1.0, 0.0);
        let mut out = Vec::with_capacity((4 * n + 1) as usize);
        for j in -2 * n..=2 * n {
            let mut acc = ComplexMatrix::zeros(self.dim);
            for m in (-n).max(-n - j)..=n.min(n - j) {
                acc.add_ad_mul(one, &coeffs[(m + n) as usize], &coeffs[(m + j + n) as usize]);
            }
            out.push(acc);
        }
        Some(out)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&FunctionDoc::from(self)).expect("function documents serialize")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: FunctionDoc =
            serde_json::from_str(text).map_err(|e| Error::Serialization(e.to_string()))?;
        doc.try_into()
    }
}

fn check_dims(dim: usize, mats: &[ComplexMatrix]) -> Result<()> {
    if dim == 0 {
        return Err(invalid("dim", "dimension must be positive"));
    }
    if mats.is_empty() {
        return Err(Error::InvalidRepresentation("no matrices supplied".into()));
    }
    if let Some(bad) = mats.iter().find(|m| m.dim() != dim) {
        return Err(Error::DimensionMismatch { left: dim, right: bad.dim() });
    }
    Ok(())
}

/// `∫_α^β f dθ/2π` for `0 ≤ β − α ≤ 2π`.
pub fn integrate_interval(f: &CircleFun, alpha: f64, beta: f64) -> ComplexMatrix {
    match &f.repr {
        Repr::BandLimited { degree, coeffs } => {
            let c = 0.5 * (alpha + beta);
            let h = 0.5 * (beta - alpha);
            let d = *degree as i64;
            let mut acc = ComplexMatrix::zeros(f.dim);
            for (idx, a) in coeffs.iter().enumerate() {
                acc.axpy(exp_interval_integral(idx as i64 - d, c, h), a);
            }
            acc
        }
        Repr::PiecewiseConst { partition, values } => {
            let mut acc = ComplexMatrix::zeros(f.dim);
            for (k, v) in values.iter().enumerate() {
                let len = partition.cell_overlap(k, alpha, beta);
                if len > 0.0 {
                    acc.axpy(Complex64::new(len / TAU, 0.0), v);
                }
            }
            acc
        }
    }
}

/// Mean value `f_I = (1/|I|) ∫_I f dm`.
pub fn arc_mean(f: &CircleFun, arc: &Arc) -> Result<ComplexMatrix> {
    let m = arc.measure();
    if !(m > 0.0) {
        return Err(Error::ZeroMeasureArc);
    }
    let (a, b) = arc.bounds();
    Ok(integrate_interval(f, a, b).scale_real(1.0 / m))
}

/// `∫_I f* f dm`.
pub fn arc_second_moment(f: &CircleFun, arc: &Arc) -> ComplexMatrix {
    let (alpha, beta) = arc.bounds();
    match &f.repr {
        Repr::BandLimited { .. } => {
            let r = f.autocorrelation().unwrap();
            second_moment_from_autocorrelation(&r, arc)
        }
        Repr::PiecewiseConst { partition, values } => {
            let mut acc = ComplexMatrix::zeros(f.dim);
            for (k, v) in values.iter().enumerate() {
                let len = partition.cell_overlap(k, alpha, beta);
                if len > 0.0 {
                    acc.add_ad_mul(Complex64::new(len / TAU, 0.0), v, v);
                }
            }
            acc.hermitian_part()
        }
    }
}

pub(crate) fn second_moment_from_autocorrelation(r: &[ComplexMatrix], arc: &Arc) -> ComplexMatrix {
    let n2 = (r.len() as i64 - 1) / 2;
    let h = arc.half_width();
    let mut acc = ComplexMatrix::zeros(r[0].dim());
    for (idx, rj) in r.iter().enumerate() {
        acc.axpy(exp_interval_integral(idx as i64 - n2, arc.center, h), rj);
    }
    acc.hermitian_part()
}

/// Mean oscillation matrix `(1/|I|) ∫_I |f − f_I|² dm` (PSD).
pub fn arc_oscillation(f: &CircleFun, arc: &Arc) -> Result<PsdMatrix> {
    let r = f.autocorrelation();
    arc_oscillation_cached(f, arc, r.as_deref())
}

/// As [`arc_oscillation`], reusing a precomputed autocorrelation for
/// band-limited `f`.
pub(crate) fn arc_oscillation_cached(
    f: &CircleFun,
    arc: &Arc,
    autocorr: Option<&[ComplexMatrix]>,
) -> Result<PsdMatrix> {
    let m = arc.measure();
    if !(m > 0.0) {
        return Err(Error::ZeroMeasureArc);
    }
    let mean = arc_mean(f, arc)?;
    match &f.repr {
        Repr::BandLimited { .. } => {
            let second = match autocorr {
                Some(r) => second_moment_from_autocorrelation(r, arc),
                None => arc_second_moment(f, arc),
            };
            let second = second.scale_real(1.0 / m);
            let osc = &second - &mean.ad_mul(&mean);
            if osc.max_abs_entry() > 1e-6 * second.max_abs_entry() {
                return Ok(PsdMatrix::from_gram(osc));
            }
            // Cancellation: redo in centered form. The integrand is a
            // trigonometric polynomial of degree 2N, which this many
            // Gauss-Legendre nodes resolve on any arc.
            let nodes = 4 * f.degree().unwrap() + 24;
            let (alpha, beta) = arc.bounds();
            let mut acc = ComplexMatrix::zeros(f.dim);
            for (t, w) in gauss_legendre_on(nodes, alpha, beta) {
                let g = &f.eval(t) - &mean;
                acc.add_ad_mul(Complex64::new(w / (beta - alpha), 0.0), &g, &g);
            }
            Ok(PsdMatrix::from_gram(acc))
        }
        Repr::PiecewiseConst { partition, values } => {
            let (alpha, beta) = arc.bounds();
            let mut acc = ComplexMatrix::zeros(f.dim);
            for (k, v) in values.iter().enumerate() {
                let len = partition.cell_overlap(k, alpha, beta);
                if len > 0.0 {
                    let dv = v - &mean;
                    acc.add_ad_mul(Complex64::new(len / TAU / m, 0.0), &dv, &dv);
                }
            }
            Ok(PsdMatrix::from_gram(acc))
        }
    }
}

/// `⟨f, g⟩ = ∫ f* g dm`, computed exactly for every pair of representations.
pub fn l2_pairing(f: &CircleFun, g: &CircleFun) -> Result<ComplexMatrix> {
    if f.dim != g.dim {
        return Err(Error::DimensionMismatch { left: f.dim, right: g.dim });
    }
    let one = Complex64::new(1.0, 0.0);
    let mut acc = ComplexMatrix::zeros(f.dim);
    match (&f.repr, &g.repr) {
        (Repr::PiecewiseConst { partition: p1, .. }, Repr::PiecewiseConst { partition: p2, .. }) => {
            let p = p1.merge(p2);
            for k in 0..p.len() {
                let (a, b) = p.cell(k);
                let m = 0.5 * (a + b);
                acc.add_ad_mul(Complex64::new((b - a) / TAU, 0.0), &f.eval(m), &g.eval(m));
            }
        }
        _ => {
            // At least one side is band-limited, so Parseval over its band is exact.
            let band = [f.degree(), g.degree()]
                .into_iter()
                .flatten()
                .min()
                .unwrap() as i64;
            for n in -band..=band {
                acc.add_ad_mul(one, &f.fourier_coeff(n), &g.fourier_coeff(n));
            }
        }
    }
    Ok(acc)
}

/// `‖f‖_{L^p_c} = ‖(∫ |f|² dm)^{1/2}‖_p`.
pub fn lp_c_norm(f: &CircleFun, p: f64) -> Result<f64> {
    let gram = l2_pairing(f, f)?;
    schatten_norm_psd(&psd_sqrt(&gram)?, p)
}

/// `‖f‖_{L^p_r} = ‖f*‖_{L^p_c}`.
pub fn lp_r_norm(f: &CircleFun, p: f64) -> Result<f64> {
    lp_c_norm(&f.adjoint(), p)
}

/// Scalar function `t ↦ τ(m f(t))` (`m = I` when omitted), in the same
/// representation class.
pub fn trace_function(f: &CircleFun, m: Option<&ComplexMatrix>) -> Result<CircleFun> {
    if let Some(m) = m {
        if m.dim() != f.dim {
            return Err(Error::DimensionMismatch { left: m.dim(), right: f.dim });
        }
    }
    let tr = |a: &ComplexMatrix| {
        let t = match m {
            Some(m) => (m * a).trace(),
            None => a.trace(),
        };
        ComplexMatrix::scalar(t)
    };
    Ok(f.map_values(tr))
}

// Serialization --------------------------------------------------------------

/// Matrix as rows of `[re, im]` pairs.
pub type MatrixDoc = Vec<Vec<[f64; 2]>>;

pub fn matrix_to_doc(m: &ComplexMatrix) -> MatrixDoc {
    m.to_rows()
        .into_iter()
        .map(|row| row.into_iter().map(|z| [z.re, z.im]).collect())
        .collect()
}

pub fn matrix_from_doc(doc: &MatrixDoc) -> Result<ComplexMatrix> {
    let rows: Vec<Vec<Complex64>> = doc
        .iter()
        .map(|row| row.iter().map(|&[re, im]| Complex64::new(re, im)).collect())
        .collect();
    ComplexMatrix::from_rows(&rows)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ReprDoc {
    BandLimited { degree: usize, coeffs: Vec<MatrixDoc> },
    PiecewiseConst { cells: Vec<[f64; 2]>, values: Vec<MatrixDoc> },
}

/// On-disk form of a [`CircleFun`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FunctionDoc {
    pub dim: usize,
    #[serde(flatten)]
    pub repr: ReprDoc,
}

impl From<&CircleFun> for FunctionDoc {
    fn from(f: &CircleFun) -> Self {
        let repr = match &f.repr {
            Repr::BandLimited { degree, coeffs } => ReprDoc::BandLimited {
                degree: *degree,
                coeffs: coeffs.iter().map(matrix_to_doc).collect(),
            },
            Repr::PiecewiseConst { partition, values } => ReprDoc::PiecewiseConst {
                cells: partition.cells().map(|(a, b)| [a, b]).collect(),
                values: values.iter().map(matrix_to_doc).collect(),
            },
        };
        FunctionDoc { dim: f.dim, repr }
    }
}

impl TryFrom<FunctionDoc> for CircleFun {
    type Error = Error;

    fn try_from(doc: FunctionDoc) -> Result<Self> {
        let f = match &doc.repr {
            ReprDoc::BandLimited { degree, coeffs } => {
                if coeffs.len() != 2 * degree + 1 {
                    return Err(Error::InvalidRepresentation(format!(
                        "degree {degree} needs {} coefficients, got {}",
                        2 * degree + 1,
                        coeffs.len()
                    )));
                }
                let coeffs = coeffs.iter().map(matrix_from_doc).collect::<Result<Vec<_>>>()?;
                CircleFun::band_limited(doc.dim, coeffs)?
            }
            ReprDoc::PiecewiseConst { cells, values } => {
                let partition = Partition::from_cells(cells)?;
                let values = values.iter().map(matrix_from_doc).collect::<Result<Vec<_>>>()?;
                CircleFun::piecewise(partition, values)?
            }
        };
        if f.dim != doc.dim {
            return Err(Error::DimensionMismatch { left: doc.dim, right: f.dim });
        }
        Ok(f)
    }
}
