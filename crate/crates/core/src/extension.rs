//! Poisson and Cauchy extensions into the unit disk, gradients, Möbius maps
//! and dilation.
//!
//! Band-limited data extend as finite series. Piecewise-constant data use
//! the closed form of the Poisson integral of an arc: for a cell `[a, b]`,
//! the harmonic measure at `z` is
//! `ω(z) = (b − a)/2π + (A(b) − A(a))/π` with `A(t) = arg(1 − z e^{−it})`,
//! the real part of the analytic function
//! `H(z) = (b − a)/2π − (i/π)(L(b) − L(a))`, `L(t) = log(1 − z e^{−it})`.

use std::f64::consts::{PI, TAU};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::circfun::{CircleFun, Repr};
use crate::diskpoly::harmonic_monomial;
use crate::error::{invalid, Error, Result};
use crate::opalg::{ComplexMatrix, PsdMatrix};

/// Largest admissible modulus of an evaluation point.
pub const DISK_CAP: f64 = 1.0 - 1e-12;

/// A point of the open unit disk with `|z| ≤ 1 − 1e-12`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiskPoint(Complex64);

impl DiskPoint {
    pub fn new(z: Complex64) -> Result<Self> {
        if !(z.norm() <= DISK_CAP) {
            return Err(invalid("z", format!("|z| = {} exceeds the disk cap", z.norm())));
        }
        Ok(DiskPoint(z))
    }

    pub fn from_polar(r: f64, theta: f64) -> Result<Self> {
        DiskPoint::new(Complex64::from_polar(r, theta))
    }

    pub fn origin() -> Self {
        DiskPoint(Complex64::new(0.0, 0.0))
    }

    pub fn z(self) -> Complex64 {
        self.0
    }

    pub fn norm(self) -> f64 {
        self.0.norm()
    }
}

/// `P_z(e^{it}) = (1 − |z|²)/|1 − z̄ e^{it}|²`.
pub fn poisson_kernel(z: DiskPoint, t: f64) -> f64 {
    let z = z.0;
    let d = Complex64::new(1.0, 0.0) - z.conj() * Complex64::from_polar(1.0, t);
    (1.0 - z.norm_sqr()) / d.norm_sqr()
}

fn log_factor(z: Complex64, t: f64) -> Complex64 {
    (Complex64::new(1.0, 0.0) - z * Complex64::from_polar(1.0, -t)).ln()
}

/// Harmonic measure of the cell `[a, b]` seen from `z`.
pub fn cell_harmonic_measure(z: DiskPoint, a: f64, b: f64) -> f64 {
    let z = z.0;
    (b - a) / TAU + (log_factor(z, b).im - log_factor(z, a).im) / PI
}

/// `P[f](z)`.
pub fn poisson_extend(f: &CircleFun, z: DiskPoint) -> ComplexMatrix {
    let mut acc = ComplexMatrix::zeros(f.dim());
    match f.repr() {
        Repr::BandLimited { degree, coeffs } => {
            let d = *degree as i64;
            for (idx, a) in coeffs.iter().enumerate() {
                if !a.is_zero() {
                    acc.axpy(harmonic_monomial(idx as i64 - d, z.0), a);
                }
            }
        }
        Repr::PiecewiseConst { partition, values } => {
            for (k, v) in values.iter().enumerate() {
                let (a, b) = partition.cell(k);
                acc.axpy(Complex64::new(cell_harmonic_measure(z, a, b), 0.0), v);
            }
        }
    }
    acc
}

/// `𝔠(f)(z) = ∫ f(t)/(1 − t̄z) dm(t)`.
pub fn cauchy_integral(f: &CircleFun, z: DiskPoint) -> ComplexMatrix {
    let mut acc = ComplexMatrix::zeros(f.dim());
    match f.repr() {
        Repr::BandLimited { degree, coeffs } => {
            let mut zn = Complex64::new(1.0, 0.0);
            for a in &coeffs[*degree..] {
                acc.axpy(zn, a);
                zn *= z.0;
            }
        }
        Repr::PiecewiseConst { partition, values } => {
            let i = Complex64::new(0.0, 1.0);
            for (k, v) in values.iter().enumerate() {
                let (a, b) = partition.cell(k);
                let w = ((b - a) - i * (log_factor(z.0, b) - log_factor(z.0, a))) / TAU;
                acc.axpy(w, v);
            }
        }
    }
    acc
}

/// Boundary values of the Cauchy integral: the analytic projection.
/// Band-limited only, since the projection of a step function is not a
/// finite series.
pub fn analytic_projection(f: &CircleFun) -> Result<CircleFun> {
    let n = f
        .degree()
        .ok_or_else(|| Error::Unsupported("analytic projection of piecewise data".into()))?
        as i64;
    let modes: Vec<(i64, ComplexMatrix)> = (0..=n).map(|k| (k, f.coeff(k).unwrap())).collect();
    CircleFun::from_modes(f.dim(), &modes)
}

/// Real partial derivatives `(∂f/∂x, ∂f/∂y)` of the harmonic extension.
pub fn gradient(f: &CircleFun, z: DiskPoint) -> (ComplexMatrix, ComplexMatrix) {
    let dim = f.dim();
    let mut dx = ComplexMatrix::zeros(dim);
    let mut dy = ComplexMatrix::zeros(dim);
    match f.repr() {
        Repr::BandLimited { .. } => {
            let (p, q) = wirtinger(f, z);
            dx += &p;
            dx += &q;
            dy = (&p - &q).scale(Complex64::new(0.0, 1.0));
        }
        Repr::PiecewiseConst { partition, values } => {
            // H' = (i/π)[1/(e^{ib} − z) − 1/(e^{ia} − z)]; ∂x ω = Re H', ∂y ω = −Im H'.
            let q = |t: f64| 1.0 / (Complex64::from_polar(1.0, t) - z.0);
            let i_pi = Complex64::new(0.0, 1.0 / PI);
            for (k, v) in values.iter().enumerate() {
                let (a, b) = partition.cell(k);
                let h = i_pi * (q(b) - q(a));
                dx.axpy(Complex64::new(h.re, 0.0), v);
                dy.axpy(Complex64::new(-h.im, 0.0), v);
            }
        }
    }
    (dx, dy)
}

/// `(∂f/∂z, ∂f/∂z̄)` of the harmonic extension.
pub fn wirtinger(f: &CircleFun, z: DiskPoint) -> (ComplexMatrix, ComplexMatrix) {
    match f.repr() {
        Repr::BandLimited { degree, .. } => {
            let dim = f.dim();
            let mut p = ComplexMatrix::zeros(dim);
            let mut q = ComplexMatrix::zeros(dim);
            let mut zn = Complex64::new(1.0, 0.0);
            let zbar = z.0.conj();
            let mut zbn = Complex64::new(1.0, 0.0);
            for n in 1..=*degree as i64 {
                let nf = n as f64;
                p.axpy(zn * nf, &f.coeff(n).unwrap());
                q.axpy(zbn * nf, &f.coeff(-n).unwrap());
                zn *= z.0;
                zbn *= zbar;
            }
            (p, q)
        }
        Repr::PiecewiseConst { .. } => {
            let (dx, dy) = gradient(f, z);
            let mi = Complex64::new(0.0, -1.0);
            let mut p = dx.clone();
            p.axpy(mi, &dy);
            let mut q = dx;
            q.axpy(-mi, &dy);
            (p.scale_real(0.5), q.scale_real(0.5))
        }
    }
}

/// `|∇f(z)|² = |∂f/∂x|² + |∂f/∂y|²`.
pub fn grad_sq(f: &CircleFun, z: DiskPoint) -> PsdMatrix {
    let (dx, dy) = gradient(f, z);
    let mut acc = dx.ad_mul(&dx);
    acc.add_ad_mul(Complex64::new(1.0, 0.0), &dy, &dy);
    PsdMatrix::from_gram(acc)
}

/// `2|f'(z)|²` for analytic `f`.
pub fn grad_sq_analytic(f: &CircleFun, z: DiskPoint) -> Result<PsdMatrix> {
    if !f.is_analytic() {
        return Err(Error::Unsupported("function has negative modes".into()));
    }
    let (p, _) = wirtinger(f, z);
    Ok(PsdMatrix::from_gram(p.ad_mul(&p).scale_real(2.0)))
}

/// Disk automorphism `ψ(z) = e^{iθ}(z − z₀)/(1 − z̄₀z)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Mobius {
    pub rotation: f64,
    pub base: Complex64,
}

impl Mobius {
    pub fn new(rotation: f64, base: Complex64) -> Result<Self> {
        if !(base.norm() < 1.0) || !rotation.is_finite() {
            return Err(invalid("base", format!("|z0| = {} must be below 1", base.norm())));
        }
        Ok(Mobius { rotation, base })
    }

    pub fn identity() -> Self {
        Mobius {
            rotation: 0.0,
            base: Complex64::new(0.0, 0.0),
        }
    }

    /// `ψ(z)` for any `z` with `1 − z̄₀z ≠ 0`, including boundary points.
    pub fn map(&self, z: Complex64) -> Complex64 {
        let num = z - self.base;
        let den = Complex64::new(1.0, 0.0) - self.base.conj() * z;
        Complex64::from_polar(1.0, self.rotation) * num / den
    }

    pub fn apply(&self, z: DiskPoint) -> Result<DiskPoint> {
        let w = self.map(z.0);
        // Rounding can push images of points near the cap just past it.
        let n = w.norm();
        if n > DISK_CAP {
            return DiskPoint::new(w * (DISK_CAP / n));
        }
        DiskPoint::new(w)
    }

    /// Boundary map `θ ↦ arg ψ(e^{iθ})`.
    pub fn boundary(&self, theta: f64) -> f64 {
        self.map(Complex64::from_polar(1.0, theta)).arg()
    }

    pub fn inverse(&self) -> Mobius {
        Mobius {
            rotation: -self.rotation,
            base: -self.base * Complex64::from_polar(1.0, self.rotation),
        }
    }
}

/// Boundary values of `z ↦ P[f](γz)`, i.e. coefficients `a_n γ^{|n|}`.
pub fn dilate(f: &CircleFun, gamma: f64) -> Result<CircleFun> {
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(invalid("gamma", format!("must lie in (0, 1), got {gamma}")));
    }
    let Repr::BandLimited { degree, coeffs } = f.repr() else {
        return Err(Error::Unsupported(
            "dilation of piecewise-constant data is not a finite representation".into(),
        ));
    };
    let d = *degree as i64;
    let coeffs = coeffs
        .iter()
        .enumerate()
        .map(|(idx, a)| a.scale_real(gamma.powi((idx as i64 - d).unsigned_abs() as i32)))
        .collect();
    CircleFun::band_limited(f.dim(), coeffs)
}

/// `∫ f* f P_w dm`, exact for both representations: band-limited data
/// through the autocorrelation `f*f = Σ_j R_j e^{ijθ}`, whose Poisson
/// integral is `Σ_j R_j h_j(w)`.
pub fn poisson_second_moment(f: &CircleFun, w: DiskPoint) -> ComplexMatrix {
    match f.repr() {
        Repr::BandLimited { .. } => {
            let r = f.autocorrelation().unwrap();
            second_moment_from_autocorrelation(&r, w)
        }
        Repr::PiecewiseConst { partition, values } => {
            let mut acc = ComplexMatrix::zeros(f.dim());
            for (k, v) in values.iter().enumerate() {
                let (a, b) = partition.cell(k);
                acc.add_ad_mul(Complex64::new(cell_harmonic_measure(w, a, b), 0.0), v, v);
            }
            acc.hermitian_part()
        }
    }
}

pub(crate) fn second_moment_from_autocorrelation(r: &[ComplexMatrix], w: DiskPoint) -> ComplexMatrix {
    let n2 = (r.len() as i64 - 1) / 2;
    let mut acc = ComplexMatrix::zeros(r[0].dim());
    for (idx, rj) in r.iter().enumerate() {
        acc.axpy(harmonic_monomial(idx as i64 - n2, w.0), rj);
    }
    acc.hermitian_part()
}

/// `∫ |f − f(w)|² P_w dm = ∫ f* f P_w dm − f(w)* f(w)` (PSD).
pub fn poisson_oscillation(f: &CircleFun, w: DiskPoint) -> PsdMatrix {
    let fw = poisson_extend(f, w);
    match f.repr() {
        Repr::BandLimited { .. } => {
            PsdMatrix::from_gram(&poisson_second_moment(f, w) - &fw.ad_mul(&fw))
        }
        Repr::PiecewiseConst { partition, values } => {
            // Centered form avoids cancellation.
            let mut acc = ComplexMatrix::zeros(f.dim());
            for (k, v) in values.iter().enumerate() {
                let (a, b) = partition.cell(k);
                let dv = v - &fw;
                acc.add_ad_mul(Complex64::new(cell_harmonic_measure(w, a, b), 0.0), &dv, &dv);
            }
            PsdMatrix::from_gram(acc)
        }
    }
}
