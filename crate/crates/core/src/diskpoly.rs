//! Matrix-coefficient polynomials in `z` and `z̄` on the closed disk, with
//! exact integrals against radial weights, the Poisson kernel and the
//! disk Green function.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::circfun::CircleFun;
use crate::error::{Error, Result};
use crate::opalg::ComplexMatrix;

/// Radial weights `ρ(|z|)` with closed-form moments `∫_0^1 r^m ρ(r) dr`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum RadialWeight {
    Unit,
    /// `log(1/r)`
    LogInverse,
    /// `1 − r²`
    OneMinusSquare,
}

impl RadialWeight {
    pub fn moment(self, m: usize) -> f64 {
        let m1 = m as f64 + 1.0;
        match self {
            RadialWeight::Unit => 1.0 / m1,
            RadialWeight::LogInverse => 1.0 / (m1 * m1),
            RadialWeight::OneMinusSquare => 2.0 / (m1 * (m1 + 2.0)),
        }
    }

    pub fn eval(self, r: f64) -> f64 {
        match self {
            RadialWeight::Unit => 1.0,
            RadialWeight::LogInverse => -r.ln(),
            RadialWeight::OneMinusSquare => 1.0 - r * r,
        }
    }
}

/// `Σ_{k ≥ 0} ρ^k / ((s+k+1)(s+k+2))`, summed until the terms stop
/// contributing.
fn mobius_series(s: usize, rho: f64) -> f64 {
    let mut total = 0.0;
    let mut pow = 1.0;
    for k in 0..1_000_000usize {
        let n = (s + k) as f64;
        let term = pow / ((n + 1.0) * (n + 2.0));
        total += term;
        if term <= 1e-18 * total {
            break;
        }
        pow *= rho;
    }
    total
}

/// `Σ_{p,q ≤ deg} C_{pq} z^p z̄^q`, stored densely.
#[derive(Clone, Debug, PartialEq)]
pub struct DiskPoly {
    dim: usize,
    deg: usize,
    coeffs: Vec<ComplexMatrix>,
}

/// `w^k` for `k ≥ 0`, `w̄^{|k|}` otherwise: the harmonic extension of `e^{ikθ}`.
pub fn harmonic_monomial(k: i64, w: Complex64) -> Complex64 {
    if k >= 0 {
        w.powu(k as u32)
    } else {
        w.conj().powu((-k) as u32)
    }
}

impl DiskPoly {
    pub fn zero(dim: usize, deg: usize) -> Self {
        DiskPoly {
            dim,
            deg,
            coeffs: vec![ComplexMatrix::zeros(dim); (deg + 1) * (deg + 1)],
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn degree(&self) -> usize {
        self.deg
    }

    fn idx(&self, p: usize, q: usize) -> usize {
        p * (self.deg + 1) + q
    }

    /// Coefficient of `z^p z̄^q`.
    pub fn coeff(&self, p: usize, q: usize) -> &ComplexMatrix {
        &self.coeffs[self.idx(p, q)]
    }

    pub fn coeff_mut(&mut self, p: usize, q: usize) -> &mut ComplexMatrix {
        let i = self.idx(p, q);
        &mut self.coeffs[i]
    }

    fn terms(&self) -> impl Iterator<Item = (usize, usize, &ComplexMatrix)> {
        let n = self.deg + 1;
        self.coeffs
            .iter()
            .enumerate()
            .filter(|(_, c)| !c.is_zero())
            .map(move |(i, c)| (i / n, i % n, c))
    }

    /// `|∇f|²` of the harmonic extension of a band-limited `f`:
    /// `2(P*P + Q*Q)` with `P = ∂f/∂z` and `Q = ∂f/∂z̄`.
    pub fn grad_sq(f: &CircleFun) -> Result<Self> {
        let n = f
            .degree()
            .ok_or_else(|| Error::Unsupported("gradient polynomial needs a band-limited function".into()))?;
        let dim = f.dim();
        let deg = n.saturating_sub(1);
        let mut out = DiskPoly::zero(dim, deg);
        if n == 0 {
            return Ok(out);
        }
        let p: Vec<ComplexMatrix> = (0..n)
            .map(|k| f.coeff(k as i64 + 1).unwrap().scale_real((k + 1) as f64))
            .collect();
        let q: Vec<ComplexMatrix> = (0..n)
            .map(|k| f.coeff(-(k as i64) - 1).unwrap().scale_real((k + 1) as f64))
            .collect();
        let two = Complex64::new(2.0, 0.0);
        for j in 0..n {
            for k in 0..n {
                // P*P contributes z̄^j z^k, Q*Q contributes z^j z̄^k.
                if !p[j].is_zero() && !p[k].is_zero() {
                    out.coeff_mut(k, j).add_ad_mul(two, &p[j], &p[k]);
                }
                if !q[j].is_zero() && !q[k].is_zero() {
                    out.coeff_mut(j, k).add_ad_mul(two, &q[j], &q[k]);
                }
            }
        }
        Ok(out)
    }

    pub fn eval(&self, z: Complex64) -> ComplexMatrix {
        let zp: Vec<Complex64> = (0..=self.deg).map(|p| z.powu(p as u32)).collect();
        let mut acc = ComplexMatrix::zeros(self.dim);
        for (p, q, c) in self.terms() {
            acc.axpy(zp[p] * zp[q].conj(), c);
        }
        acc
    }

    /// Fourier coefficients in `φ` of `φ ↦ poly(r e^{iφ})`, indexed by
    /// `k + deg` for `k = −deg..=deg`.
    pub fn ring_coefficients(&self, r: f64) -> Vec<ComplexMatrix> {
        let mut out = vec![ComplexMatrix::zeros(self.dim); 2 * self.deg + 1];
        for (p, q, c) in self.terms() {
            let k = p + self.deg - q;
            out[k].axpy(Complex64::new(r.powi((p + q) as i32), 0.0), c);
        }
        out
    }

    /// `∫_D poly(z) ρ(|z|) dx dy`.
    pub fn integrate(&self, weight: RadialWeight) -> ComplexMatrix {
        let mut acc = ComplexMatrix::zeros(self.dim);
        for p in 0..=self.deg {
            let c = self.coeff(p, p);
            if !c.is_zero() {
                acc.axpy(Complex64::new(2.0 * PI * weight.moment(2 * p + 1), 0.0), c);
            }
        }
        acc
    }

    /// `∫_D poly(z) P_w(z) (1 − |z|²) dx dy` with
    /// `P_w(z) = (1 − |w|²)/|1 − w̄z|²`, equivalently the weight
    /// `1 − |φ_w(z)|²` for the automorphism `φ_w(z) = (z − w)/(1 − w̄z)`.
    ///
    /// Expanding `|1 − w̄z|^{-2} = Σ_{j,k} w̄^j w^k z^j z̄^k`, the monomial
    /// `z^p z̄^q` with `s = max(p, q)` integrates to
    /// `(1 − |w|²) h_{p−q}(w) Σ_k π |w|^{2k} / ((s+k+1)(s+k+2))`.
    pub fn integrate_mobius_weight(&self, w: Complex64) -> ComplexMatrix {
        let rho = w.norm_sqr();
        let mut acc = ComplexMatrix::zeros(self.dim);
        let mut series_cache: Vec<Option<f64>> = vec![None; self.deg + 1];
        for (p, q, c) in self.terms() {
            let s = p.max(q);
            let series = *series_cache[s].get_or_insert_with(|| mobius_series(s, rho));
            let e = harmonic_monomial(p as i64 - q as i64, w);
            acc.axpy(e * ((1.0 - rho) * PI * series), c);
        }
        acc
    }

    /// `∫_D poly(z) G(z, w) dx dy` with `G(z, w) = log|(1 − w̄z)/(z − w)|`.
    pub fn integrate_green(&self, w: Complex64) -> ComplexMatrix {
        let mut acc = ComplexMatrix::zeros(self.dim);
        for (p, q, c) in self.terms() {
            let h = harmonic_monomial(p as i64 - q as i64, w);
            let corr = w.powu(p as u32 + 1) * w.conj().powu(q as u32 + 1);
            let factor = 0.5 * PI / ((p + 1) * (q + 1)) as f64;
            acc.axpy((h - corr) * factor, c);
        }
        acc
    }

    /// `∫_0^δ poly(r e^{iθ}) (1 − r²) dr`.
    pub fn integrate_ray(&self, theta: f64, delta: f64) -> ComplexMatrix {
        let mut acc = ComplexMatrix::zeros(self.dim);
        for (p, q, c) in self.terms() {
            let m = (p + q) as i32;
            let radial = delta.powi(m + 1) / (m + 1) as f64 - delta.powi(m + 3) / (m + 3) as f64;
            let phase = Complex64::from_polar(radial, (p as f64 - q as f64) * theta);
            acc.axpy(phase, c);
        }
        acc
    }

    /// Hermitian coefficients `C_{pq}* = C_{qp}` make the polynomial
    /// Hermitian-valued; this reports the worst violation.
    pub fn hermitian_defect(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for p in 0..=self.deg {
            for q in 0..=self.deg {
                let d = (&self.coeff(p, q).adjoint() - self.coeff(q, p)).max_abs_entry();
                worst = worst.max(d);
            }
        }
        worst
    }
}
