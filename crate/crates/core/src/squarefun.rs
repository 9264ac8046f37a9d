//! Lusin area functions over Stolz cones and Littlewood–Paley g-functions.
//!
//! The cone `Γ_α(t)` meets the circle of radius `r` in the angular interval
//! `|φ − t| < β(r)` with `cos β = (1 + r² − α²(1−r)²)/(2r)`; for
//! `r ≤ (α−1)/(α+1)` the whole circle is inside. The quadrature integrates
//! over that exact interval on each ring instead of masking a tensor grid:
//!
//! * band-limited data: `|∇f|²` restricted to a ring is a trigonometric
//!   polynomial, so the angular integral is exact and `A(t)²` is itself a
//!   trigonometric polynomial in `t`;
//! * piecewise-constant data: `∇f = (i/π) Σ_j J_j (1/(e^{ib_j} − z))`
//!   (real and imaginary parts) with jumps `J_j` at the breakpoints `b_j`,
//!   integrated with Gauss–Legendre nodes across each angular window.
//!
//! Rings stop at `1 − ε_bnd`; the discarded cap is bounded and reported.

use std::f64::consts::{PI, TAU};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::circfun::{CircleFun, Repr};
use crate::diskpoly::DiskPoly;
use crate::error::{invalid, Error, Result};
use crate::extension::{gradient, DiskPoint};
use crate::opalg::{schatten_norm, ComplexMatrix, PsdMatrix};
use crate::quadrature::{gauss_legendre, gauss_legendre_on};

/// Default aperture.
pub const DEFAULT_ALPHA: f64 = 2.0;

/// Truncated Stolz cone `{z : |e^{it} − z| < α(1 − |z|), |z| < δ}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Cone {
    pub alpha: f64,
    pub vertex: f64,
    pub delta: f64,
}

impl Cone {
    pub fn new(alpha: f64, vertex: f64, delta: f64) -> Result<Self> {
        check_alpha(alpha)?;
        check_delta(delta)?;
        Ok(Cone { alpha, vertex, delta })
    }

    pub fn contains(&self, z: Complex64) -> bool {
        let r = z.norm();
        r < self.delta && (Complex64::from_polar(1.0, self.vertex) - z).norm() < self.alpha * (1.0 - r)
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 1.0) || !alpha.is_finite() {
        return Err(invalid("alpha", format!("aperture must exceed 1, got {alpha}")));
    }
    Ok(())
}

fn check_delta(delta: f64) -> Result<()> {
    if !(delta > 0.0 && delta <= 1.0) {
        return Err(invalid("delta", format!("must lie in (0, 1], got {delta}")));
    }
    Ok(())
}

/// Radius below which `Γ_α(t)` contains the whole circle `|z| = r`.
pub fn full_ring_radius(alpha: f64) -> f64 {
    (alpha - 1.0) / (alpha + 1.0)
}

/// Angular half-width `β(r)` of the cone's cross-section at radius `r`.
pub fn cone_half_width(alpha: f64, r: f64) -> f64 {
    if r <= full_ring_radius(alpha) {
        return PI;
    }
    // 1 − cos β and 1 + cos β in cancellation-free form.
    let s = 1.0 - r;
    let one_minus = (alpha * alpha - 1.0) * s * s;
    let one_plus = (1.0 + r) * (1.0 + r) - alpha * alpha * s * s;
    if one_plus <= 0.0 {
        return PI;
    }
    2.0 * (one_minus / one_plus).sqrt().atan()
}

/// Quadrature parameters for cone integrals.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ConeConfig {
    /// Gauss–Legendre nodes per radial segment.
    pub radial_nodes: usize,
    /// Gauss–Legendre nodes across each angular window (piecewise data).
    pub angular_nodes: usize,
    /// Trapezoid nodes on full rings (piecewise data).
    pub ring_nodes: usize,
    /// Rings stop at `1 − eps_bnd`.
    pub eps_bnd: f64,
    /// Fewest radial nodes accepted once the cone narrows past `r₀`.
    pub min_nodes: usize,
}

impl Default for ConeConfig {
    fn default() -> Self {
        ConeConfig {
            radial_nodes: 12,
            angular_nodes: 24,
            ring_nodes: 64,
            eps_bnd: 1e-4,
            min_nodes: 24,
        }
    }
}

impl ConeConfig {
    pub fn refined(&self) -> ConeConfig {
        ConeConfig {
            radial_nodes: 2 * self.radial_nodes,
            angular_nodes: 2 * self.angular_nodes,
            ring_nodes: 2 * self.ring_nodes,
            eps_bnd: 0.5 * self.eps_bnd,
            min_nodes: self.min_nodes,
        }
    }
}

/// One radial node: radius, weight for `r dr`, angular half-width.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Ring {
    pub r: f64,
    pub weight: f64,
    pub half_width: f64,
}

/// Radial rule adapted to a truncated cone: full rings on `[0, r₀]`, a
/// square-root substitution past `r₀` (where `β` has a square-root
/// singularity) and segments halving their distance to `1 − ε_bnd`.
#[derive(Clone, Debug, PartialEq)]
pub struct ConeRule {
    pub alpha: f64,
    pub delta: f64,
    pub rings: Vec<Ring>,
    /// Area of the discarded part `{1 − ε_bnd ≤ |z| < δ}` of the cone.
    pub cap_area: f64,
}

impl ConeRule {
    pub fn new(alpha: f64, delta: f64, config: &ConeConfig) -> Result<Self> {
        check_alpha(alpha)?;
        check_delta(delta)?;
        if !(config.eps_bnd > 0.0 && config.eps_bnd < 0.5) || config.radial_nodes == 0 {
            return Err(invalid("cone config", "eps_bnd must lie in (0, 1/2) and node counts be positive"));
        }
        let r0 = full_ring_radius(alpha);
        let top = delta.min(1.0 - config.eps_bnd);
        let n = config.radial_nodes;
        let mut rings = Vec::new();
        let mut push = |r: f64, w: f64| {
            rings.push(Ring {
                r,
                weight: w * r,
                half_width: cone_half_width(alpha, r),
            })
        };
        for (r, w) in gauss_legendre_on(n, 0.0, r0.min(top)) {
            push(r, w);
        }
        if top > r0 {
            let rs = (r0 + 0.5 * (1.0 - r0)).min(top);
            for (s, w) in gauss_legendre_on(n, 0.0, 1.0) {
                push(r0 + (rs - r0) * s * s, w * 2.0 * (rs - r0) * s);
            }
            let mut lo = rs;
            while top - lo > 1e-15 {
                let mut hi = (1.0 - 0.5 * (1.0 - lo)).min(top);
                if top - hi < 1e-3 * (top - lo) {
                    hi = top;
                }
                for (r, w) in gauss_legendre_on(n, lo, hi) {
                    push(r, w);
                }
                lo = hi;
            }
        }
        // Below r0 the rings are full circles and Gauss-Legendre alone is accurate.
        if top > r0 && rings.len() < config.min_nodes {
            return Err(Error::UnderResolved {
                nodes: rings.len(),
                floor: config.min_nodes,
            });
        }
        let cap_area = if delta > 1.0 - config.eps_bnd {
            gauss_legendre_on(16, 1.0 - config.eps_bnd, delta)
                .into_iter()
                .map(|(r, w)| w * r * 2.0 * cone_half_width(alpha, r))
                .sum()
        } else {
            0.0
        };
        Ok(ConeRule {
            alpha,
            delta,
            rings,
            cap_area,
        })
    }

    pub fn node_count(&self) -> usize {
        self.rings.len()
    }

    /// Euclidean area of the truncated cone covered by the rule.
    pub fn area(&self) -> f64 {
        self.rings.iter().map(|g| 2.0 * g.half_width * g.weight).sum()
    }
}

/// `t ↦ A_c(f, α)(t)²` for a fixed function, aperture and truncation.
#[derive(Clone, Debug)]
pub struct AreaFunction {
    dim: usize,
    kind: AreaKind,
    cap_bound: f64,
    rule_nodes: usize,
}

#[derive(Clone, Debug)]
enum AreaKind {
    /// `A(t)² = Σ_k M_k e^{ikt}`, indexed by `k + deg`.
    Fourier { deg: usize, moments: Vec<ComplexMatrix> },
    /// `A(t)² = full + Σ_{jk} J_j* J_k S_jk(t)`.
    Jumps {
        breaks: Vec<f64>,
        jumps: Vec<ComplexMatrix>,
        full: ComplexMatrix,
        windows: Vec<Ring>,
        angular: (Vec<f64>, Vec<f64>),
    },
}

impl AreaFunction {
    pub fn new(f: &CircleFun, alpha: f64, delta: f64, config: &ConeConfig) -> Result<Self> {
        let rule = ConeRule::new(alpha, delta, config)?;
        let dim = f.dim();
        match f.repr() {
            Repr::BandLimited { .. } => {
                let poly = DiskPoly::grad_sq(f)?;
                let deg = poly.degree();
                let mut moments = vec![ComplexMatrix::zeros(dim); 2 * deg + 1];
                for ring in &rule.rings {
                    let g = ring.half_width;
                    for (idx, gk) in poly.ring_coefficients(ring.r).iter().enumerate() {
                        if gk.is_zero() {
                            continue;
                        }
                        let k = idx as f64 - deg as f64;
                        let window = if k == 0.0 { 2.0 * g } else { 2.0 * (k * g).sin() / k };
                        moments[idx].axpy(Complex64::new(ring.weight * window, 0.0), gk);
                    }
                }
                // |∇f|² is a polynomial, so its sup on the closed disk is at most
                // the sum of coefficient norms.
                let bound: f64 = (0..=deg)
                    .flat_map(|p| (0..=deg).map(move |q| (p, q)))
                    .map(|(p, q)| poly.coeff(p, q).op_norm())
                    .sum();
                Ok(AreaFunction {
                    dim,
                    kind: AreaKind::Fourier { deg, moments },
                    cap_bound: bound * rule.cap_area,
                    rule_nodes: rule.node_count(),
                })
            }
            Repr::PiecewiseConst { partition, values } => {
                let k = values.len();
                let breaks = partition.breaks().to_vec();
                let jumps: Vec<ComplexMatrix> = (0..k)
                    .map(|j| &values[(j + k - 1) % k] - &values[j])
                    .collect();
                let r0 = full_ring_radius(alpha);
                let mut full = ComplexMatrix::zeros(dim);
                let mut windows = Vec::new();
                for ring in &rule.rings {
                    if ring.r <= r0 {
                        let m = config.ring_nodes;
                        for j in 0..m {
                            let z = DiskPoint::from_polar(ring.r, TAU * j as f64 / m as f64)?;
                            let (dx, dy) = gradient(f, z);
                            let w = Complex64::new(ring.weight * TAU / m as f64, 0.0);
                            full.add_ad_mul(w, &dx, &dx);
                            full.add_ad_mul(w, &dy, &dy);
                        }
                    } else {
                        windows.push(*ring);
                    }
                }
                Ok(AreaFunction {
                    dim,
                    kind: AreaKind::Jumps {
                        breaks,
                        jumps,
                        full,
                        windows,
                        angular: gauss_legendre(config.angular_nodes),
                    },
                    // The gradient of step data is unbounded at the breakpoints;
                    // no uniform cap bound exists.
                    cap_bound: if rule.cap_area > 0.0 { f64::INFINITY } else { 0.0 },
                    rule_nodes: rule.node_count(),
                })
            }
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Upper bound on the contribution of the discarded boundary cap.
    pub fn cap_bound(&self) -> f64 {
        self.cap_bound
    }

    pub fn node_count(&self) -> usize {
        self.rule_nodes
    }

    /// `A_c(f)(t)² = ∫_{Γ_α(t), |z|<δ} |∇f|² dx dy`.
    pub fn squared(&self, t: f64) -> PsdMatrix {
        match &self.kind {
            AreaKind::Fourier { deg, moments } => {
                let mut acc = ComplexMatrix::zeros(self.dim);
                for (idx, m) in moments.iter().enumerate() {
                    if !m.is_zero() {
                        let k = idx as f64 - *deg as f64;
                        acc.axpy(Complex64::from_polar(1.0, k * t), m);
                    }
                }
                PsdMatrix::from_gram(acc)
            }
            AreaKind::Jumps {
                breaks,
                jumps,
                full,
                windows,
                angular,
            } => {
                let k = breaks.len();
                let cells: Vec<Complex64> = breaks.iter().map(|&b| Complex64::from_polar(1.0, b)).collect();
                let mut s = vec![0.0; k * k];
                let mut h = vec![Complex64::new(0.0, 0.0); k];
                for ring in windows {
                    let beta = ring.half_width;
                    for (x, w) in angular.0.iter().zip(&angular.1) {
                        let phi = t + beta * x;
                        let z = Complex64::from_polar(ring.r, phi);
                        let wt = ring.weight * beta * w / (PI * PI);
                        for j in 0..k {
                            // (i/π) factor folded into the weight: |i|² = 1.
                            h[j] = 1.0 / (cells[j] - z);
                        }
                        for a in 0..k {
                            for b in a..k {
                                let v = wt * (h[a].conj() * h[b]).re;
                                s[a * k + b] += v;
                            }
                        }
                    }
                }
                let mut acc = full.clone();
                for a in 0..k {
                    if jumps[a].is_zero() {
                        continue;
                    }
                    for b in a..k {
                        if jumps[b].is_zero() {
                            continue;
                        }
                        let v = s[a * k + b];
                        acc.add_ad_mul(Complex64::new(v, 0.0), &jumps[a], &jumps[b]);
                        if b != a {
                            acc.add_ad_mul(Complex64::new(v, 0.0), &jumps[b], &jumps[a]);
                        }
                    }
                }
                PsdMatrix::from_gram(acc)
            }
        }
    }

    /// `A_c(f)(t)`, the PSD square root of [`Self::squared`].
    pub fn eval(&self, t: f64) -> Result<PsdMatrix> {
        self.squared(t).sqrt()
    }

    /// `∫_T A(t)² dm`. Exact for band-limited data (the zeroth moment).
    pub fn mean_squared(&self, n_t: usize) -> ComplexMatrix {
        match &self.kind {
            AreaKind::Fourier { deg, moments } => moments[*deg].hermitian_part(),
            AreaKind::Jumps { .. } => {
                let mut acc = ComplexMatrix::zeros(self.dim);
                for t in uniform_angles(n_t) {
                    acc += self.squared(t).as_matrix();
                }
                acc.scale_real(1.0 / n_t as f64)
            }
        }
    }
}

/// `n` equally spaced angles starting at 0.
pub fn uniform_angles(n: usize) -> Vec<f64> {
    (0..n).map(|j| TAU * j as f64 / n as f64).collect()
}

/// `A_c(f, α)(t)` truncated at `|z| < δ`, default quadrature.
pub fn area_fun(f: &CircleFun, alpha: f64, t: f64, delta: f64) -> Result<PsdMatrix> {
    AreaFunction::new(f, alpha, delta, &ConeConfig::default())?.eval(t)
}

/// `A_r(f, α) = A_c(f*, α)`.
pub fn area_fun_r(f: &CircleFun, alpha: f64, t: f64, delta: f64) -> Result<PsdMatrix> {
    area_fun(&f.adjoint(), alpha, t, delta)
}

/// `g_c(f)(t)² = ∫_0^δ |∇f(r e^{it})|² (1 − r²) dr`.
pub fn g_fun_squared(f: &CircleFun, t: f64, delta: f64, config: &ConeConfig) -> Result<PsdMatrix> {
    check_delta(delta)?;
    match f.repr() {
        Repr::BandLimited { .. } => Ok(PsdMatrix::from_gram(DiskPoly::grad_sq(f)?.integrate_ray(t, delta))),
        Repr::PiecewiseConst { .. } => {
            let top = delta.min(1.0 - config.eps_bnd);
            let mut acc = ComplexMatrix::zeros(f.dim());
            let mut lo = 0.0;
            while top - lo > 1e-15 {
                let mut hi = if lo < 0.5 { 0.5f64.min(top) } else { (1.0 - 0.5 * (1.0 - lo)).min(top) };
                if top - hi < 1e-3 * (top - lo) {
                    hi = top;
                }
                for (r, w) in gauss_legendre_on(config.radial_nodes, lo, hi) {
                    let g = crate::extension::grad_sq(f, DiskPoint::from_polar(r, t)?);
                    acc.axpy(Complex64::new(w * (1.0 - r * r), 0.0), g.as_matrix());
                }
                lo = hi;
            }
            Ok(PsdMatrix::from_gram(acc))
        }
    }
}

pub fn g_fun(f: &CircleFun, t: f64, delta: f64) -> Result<PsdMatrix> {
    g_fun_squared(f, t, delta, &ConeConfig::default())?.sqrt()
}

/// `g_r(f) = g_c(f*)`.
pub fn g_fun_r(f: &CircleFun, t: f64, delta: f64) -> Result<PsdMatrix> {
    g_fun(&f.adjoint(), t, delta)
}

/// `∫_T τ(F(t)) dm` from samples of a PSD-valued `F` on a uniform grid
/// (periodic trapezoid rule).
pub fn sq_l1_norm(samples: &[PsdMatrix]) -> f64 {
    if samples.is_empty() {
        return 0.0;
    }
    samples.iter().map(|s| s.trace()).sum::<f64>() / samples.len() as f64
}

/// `‖f(0)‖₁ + ‖A_c(f)‖_{L¹}` for analytic `f`, sampling `A_c` at `n_t`
/// uniform angles.
pub fn h1c_area_norm(f: &CircleFun, alpha: f64, n_t: usize, config: &ConeConfig) -> Result<f64> {
    if !f.is_analytic() {
        return Err(Error::Unsupported("the area H¹ norm is defined for analytic functions".into()));
    }
    let area = AreaFunction::new(f, alpha, 1.0, config)?;
    let samples = uniform_angles(n_t)
        .into_iter()
        .map(|t| area.eval(t))
        .collect::<Result<Vec<_>>>()?;
    Ok(schatten_norm(&f.mean(), 1.0)? + sq_l1_norm(&samples))
}

/// As [`h1c_area_norm`] with the g-function in place of the area function.
pub fn h1c_g_norm(f: &CircleFun, n_t: usize, config: &ConeConfig) -> Result<f64> {
    if !f.is_analytic() {
        return Err(Error::Unsupported("the g-function H¹ norm is defined for analytic functions".into()));
    }
    let samples = uniform_angles(n_t)
        .into_iter()
        .map(|t| g_fun_squared(f, t, 1.0, config)?.sqrt())
        .collect::<Result<Vec<_>>>()?;
    Ok(schatten_norm(&f.mean(), 1.0)? + sq_l1_norm(&samples))
}
