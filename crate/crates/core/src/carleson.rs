//! PSD-matrix-valued measures on the disk, Carleson tubes, the Carleson
//! norm and the Poisson functional `N(ν) = sup_z ‖∫ P_z dν‖`.
//!
//! Measures are discrete: quadrature nodes carrying PSD weights. Measures
//! built from gradients live on a polar layout (rings × uniform angles),
//! which turns tube sums into prefix sums and the Poisson functional into
//! cyclic convolutions.

use std::f64::consts::TAU;
use std::sync::Arc as Shared;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::circfun::{matrix_from_doc, matrix_to_doc, CircleFun, MatrixDoc};
use crate::diskpoly::DiskPoly;
use crate::error::{invalid, Error, Result};
use crate::extension::{grad_sq, DiskPoint};
use crate::norms::GridSup;
use crate::opalg::{ComplexMatrix, PsdMatrix};
use crate::quadrature::RadialRule;

/// Rings `radii[i]` times `angles` equispaced angles `(j + 1/2)·2π/angles`;
/// node `i·angles + j`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolarLayout {
    pub radii: Vec<f64>,
    pub angles: usize,
}

impl PolarLayout {
    pub fn angle(&self, j: usize) -> f64 {
        TAU * (j as f64 + 0.5) / self.angles as f64
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct OperatorMeasure {
    dim: usize,
    nodes: Vec<DiskPoint>,
    weights: Vec<PsdMatrix>,
    layout: Option<PolarLayout>,
}

impl OperatorMeasure {
    pub fn new(dim: usize, nodes: Vec<DiskPoint>, weights: Vec<PsdMatrix>) -> Result<Self> {
        if nodes.len() != weights.len() {
            return Err(invalid("weights", "need exactly one weight per node"));
        }
        if let Some(w) = weights.iter().find(|w| w.dim() != dim) {
            return Err(Error::DimensionMismatch { left: dim, right: w.dim() });
        }
        Ok(OperatorMeasure { dim, nodes, weights, layout: None })
    }

    pub fn zero(dim: usize) -> Self {
        OperatorMeasure { dim, nodes: Vec::new(), weights: Vec::new(), layout: None }
    }

    pub fn point_mass(z: DiskPoint, weight: PsdMatrix) -> Self {
        OperatorMeasure {
            dim: weight.dim(),
            nodes: vec![z],
            weights: vec![weight],
            layout: None,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nodes(&self) -> &[DiskPoint] {
        &self.nodes
    }

    pub fn weights(&self) -> &[PsdMatrix] {
        &self.weights
    }

    pub fn layout(&self) -> Option<&PolarLayout> {
        self.layout.as_ref()
    }

    /// `ν(D)`.
    pub fn total_mass(&self) -> ComplexMatrix {
        let mut acc = ComplexMatrix::zeros(self.dim);
        for w in &self.weights {
            acc += w.as_matrix();
        }
        acc
    }

    /// `ν(Î)` by node membership.
    pub fn tube_mass(&self, tube: &Tube) -> ComplexMatrix {
        let mut acc = ComplexMatrix::zeros(self.dim);
        for (z, w) in self.nodes.iter().zip(&self.weights) {
            if tube.contains(*z) {
                acc += w.as_matrix();
            }
        }
        acc
    }
}

/// Carleson tube `Î(t₀, δ) = {r e^{it} : 1 − δ ≤ r < 1, |e^{it} − e^{it₀}| < δ}`;
/// for `δ > 1` the whole disk.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tube {
    pub center: f64,
    pub width: f64,
}

impl Tube {
    pub fn new(center: f64, width: f64) -> Result<Self> {
        if !center.is_finite() || !(width > 0.0) || !width.is_finite() {
            return Err(invalid("tube", format!("need finite center and positive width, got ({center}, {width})")));
        }
        Ok(Tube { center: center.rem_euclid(TAU), width })
    }

    pub fn is_whole_disk(&self) -> bool {
        self.width > 1.0
    }

    /// Angular half-width of the base arc.
    fn half_angle(&self) -> f64 {
        if self.width >= 2.0 {
            std::f64::consts::PI
        } else {
            2.0 * (self.width / 2.0).asin()
        }
    }

    pub fn contains(&self, z: DiskPoint) -> bool {
        if self.is_whole_disk() {
            return true;
        }
        let z = z.z();
        let r = z.norm();
        if r < 1.0 - self.width || r >= 1.0 {
            return false;
        }
        let t = z.arg();
        (Complex64::from_polar(1.0, t) - Complex64::from_polar(1.0, self.center)).norm() < self.width
    }
}

/// Density weight in front of `|∇f|² dx dy`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MeasureWeight {
    /// `1 − |z|²`, giving `ν_f`.
    Poisson,
    /// `log(1/|z|)`, giving `λ_f`.
    Log,
}

impl MeasureWeight {
    fn eval(self, r: f64) -> f64 {
        match self {
            MeasureWeight::Poisson => 1.0 - r * r,
            MeasureWeight::Log => -r.ln(),
        }
    }
}

/// Polar quadrature for gradient measures. Radial segments are graded
/// dyadically toward 0 (down to `2^-(levels_zero+1)`, then one segment to
/// 0) and toward 1 (breaks `1 − 2^-k`), so tubes of dyadic width cut the
/// rule along segment boundaries.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MeasureConfig {
    pub radial_nodes: usize,
    pub levels_zero: usize,
    pub levels_one: usize,
    pub angles: usize,
}

impl Default for MeasureConfig {
    fn default() -> Self {
        MeasureConfig {
            radial_nodes: 8,
            levels_zero: 11,
            levels_one: 12,
            angles: 256,
        }
    }
}

impl MeasureConfig {
    pub fn refined(&self) -> MeasureConfig {
        MeasureConfig {
            radial_nodes: self.radial_nodes + self.radial_nodes / 2,
            levels_zero: self.levels_zero,
            levels_one: self.levels_one + 1,
            angles: 2 * self.angles,
        }
    }

    fn radial_rule(&self) -> RadialRule {
        let mut breaks = vec![0.0];
        breaks.extend(RadialRule::two_sided_breaks(self.levels_zero, self.levels_one));
        breaks.push(1.0);
        RadialRule::composite(&breaks, self.radial_nodes)
    }
}

fn planner_pair(n: usize) -> (Shared<dyn Fft<f64>>, Shared<dyn Fft<f64>>) {
    let mut planner = FftPlanner::new();
    (planner.plan_fft_forward(n), planner.plan_fft_inverse(n))
}

/// Entrywise FFT of a sequence of matrices.
fn fft_matrices(mats: &mut [ComplexMatrix], fft: &dyn Fft<f64>) {
    let Some(d) = mats.first().map(|m| m.dim()) else {
        return;
    };
    let mut buf = vec![Complex64::new(0.0, 0.0); mats.len()];
    for p in 0..d {
        for q in 0..d {
            for (b, m) in buf.iter_mut().zip(mats.iter()) {
                *b = m.get(p, q);
            }
            fft.process(&mut buf);
            for (b, m) in buf.iter().zip(mats.iter_mut()) {
                m.set(p, q, *b);
            }
        }
    }
}

/// `|∇f|²` on one ring at the layout angles.
fn ring_density(
    f: &CircleFun,
    poly: Option<&DiskPoly>,
    layout: &PolarLayout,
    r: f64,
    inverse: &dyn Fft<f64>,
) -> Result<Vec<ComplexMatrix>> {
    let n = layout.angles;
    match poly {
        Some(poly) if 2 * poly.degree() < n => {
            // Ring Fourier coefficients, shifted by half a cell, summed by FFT.
            let deg = poly.degree() as i64;
            let mut buf = vec![ComplexMatrix::zeros(f.dim()); n];
            for (idx, c) in poly.ring_coefficients(r).into_iter().enumerate() {
                let k = idx as i64 - deg;
                let shift = Complex64::from_polar(1.0, k as f64 * TAU * 0.5 / n as f64);
                buf[k.rem_euclid(n as i64) as usize] = c.scale(shift);
            }
            fft_matrices(&mut buf, inverse);
            Ok(buf)
        }
        _ => (0..n)
            .map(|j| Ok(grad_sq(f, DiskPoint::from_polar(r, layout.angle(j))?).into_matrix()))
            .collect(),
    }
}

/// Weights `ω_i` on the nodes `x_i ⊂ (0, h)` with
/// `Σ ω_i x_i^m = ∫_0^h x^m log(1/x) dx` for `m < n`, so the innermost
/// segment integrates polynomial densities against the log weight exactly.
fn log_product_weights(nodes: &[f64], h: f64) -> Result<Vec<f64>> {
    let n = nodes.len();
    let vander = DMatrix::from_fn(n, n, |m, i| (nodes[i] / h).powi(m as i32));
    let moments = DVector::from_fn(n, |m, _| {
        let m1 = m as f64 + 1.0;
        h * (-h.ln() / m1 + 1.0 / (m1 * m1))
    });
    vander
        .lu()
        .solve(&moments)
        .map(|w| w.iter().copied().collect())
        .ok_or(Error::Numeric {
            context: "log-weight product rule",
            report: "singular Vandermonde system".into(),
        })
}

/// `|∇f|² w(|z|) dx dy` discretized on the polar layout of `config`.
pub fn measure_from_gradient(f: &CircleFun, weight: MeasureWeight, config: &MeasureConfig) -> Result<OperatorMeasure> {
    if config.radial_nodes == 0 || config.angles < 4 {
        return Err(invalid("measure config", "need radial nodes and at least 4 angles"));
    }
    let rule = config.radial_rule();
    let layout = PolarLayout {
        radii: rule.nodes.clone(),
        angles: config.angles,
    };
    let poly = if f.is_band_limited() { Some(DiskPoly::grad_sq(f)?) } else { None };
    let (_, inverse) = planner_pair(config.angles);
    let dphi = TAU / config.angles as f64;
    let inner = match weight {
        MeasureWeight::Log => Some(log_product_weights(&rule.nodes[..config.radial_nodes], rule.breaks[1])?),
        MeasureWeight::Poisson => None,
    };
    let mut nodes = Vec::with_capacity(rule.len() * config.angles);
    let mut weights = Vec::with_capacity(nodes.capacity());
    for (i, (&r, &w)) in rule.nodes.iter().zip(&rule.weights).enumerate() {
        let radial = match &inner {
            Some(inner) if i < inner.len() => inner[i],
            _ => w * weight.eval(r),
        };
        let scale = radial * r * dphi;
        for (j, density) in ring_density(f, poly.as_ref(), &layout, r, inverse.as_ref())?.into_iter().enumerate() {
            nodes.push(DiskPoint::from_polar(r, layout.angle(j))?);
            weights.push(PsdMatrix::from_gram(density.scale_real(scale)));
        }
    }
    Ok(OperatorMeasure {
        dim: f.dim(),
        nodes,
        weights,
        layout: Some(layout),
    })
}

/// Tube widths `2·2^{-k}` for `k = 0..levels` at `centers` uniform centers.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TubeGrid {
    pub centers: usize,
    pub levels: usize,
}

impl Default for TubeGrid {
    fn default() -> Self {
        TubeGrid { centers: 256, levels: 9 }
    }
}

impl TubeGrid {
    pub fn refined(&self) -> TubeGrid {
        TubeGrid {
            centers: 2 * self.centers,
            levels: self.levels + 1,
        }
    }

    pub fn widths(&self) -> Vec<f64> {
        (0..self.levels).map(|k| 2.0 * 0.5f64.powi(k as i32)).collect()
    }

    pub fn tubes(&self) -> Vec<Tube> {
        let mut out = Vec::with_capacity(self.centers * self.levels);
        for w in self.widths() {
            for c in 0..self.centers {
                out.push(Tube { center: TAU * c as f64 / self.centers as f64, width: w });
            }
        }
        out
    }
}

/// Sum of `prefix` over the cyclic index window `lo..=hi`.
fn window_sum(prefix: &[ComplexMatrix], lo: i64, hi: i64) -> ComplexMatrix {
    let n = (prefix.len() - 1) as i64;
    let count = hi - lo + 1;
    if count <= 0 {
        return ComplexMatrix::zeros(prefix[0].dim());
    }
    if count >= n {
        return prefix[n as usize].clone();
    }
    let a = lo.rem_euclid(n);
    let b = a + count;
    if b <= n {
        &prefix[b as usize] - &prefix[a as usize]
    } else {
        let mut s = &prefix[n as usize] - &prefix[a as usize];
        s += &prefix[(b - n) as usize];
        s
    }
}

/// Grid supremum of `‖ν(Î)‖/δ`; a lower bound for the Carleson norm.
pub fn carleson_norm(nu: &OperatorMeasure, grid: &TubeGrid) -> Result<GridSup<Tube>> {
    if grid.centers == 0 || grid.levels == 0 {
        return Err(invalid("tube grid", "grid is empty"));
    }
    let tubes = grid.tubes();
    let mut best: Option<GridSup<Tube>> = None;
    let mut consider = |tube: Tube, mass: &ComplexMatrix| {
        let v = PsdMatrix::from_gram(mass.clone()).op_norm() / tube.width;
        if best.is_none_or(|b| v > b.value) {
            best = Some(GridSup { value: v, witness: tube });
        }
    };
    match &nu.layout {
        Some(layout) => {
            let n = layout.angles;
            let dphi = TAU / n as f64;
            let total = nu.total_mass();
            for w in grid.widths() {
                let probe = Tube { center: 0.0, width: w };
                if probe.is_whole_disk() {
                    for c in 0..grid.centers {
                        consider(Tube { center: TAU * c as f64 / grid.centers as f64, width: w }, &total);
                    }
                    continue;
                }
                let mut columns = vec![ComplexMatrix::zeros(nu.dim); n];
                for (i, &r) in layout.radii.iter().enumerate() {
                    if r >= 1.0 - w && r < 1.0 {
                        for (j, col) in columns.iter_mut().enumerate() {
                            *col += nu.weights[i * n + j].as_matrix();
                        }
                    }
                }
                let mut prefix = Vec::with_capacity(n + 1);
                prefix.push(ComplexMatrix::zeros(nu.dim));
                for col in &columns {
                    let next = prefix.last().unwrap() + col;
                    prefix.push(next);
                }
                let h = probe.half_angle();
                for c in 0..grid.centers {
                    let t0 = TAU * c as f64 / grid.centers as f64;
                    // Angles (j + 1/2)Δ strictly inside (t0 − h, t0 + h).
                    let lo = ((t0 - h) / dphi - 0.5).floor() as i64 + 1;
                    let hi = ((t0 + h) / dphi - 0.5).ceil() as i64 - 1;
                    consider(Tube { center: t0, width: w }, &window_sum(&prefix, lo, hi));
                }
            }
        }
        None => {
            for tube in tubes {
                consider(tube, &nu.tube_mass(&tube));
            }
        }
    }
    best.ok_or_else(|| invalid("tube grid", "grid is empty"))
}

/// Disk points `ρ_k e^{i(m + 1/2)2π/angles}` for the Poisson functional.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PoissonGrid {
    pub radii: Vec<f64>,
    pub angles: usize,
}

impl PoissonGrid {
    /// `count` radii spread evenly on `[0, r_max]`.
    pub fn uniform(count: usize, r_max: f64, angles: usize) -> Result<Self> {
        if count == 0 || angles == 0 || !(0.0..1.0).contains(&r_max) {
            return Err(invalid("poisson grid", "need radii in [0, 1) and at least one angle"));
        }
        let radii = (0..count)
            .map(|k| if count == 1 { 0.0 } else { r_max * k as f64 / (count - 1) as f64 })
            .collect();
        Ok(PoissonGrid { radii, angles })
    }

    fn point(&self, k: usize, m: usize) -> Result<DiskPoint> {
        DiskPoint::from_polar(self.radii[k], TAU * (m as f64 + 0.5) / self.angles as f64)
    }
}

/// `P_z(w) = (1 − |z|²)/|1 − z̄w|²`.
pub fn poisson_kernel_interior(z: DiskPoint, w: DiskPoint) -> f64 {
    let (z, w) = (z.z(), w.z());
    (1.0 - z.norm_sqr()) / (Complex64::new(1.0, 0.0) - z.conj() * w).norm_sqr()
}

/// `∫ P_z dν`.
pub fn poisson_at(nu: &OperatorMeasure, z: DiskPoint) -> PsdMatrix {
    let mut acc = ComplexMatrix::zeros(nu.dim);
    for (w, m) in nu.nodes.iter().zip(&nu.weights) {
        acc.axpy(Complex64::new(poisson_kernel_interior(z, *w), 0.0), m.as_matrix());
    }
    PsdMatrix::from_gram(acc)
}

/// DFT of the samples `P_z(r e^{iθ_j})`, `θ_j = 2πj/n`, `|z| = ρ`:
/// `n (1 − ρ²)/(1 − s²) · (s^k + s^{n−k})/(1 − s^n)` with `s = ρr`.
fn poisson_dft(rho: f64, r: f64, n: usize) -> Vec<f64> {
    let s = rho * r;
    let amp = n as f64 * (1.0 - rho * rho) / (1.0 - s * s);
    let sn = s.powi(n as i32);
    (0..n)
        .map(|k| {
            if s == 0.0 {
                return if k == 0 { amp } else { 0.0 };
            }
            amp * (s.powi(k as i32) + s.powi((n - k) as i32)) / (1.0 - sn)
        })
        .collect()
}

/// Grid supremum of `‖∫ P_z dν‖` over `grid`. Measures on a polar layout
/// with the grid's angle count go through cyclic convolution by FFT;
/// anything else is summed directly.
pub fn poisson_functional(nu: &OperatorMeasure, grid: &PoissonGrid) -> Result<GridSup<DiskPoint>> {
    if grid.radii.is_empty() || grid.angles == 0 {
        return Err(invalid("poisson grid", "grid is empty"));
    }
    if grid.radii.iter().any(|&r| !(0.0..1.0).contains(&r)) {
        return Err(invalid("poisson grid", "radii must lie in [0, 1)"));
    }
    let mut best: Option<GridSup<DiskPoint>> = None;
    let mut consider = |z: DiskPoint, m: ComplexMatrix| {
        let v = PsdMatrix::from_gram(m).op_norm();
        if best.is_none_or(|b| v > b.value) {
            best = Some(GridSup { value: v, witness: z });
        }
    };
    match &nu.layout {
        Some(layout) if layout.angles == grid.angles => {
            let n = layout.angles;
            let (forward, inverse) = planner_pair(n);
            let rings: Vec<Vec<ComplexMatrix>> = (0..layout.radii.len())
                .map(|i| {
                    let mut ring: Vec<ComplexMatrix> =
                        nu.weights[i * n..(i + 1) * n].iter().map(|w| w.as_matrix().clone()).collect();
                    fft_matrices(&mut ring, forward.as_ref());
                    ring
                })
                .collect();
            for (k, &rho) in grid.radii.iter().enumerate() {
                let mut acc = vec![ComplexMatrix::zeros(nu.dim); n];
                for (ring, &r) in rings.iter().zip(&layout.radii) {
                    for (a, (w, kh)) in acc.iter_mut().zip(ring.iter().zip(poisson_dft(rho, r, n))) {
                        a.axpy(Complex64::new(kh / n as f64, 0.0), w);
                    }
                }
                fft_matrices(&mut acc, inverse.as_ref());
                for (m, value) in acc.into_iter().enumerate() {
                    consider(grid.point(k, m)?, value);
                }
            }
        }
        _ => {
            for k in 0..grid.radii.len() {
                for m in 0..grid.angles {
                    let z = grid.point(k, m)?;
                    consider(z, poisson_at(nu, z).into_matrix());
                }
            }
        }
    }
    best.ok_or_else(|| invalid("poisson grid", "grid is empty"))
}

// Serialization --------------------------------------------------------------

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MeasureDoc {
    pub dim: usize,
    pub nodes: Vec<[f64; 2]>,
    pub weights: Vec<MatrixDoc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub layout: Option<PolarLayout>,
}

impl From<&OperatorMeasure> for MeasureDoc {
    fn from(nu: &OperatorMeasure) -> Self {
        MeasureDoc {
            dim: nu.dim,
            nodes: nu.nodes.iter().map(|z| [z.z().re, z.z().im]).collect(),
            weights: nu.weights.iter().map(|w| matrix_to_doc(w.as_matrix())).collect(),
            layout: nu.layout.clone(),
        }
    }
}

impl TryFrom<MeasureDoc> for OperatorMeasure {
    type Error = Error;

    fn try_from(doc: MeasureDoc) -> Result<Self> {
        let nodes = doc
            .nodes
            .iter()
            .map(|&[re, im]| DiskPoint::new(Complex64::new(re, im)))
            .collect::<Result<Vec<_>>>()?;
        let weights = doc
            .weights
            .iter()
            .map(|w| PsdMatrix::new(matrix_from_doc(w)?))
            .collect::<Result<Vec<_>>>()?;
        let mut nu = OperatorMeasure::new(doc.dim, nodes, weights)?;
        if let Some(layout) = doc.layout {
            if layout.radii.len() * layout.angles != nu.nodes.len() {
                return Err(Error::InvalidRepresentation("layout does not match the node count".into()));
            }
            nu.layout = Some(layout);
        }
        Ok(nu)
    }
}
