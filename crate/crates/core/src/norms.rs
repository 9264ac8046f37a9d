//! BMO-type norms of matrix-valued circle functions.
//!
//! Suprema over arcs, disk points and Möbius maps are taken over finite
//! grids, so every value here is a lower bound for the true supremum and
//! comes with the grid element that attains it. Ties go to the first grid
//! element in sweep order.

use std::f64::consts::{PI, TAU};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::circfun::{arc_oscillation_cached, l2_pairing, lp_c_norm, lp_r_norm, Arc, CircleFun, Repr};
use crate::error::{invalid, Error, Result};
use crate::extension::{
    poisson_extend, poisson_oscillation, second_moment_from_autocorrelation, DiskPoint, Mobius,
};
use crate::opalg::{ComplexMatrix, PsdMatrix};

/// Largest radius allowed on a disk grid.
pub const MAX_GRID_RADIUS: f64 = 1.0 - 1e-6;

/// A grid supremum together with the grid element that attains it.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSup<W> {
    pub value: f64,
    pub witness: W,
}

/// Finite grids standing in for the continua of arcs and disk points.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormSearchGrid {
    pub centers: Vec<f64>,
    /// Chordal radii, typically `2·2^{-k}`.
    pub radii: Vec<f64>,
    pub disk: Vec<DiskPoint>,
    /// Arcs swept in addition to the tensor grid.
    #[serde(default)]
    pub extra_arcs: Vec<Arc>,
}

/// Grid parameters; see [`NormSearchGrid::from_spec`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GridSpec {
    pub centers: usize,
    pub levels: usize,
    pub disk_radii: usize,
    pub disk_angles: usize,
    pub r_max: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            centers: 256,
            levels: 10,
            disk_radii: 32,
            disk_angles: 128,
            r_max: 1.0 - 1e-4,
        }
    }
}

impl GridSpec {
    /// Doubles every resolution parameter and halves the distance of the
    /// outermost disk radius to the boundary.
    pub fn refined(&self) -> GridSpec {
        GridSpec {
            centers: 2 * self.centers,
            levels: self.levels + 1,
            disk_radii: 2 * self.disk_radii,
            disk_angles: 2 * self.disk_angles,
            r_max: 1.0 - 0.5 * (1.0 - self.r_max),
        }
    }

    /// Parses `key=value` pairs separated by commas, e.g.
    /// `centers=128,levels=8,disk_radii=16,disk_angles=64,r_max=0.999`.
    /// Missing keys keep their defaults.
    pub fn parse(text: &str) -> Result<GridSpec> {
        let mut spec = GridSpec::default();
        for part in text.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let (key, value) = part
                .split_once('=')
                .ok_or_else(|| invalid("grid", format!("expected key=value, got `{part}`")))?;
            let int = || {
                value
                    .trim()
                    .parse::<usize>()
                    .map_err(|e| invalid("grid", format!("{key}: {e}")))
            };
            match key.trim() {
                "centers" => spec.centers = int()?,
                "levels" => spec.levels = int()?,
                "disk_radii" => spec.disk_radii = int()?,
                "disk_angles" => spec.disk_angles = int()?,
                "r_max" => {
                    spec.r_max = value
                        .trim()
                        .parse()
                        .map_err(|e| invalid("grid", format!("r_max: {e}")))?
                }
                other => return Err(invalid("grid", format!("unknown key `{other}`"))),
            }
        }
        Ok(spec)
    }
}

/// Chebyshev–Lobatto radii on `[0, r_max]`, clustered at both ends.
pub fn chebyshev_radii(n: usize, r_max: f64) -> Vec<f64> {
    if n <= 1 {
        return vec![0.0];
    }
    (0..n)
        .map(|i| 0.5 * r_max * (1.0 - (PI * i as f64 / (n - 1) as f64).cos()))
        .collect()
}

/// Polar disk grid; the origin appears once.
pub fn polar_disk_grid(radii: &[f64], angles: usize) -> Result<Vec<DiskPoint>> {
    let mut out = Vec::new();
    for &r in radii {
        if r == 0.0 {
            out.push(DiskPoint::origin());
            continue;
        }
        for j in 0..angles {
            out.push(DiskPoint::from_polar(r, TAU * j as f64 / angles as f64)?);
        }
    }
    Ok(out)
}

impl NormSearchGrid {
    pub fn from_spec(spec: &GridSpec) -> Result<Self> {
        if spec.centers == 0 || spec.disk_radii == 0 || spec.disk_angles == 0 {
            return Err(invalid("grid", "grid sizes must be positive"));
        }
        if !(spec.r_max > 0.0 && spec.r_max <= MAX_GRID_RADIUS) {
            return Err(invalid("r_max", format!("must lie in (0, 1 − 1e-6], got {}", spec.r_max)));
        }
        let centers = (0..spec.centers)
            .map(|j| TAU * j as f64 / spec.centers as f64)
            .collect();
        let radii = (0..=spec.levels).map(|k| 2.0 * 0.5f64.powi(k as i32)).collect();
        let disk = polar_disk_grid(&chebyshev_radii(spec.disk_radii, spec.r_max), spec.disk_angles)?;
        Ok(NormSearchGrid {
            centers,
            radii,
            disk,
            extra_arcs: Vec::new(),
        })
    }

    pub fn with_extra_arcs(mut self, arcs: impl IntoIterator<Item = Arc>) -> Self {
        self.extra_arcs.extend(arcs);
        self
    }

    /// Every arc of the grid in sweep order; the full circle appears once.
    pub fn arcs(&self) -> Vec<Arc> {
        let mut out = Vec::new();
        let mut full_seen = false;
        for &radius in &self.radii {
            if radius >= 2.0 {
                if !full_seen {
                    out.push(Arc::full());
                    full_seen = true;
                }
                continue;
            }
            for &c in &self.centers {
                if let Ok(arc) = Arc::new(c, radius) {
                    out.push(arc);
                }
            }
        }
        out.extend(self.extra_arcs.iter().copied());
        out
    }

    fn check(&self) -> Result<()> {
        if self.centers.is_empty() || self.radii.is_empty() {
            return Err(invalid("grid", "arc grid is empty"));
        }
        if self.disk.is_empty() {
            return Err(invalid("grid", "disk grid is empty"));
        }
        Ok(())
    }
}

fn sup_over<T: Copy>(items: impl IntoIterator<Item = T>, mut f: impl FnMut(T) -> Result<f64>) -> Result<GridSup<T>> {
    let mut best: Option<GridSup<T>> = None;
    for item in items {
        let v = f(item)?;
        if best.is_none_or(|b| v > b.value) {
            best = Some(GridSup { value: v, witness: item });
        }
    }
    best.ok_or_else(|| invalid("grid", "empty sweep"))
}

/// `‖f‖_{*,c}`: largest `‖((1/|I|)∫_I |f − f_I|² dm)^{1/2}‖` over the arc grid.
pub fn star_c_norm(f: &CircleFun, grid: &NormSearchGrid) -> Result<GridSup<Arc>> {
    grid.check()?;
    let r = f.autocorrelation();
    sup_over(grid.arcs(), |arc| {
        Ok(arc_oscillation_cached(f, &arc, r.as_deref())?.op_norm().sqrt())
    })
}

/// `‖f‖_{*,r} = ‖f*‖_{*,c}`.
pub fn star_r_norm(f: &CircleFun, grid: &NormSearchGrid) -> Result<GridSup<Arc>> {
    star_c_norm(&f.adjoint(), grid)
}

/// `‖f‖_{BMO_c} = ‖∫ f dm‖ + ‖f‖_{*,c}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BmoNorm {
    pub value: f64,
    pub mean_norm: f64,
    pub star: GridSup<Arc>,
}

pub fn bmo_c_norm(f: &CircleFun, grid: &NormSearchGrid) -> Result<BmoNorm> {
    let mean_norm = f.mean().op_norm();
    let star = star_c_norm(f, grid)?;
    Ok(BmoNorm {
        value: mean_norm + star.value,
        mean_norm,
        star,
    })
}

pub fn bmo_r_norm(f: &CircleFun, grid: &NormSearchGrid) -> Result<BmoNorm> {
    bmo_c_norm(&f.adjoint(), grid)
}

/// `max(‖f‖_{BMO_c}, ‖f‖_{BMO_r})`.
pub fn bmo_cr_norm(f: &CircleFun, grid: &NormSearchGrid) -> Result<f64> {
    Ok(bmo_c_norm(f, grid)?.value.max(bmo_r_norm(f, grid)?.value))
}

/// `‖f‖_{L^∞_c} = ‖∫ |f|² dm‖^{1/2}`.
pub fn linf_c_norm(f: &CircleFun) -> Result<f64> {
    Ok(PsdMatrix::from_gram(l2_pairing(f, f)?).op_norm().sqrt())
}

pub fn linf_r_norm(f: &CircleFun) -> Result<f64> {
    linf_c_norm(&f.adjoint())
}

/// Garsia norm `sup_z ‖(∫ |f − f(z)|² P_z dm)^{1/2}‖` over the disk grid.
pub fn garsia_norm(f: &CircleFun, grid: &NormSearchGrid) -> Result<GridSup<DiskPoint>> {
    grid.check()?;
    match f.repr() {
        Repr::BandLimited { .. } => {
            let r = f.autocorrelation().unwrap();
            sup_over(grid.disk.iter().copied(), |z| {
                let fz = poisson_extend(f, z);
                let second = second_moment_from_autocorrelation(&r, z);
                Ok(PsdMatrix::from_gram(&second - &fz.ad_mul(&fz)).op_norm().sqrt())
            })
        }
        Repr::PiecewiseConst { .. } => sup_over(grid.disk.iter().copied(), |z| {
            Ok(poisson_oscillation(f, z).op_norm().sqrt())
        }),
    }
}

pub fn garsia_r_norm(f: &CircleFun, grid: &NormSearchGrid) -> Result<GridSup<DiskPoint>> {
    garsia_norm(&f.adjoint(), grid)
}

/// Base points and dilation parameters swept by [`mobius_orbit_norm`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MobiusGrid {
    pub bases: Vec<DiskPoint>,
    pub gammas: Vec<f64>,
}

impl MobiusGrid {
    pub fn new(bases: Vec<DiskPoint>, gammas: Vec<f64>) -> Result<Self> {
        if bases.is_empty() || gammas.is_empty() {
            return Err(invalid("mobius grid", "grids must be non-empty"));
        }
        if let Some(g) = gammas.iter().find(|g| !(**g > 0.0 && **g < 1.0)) {
            return Err(invalid("gamma", format!("must lie in (0, 1), got {g}")));
        }
        Ok(MobiusGrid { bases, gammas })
    }

    /// Polar base grid with Chebyshev radii and the given dilations.
    pub fn polar(radii: usize, angles: usize, r_max: f64, gammas: Vec<f64>) -> Result<Self> {
        MobiusGrid::new(polar_disk_grid(&chebyshev_radii(radii, r_max), angles)?, gammas)
    }
}

impl Default for MobiusGrid {
    fn default() -> Self {
        MobiusGrid::polar(12, 32, 0.99, vec![0.5, 0.75, 0.9, 0.95, 0.99, 0.999]).expect("default grid is valid")
    }
}

/// Witness of [`mobius_orbit_norm`]: `ψ(z) = (z − base)/(1 − base̅ z)` and the dilation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MobiusWitness {
    pub base: DiskPoint,
    pub gamma: f64,
}

const ORBIT_MIN_NODES: usize = 256;
const ORBIT_MAX_NODES: usize = 1 << 16;

/// `sup ‖g_γ‖_{L^∞_c}` over `g = f∘ψ − f(ψ(0))` for analytic `f`.
///
/// The rotation of `ψ` does not affect the norm (`e^{iθ}φ_{z₀}(z) =
/// φ_{e^{iθ}z₀}(e^{iθ}z)` and `dm` is rotation invariant), so only base
/// points are swept. `∫ |g_γ|² dm` uses the trapezoid rule, doubling the node
/// count from 256 until the Gram matrix stabilizes.
pub fn mobius_orbit_norm(f: &CircleFun, grid: &MobiusGrid) -> Result<GridSup<MobiusWitness>> {
    if !f.is_analytic() || !f.is_band_limited() {
        return Err(Error::Unsupported(
            "the Möbius-orbit norm is defined for analytic band-limited functions".into(),
        ));
    }
    let n = f.degree().unwrap();
    let coeffs: Vec<ComplexMatrix> = (0..=n as i64).map(|k| f.coeff(k).unwrap()).collect();
    let items: Vec<MobiusWitness> = grid
        .bases
        .iter()
        .flat_map(|&base| grid.gammas.iter().map(move |&gamma| MobiusWitness { base, gamma }))
        .collect();
    sup_over(items, |w| {
        let gram = orbit_gram(&coeffs, w.base.z(), w.gamma)?;
        Ok(PsdMatrix::from_gram(gram).op_norm().sqrt())
    })
}

fn horner(coeffs: &[ComplexMatrix], w: Complex64) -> ComplexMatrix {
    let mut acc = coeffs[coeffs.len() - 1].clone();
    for a in coeffs[..coeffs.len() - 1].iter().rev() {
        acc = acc.scale(w);
        acc += a;
    }
    acc
}

/// `∫ |f(φ(γt)) − f(φ(0))|² dm(t)` with `φ(z) = (z − z₀)/(1 − z̄₀z)`.
fn orbit_gram(coeffs: &[ComplexMatrix], z0: Complex64, gamma: f64) -> Result<ComplexMatrix> {
    let psi = Mobius::new(0.0, z0)?;
    let center = horner(coeffs, -z0);
    let dim = center.dim();
    let eval = |m: usize, offset: bool| {
        let mut acc = ComplexMatrix::zeros(dim);
        let shift = if offset { 0.5 } else { 0.0 };
        for k in 0..m {
            let t = TAU * (k as f64 + shift) / m as f64;
            let g = &horner(coeffs, psi.map(Complex64::from_polar(gamma, t))) - &center;
            acc.add_ad_mul(Complex64::new(1.0, 0.0), &g, &g);
        }
        acc
    };
    // Each doubling reuses the previous nodes and adds the midpoints.
    let mut m = ORBIT_MIN_NODES;
    let mut sum = eval(m, false);
    loop {
        let mid = eval(m, true);
        let coarse = sum.scale_real(1.0 / m as f64);
        sum += &mid;
        m *= 2;
        let fine = sum.scale_real(1.0 / m as f64);
        let change = (&fine - &coarse).max_abs_entry();
        if change <= 1e-13 * (1.0 + fine.max_abs_entry()) {
            return Ok(fine);
        }
        if m >= ORBIT_MAX_NODES {
            return Err(Error::Numeric {
                context: "mobius_orbit_norm",
                report: format!("trapezoid rule did not settle at {m} nodes (change {change:e})"),
            });
        }
    }
}

/// `L^p_{cr}` norm. For `p ≤ 2` this is the sum norm, an infimum over
/// splittings `f = g + h`; the value returned is `‖g‖_{L^p_c} + ‖h‖_{L^p_r}`
/// for the supplied splitting (default `(f, 0)`), an upper bound. For
/// `p > 2` it is the exact maximum `max(‖f‖_{L^p_c}, ‖f‖_{L^p_r})`.
pub fn lp_cr_norm(f: &CircleFun, p: f64, splitting: Option<(&CircleFun, &CircleFun)>) -> Result<f64> {
    if !(p > 0.0) {
        return Err(invalid("p", format!("must be positive, got {p}")));
    }
    if p > 2.0 {
        return Ok(lp_c_norm(f, p)?.max(lp_r_norm(f, p)?));
    }
    let Some((g, h)) = splitting else {
        return lp_c_norm(f, p);
    };
    let residual = f.sub(g)?.sub(h)?;
    let res = l2_pairing(&residual, &residual)?.trace().re.max(0.0).sqrt();
    let scale = l2_pairing(f, f)?.trace().re.max(0.0).sqrt();
    if res > 1e-10 * scale.max(1.0) {
        return Err(Error::SplittingMismatch { residual: res });
    }
    Ok(lp_c_norm(g, p)? + lp_r_norm(h, p)?)
}
