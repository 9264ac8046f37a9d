//! Duality pairing, inequality checks, corpora and ratio studies.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::atoms::{h1c_upper_bound, lower_bound_from_norms, Decomposition, Scheme};
use crate::carleson::{carleson_norm, measure_from_gradient, poisson_functional, MeasureConfig, MeasureWeight, OperatorMeasure, PoissonGrid, TubeGrid};
use crate::circfun::{l2_pairing, Arc, CircleFun};
use crate::diskpoly::{DiskPoly, RadialWeight};
use crate::error::{Error, Result};
use crate::extension::DiskPoint;
use crate::norms::{bmo_c_norm, garsia_norm, mobius_orbit_norm, star_c_norm, BmoNorm, MobiusGrid, NormSearchGrid};
use crate::opalg::ComplexMatrix;
use crate::squarefun::{h1c_area_norm, h1c_g_norm, AreaFunction, ConeConfig};
use crate::Complex64;

pub mod corpus;
pub mod report;
pub mod studies;

pub use corpus::{corpus_generate, Corpus, CorpusItem, CorpusKind, CorpusSpec};
pub use report::{Check, Entry, Envelope, RatioReport, RatioRow, RowStatus, StudyReport, WitnessItem};
pub use studies::{run_study, Study, StudySettings, Tolerances};

/// `l(f) = τ(∫ g* f dm)`.
pub fn pairing(f: &CircleFun, g: &CircleFun) -> Result<Complex64> {
    Ok(l2_pairing(g, f)?.trace())
}

/// A function together with an atomic decomposition certifying its
/// `H¹_c` upper bound.
#[derive(Clone, Debug, PartialEq)]
pub struct Backed {
    pub function: CircleFun,
    pub upper: f64,
    pub decomposition: Decomposition,
}

impl Backed {
    pub fn new(f: &CircleFun, scheme: Scheme) -> Result<Self> {
        let (upper, decomposition) = h1c_upper_bound(f, scheme)?;
        Ok(Backed {
            function: f.clone(),
            upper,
            decomposition,
        })
    }

    pub fn support_arcs(&self) -> Vec<Arc> {
        self.decomposition.support_arcs()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DualityReport {
    pub pairing: Complex64,
    pub bmo: f64,
    pub upper: f64,
    /// `(1 + tol)·bmo·upper − |pairing|`.
    pub slack: f64,
    pub holds: bool,
}

impl DualityReport {
    pub fn new(pairing: Complex64, bmo: f64, upper: f64, tol: f64) -> Self {
        let slack = (1.0 + tol) * bmo * upper - pairing.norm();
        DualityReport {
            pairing,
            bmo,
            upper,
            slack,
            holds: slack >= 0.0,
        }
    }
}

/// `|⟨f, g⟩| ≤ (1 + tol)·‖g‖_{BMO_c}·‖f‖_{H¹_c}` with the BMO norm taken
/// over `grid` plus the supports of the atoms of `f`.
pub fn check_duality_bound(f: &Backed, g: &CircleFun, grid: &NormSearchGrid, tol: f64) -> Result<DualityReport> {
    let grid = grid.clone().with_extra_arcs(f.support_arcs());
    let bmo = bmo_c_norm(g, &grid)?.value;
    if !bmo.is_finite() {
        return Err(Error::Numeric {
            context: "check_duality_bound",
            report: format!("BMO norm is not finite ({bmo})"),
        });
    }
    Ok(DualityReport::new(pairing(&f.function, g)?, bmo, f.upper, tol))
}

/// Norm functionals available to [`ratio_study`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Functional {
    /// `τ ∫ |f − f(0)|² dm`.
    Oscillation,
    /// `(1/π) τ ∫_D |∇f|² log(1/|z|) dx dy`.
    LogGradient,
    /// `∫ τ(A_c(f)(t)²) dm(t)`.
    ConeArea,
    Star,
    StarSquared,
    Bmo,
    Garsia,
    MobiusOrbit,
    /// `‖ν_f‖_c`, weight `1 − |z|²`.
    CarlesonPoisson,
    /// `‖λ_f‖_c`, weight `log(1/|z|)`.
    CarlesonLog,
    /// `N(ν_f)`.
    PoissonFunctional,
    H1Upper,
    H1Lower,
    /// `‖f(0)‖₁ + ‖A_c(f)‖_{L¹}`.
    AreaH1,
    /// `‖f(0)‖₁ + ‖g_c(f)‖_{L¹}`.
    GH1,
}

impl Functional {
    pub const ALL: [Functional; 15] = [
        Functional::Oscillation,
        Functional::LogGradient,
        Functional::ConeArea,
        Functional::Star,
        Functional::StarSquared,
        Functional::Bmo,
        Functional::Garsia,
        Functional::MobiusOrbit,
        Functional::CarlesonPoisson,
        Functional::CarlesonLog,
        Functional::PoissonFunctional,
        Functional::H1Upper,
        Functional::H1Lower,
        Functional::AreaH1,
        Functional::GH1,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Functional::Oscillation => "oscillation",
            Functional::LogGradient => "log-gradient",
            Functional::ConeArea => "cone-area",
            Functional::Star => "star",
            Functional::StarSquared => "star-squared",
            Functional::Bmo => "bmo",
            Functional::Garsia => "garsia",
            Functional::MobiusOrbit => "mobius-orbit",
            Functional::CarlesonPoisson => "carleson-poisson",
            Functional::CarlesonLog => "carleson-log",
            Functional::PoissonFunctional => "poisson-functional",
            Functional::H1Upper => "h1-upper",
            Functional::H1Lower => "h1-lower",
            Functional::AreaH1 => "area-h1",
            Functional::GH1 => "g-h1",
        }
    }

    pub fn from_name(name: &str) -> Option<Functional> {
        Functional::ALL.into_iter().find(|f| f.name() == name)
    }
}

/// Grids and parameters shared by the functionals.
#[derive(Clone, Debug)]
pub struct FunctionalContext {
    pub alpha: f64,
    /// Angular samples for `L¹` norms of square functions.
    pub n_t: usize,
    pub grid: NormSearchGrid,
    pub mobius: MobiusGrid,
    pub cone: ConeConfig,
    pub measure: MeasureConfig,
    pub tubes: TubeGrid,
    pub poisson: PoissonGrid,
    pub scheme: Scheme,
    /// Extra BMO witnesses for the lower bound with their norms over
    /// `grid`; only those of matching dimension are used.
    witnesses: Vec<(CircleFun, BmoNorm)>,
}

impl FunctionalContext {
    pub fn new(grid: NormSearchGrid) -> Self {
        let measure = MeasureConfig::default();
        FunctionalContext {
            alpha: 2.0,
            n_t: 64,
            grid,
            mobius: MobiusGrid::default(),
            cone: ConeConfig::default(),
            measure,
            tubes: TubeGrid::default(),
            poisson: PoissonGrid::uniform(24, 0.95, measure.angles).expect("default grid is valid"),
            scheme: Scheme::Global,
            witnesses: Vec::new(),
        }
    }

    /// Sets the extra lower-bound witnesses. Call after the grid is final:
    /// their BMO norms are computed here, once.
    pub fn set_witnesses(&mut self, witnesses: Vec<CircleFun>) -> Result<()> {
        self.witnesses = witnesses
            .into_iter()
            .map(|g| {
                let bmo = bmo_c_norm(&g, &self.grid)?;
                Ok((g, bmo))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(())
    }
}

/// `‖g‖_{BMO_c}` over a grid extended by `arcs`, given the norm over the
/// grid itself (the full circle is in every grid).
pub fn augmented_bmo(g: &CircleFun, base: &BmoNorm, arcs: &[Arc]) -> Result<f64> {
    if arcs.iter().all(Arc::is_full) {
        return Ok(base.value);
    }
    let extra = NormSearchGrid {
        centers: vec![0.0],
        radii: vec![2.0],
        disk: vec![DiskPoint::origin()],
        extra_arcs: arcs.to_vec(),
    };
    Ok(base.mean_norm + base.star.value.max(star_c_norm(g, &extra)?.value))
}

/// The unitary factor `u` of `c = u|c|`, so that `τ(u* c) = ‖c‖₁`.
pub fn polar_unitary(c: &ComplexMatrix) -> Result<ComplexMatrix> {
    let svd = c.as_nalgebra().clone().svd(true, true);
    let (Some(u), Some(v_t)) = (svd.u, svd.v_t) else {
        return Err(Error::Numeric {
            context: "polar_unitary",
            report: "SVD did not return singular vectors".into(),
        });
    };
    ComplexMatrix::from_nalgebra(u * v_t)
}

/// Witnesses for the `H¹_c` lower bound of `f` besides any supplied ones:
/// the polar factor of `f(0)` (pairing to `‖f(0)‖₁`) and `f − f(0)`.
pub fn own_witnesses(f: &CircleFun) -> Result<[CircleFun; 2]> {
    Ok([CircleFun::constant(polar_unitary(&f.mean())?), f.mean_removed()])
}

/// `H¹_c` lower bound of `f` from its own witnesses and the extras, with
/// BMO norms over `grid` extended by `arcs`.
pub fn lower_bound_with(f: &CircleFun, extras: &[(CircleFun, BmoNorm)], grid: &NormSearchGrid, arcs: &[Arc]) -> Result<f64> {
    let own = own_witnesses(f)?;
    let mut normed = Vec::with_capacity(own.len() + extras.len());
    for g in &own {
        let base = bmo_c_norm(g, grid)?;
        normed.push((g, augmented_bmo(g, &base, arcs)?));
    }
    for (g, base) in extras.iter().filter(|(g, _)| g.dim() == f.dim()) {
        normed.push((g, augmented_bmo(g, base, arcs)?));
    }
    Ok(lower_bound_from_norms(f, &normed)?.value)
}

/// Evaluates functionals on one function, sharing measures and
/// decompositions between them.
pub struct Evaluator<'a> {
    f: &'a CircleFun,
    ctx: &'a FunctionalContext,
    nu: Option<OperatorMeasure>,
    lambda: Option<OperatorMeasure>,
    upper: Option<(f64, Decomposition)>,
}

impl<'a> Evaluator<'a> {
    pub fn new(f: &'a CircleFun, ctx: &'a FunctionalContext) -> Self {
        Evaluator {
            f,
            ctx,
            nu: None,
            lambda: None,
            upper: None,
        }
    }

    fn nu(&mut self) -> Result<&OperatorMeasure> {
        if self.nu.is_none() {
            self.nu = Some(measure_from_gradient(self.f, MeasureWeight::Poisson, &self.ctx.measure)?);
        }
        Ok(self.nu.as_ref().unwrap())
    }

    fn lambda(&mut self) -> Result<&OperatorMeasure> {
        if self.lambda.is_none() {
            self.lambda = Some(measure_from_gradient(self.f, MeasureWeight::Log, &self.ctx.measure)?);
        }
        Ok(self.lambda.as_ref().unwrap())
    }

    fn upper(&mut self) -> Result<&(f64, Decomposition)> {
        if self.upper.is_none() {
            self.upper = Some(h1c_upper_bound(self.f, self.ctx.scheme)?);
        }
        Ok(self.upper.as_ref().unwrap())
    }

    pub fn eval(&mut self, functional: Functional) -> Result<f64> {
        let (f, ctx) = (self.f, self.ctx);
        Ok(match functional {
            Functional::Oscillation => {
                let c = f.mean_removed();
                l2_pairing(&c, &c)?.trace().re
            }
            Functional::LogGradient => DiskPoly::grad_sq(f)?.integrate(RadialWeight::LogInverse).trace().re / PI,
            Functional::ConeArea => AreaFunction::new(f, ctx.alpha, 1.0, &ctx.cone)?.mean_squared(ctx.n_t).trace().re,
            Functional::Star => star_c_norm(f, &ctx.grid)?.value,
            Functional::StarSquared => star_c_norm(f, &ctx.grid)?.value.powi(2),
            Functional::Bmo => bmo_c_norm(f, &ctx.grid)?.value,
            Functional::Garsia => garsia_norm(f, &ctx.grid)?.value,
            Functional::MobiusOrbit => mobius_orbit_norm(f, &ctx.mobius)?.value,
            Functional::CarlesonPoisson => carleson_norm(self.nu()?, &ctx.tubes)?.value,
            Functional::CarlesonLog => carleson_norm(self.lambda()?, &ctx.tubes)?.value,
            Functional::PoissonFunctional => poisson_functional(self.nu()?, &ctx.poisson)?.value,
            Functional::H1Upper => self.upper()?.0,
            Functional::H1Lower => {
                let arcs = self.upper()?.1.support_arcs();
                lower_bound_with(f, &ctx.witnesses, &ctx.grid, &arcs)?
            }
            Functional::AreaH1 => h1c_area_norm(f, ctx.alpha, ctx.n_t, &ctx.cone)?,
            Functional::GH1 => h1c_g_norm(f, ctx.n_t, &ctx.cone)?,
        })
    }
}

/// Envelopes of `y/x` for several functional pairs, each functional
/// evaluated once per item.
pub fn ratio_studies<'a>(
    pairs: &[(Functional, Functional)],
    functions: impl IntoIterator<Item = &'a CircleFun>,
    ctx: &FunctionalContext,
    level: &str,
) -> Vec<RatioReport> {
    let mut entries: Vec<Vec<Entry>> = vec![Vec::new(); pairs.len()];
    for (item, f) in functions.into_iter().enumerate() {
        let mut eval = Evaluator::new(f, ctx);
        let mut cache: Vec<(Functional, std::result::Result<f64, Error>)> = Vec::new();
        let mut value = |func: Functional| -> Result<f64> {
            if let Some((_, v)) = cache.iter().find(|(k, _)| *k == func) {
                return v.clone();
            }
            let v = eval.eval(func);
            cache.push((func, v.clone()));
            v
        };
        for (k, &(x, y)) in pairs.iter().enumerate() {
            let v = value(x).and_then(|xv| Ok((xv, value(y)?)));
            entries[k].push(Entry::new(item, 0, v));
        }
    }
    pairs
        .iter()
        .zip(entries)
        .map(|(&(x, y), e)| RatioReport::from_entries(x.name(), y.name(), level, e))
        .collect()
}

/// Envelope of `y/x` over `functions`. Failures are flagged per item.
pub fn ratio_study<'a>(
    x: Functional,
    y: Functional,
    functions: impl IntoIterator<Item = &'a CircleFun>,
    ctx: &FunctionalContext,
) -> RatioReport {
    ratio_studies(&[(x, y)], functions, ctx, "base").remove(0)
}

/// Disk points `r e^{iθ}` on `radii` evenly spaced radii in `[0, r_max]`
/// (the origin once) and `angles` angles.
pub fn disk_sweep(radii: usize, angles: usize, r_max: f64) -> Result<Vec<DiskPoint>> {
    if radii == 0 || angles == 0 {
        return Err(crate::error::invalid("disk sweep", "sizes must be positive"));
    }
    let rs: Vec<f64> = (0..radii)
        .map(|k| if radii == 1 { 0.0 } else { r_max * k as f64 / (radii - 1) as f64 })
        .collect();
    crate::norms::polar_disk_grid(&rs, angles)
}
