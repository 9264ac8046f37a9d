//! Named studies: corpus, functionals, envelopes and hard checks.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::atoms::{validate_atom, Scheme};
use crate::carleson::{measure_from_gradient, MeasureConfig, MeasureWeight, PoissonGrid, TubeGrid};
use crate::circfun::{CircleFun, FunctionDoc};
use crate::diskpoly::{DiskPoly, RadialWeight};
use crate::error::{invalid, Error, Result};
use crate::extension::{poisson_oscillation, DiskPoint};
use crate::norms::{bmo_c_norm, chebyshev_radii, garsia_norm, GridSpec, MobiusGrid, NormSearchGrid};
use crate::opalg::{ComplexMatrix, PsdMatrix};
use crate::squarefun::{g_fun, g_fun_squared, sq_l1_norm, uniform_angles, AreaFunction, ConeConfig};

use super::corpus::{corpus_generate, Corpus, CorpusKind, CorpusSpec};
use super::report::{Check, Entry, RatioReport, StudyReport, WitnessItem};
use super::{augmented_bmo, disk_sweep, lower_bound_with, pairing, ratio_studies, Backed, DualityReport, Functional, FunctionalContext};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Study {
    /// `τ∫|f − f(0)|² dm` against the log-weighted gradient integral, and
    /// the Poisson-weighted oscillation against the Green-weighted one.
    LittlewoodPaley,
    /// Poisson-weighted oscillation against the `P_w (1 − |z|²)` gradient
    /// integral on a disk sweep.
    PoissonWeighted,
    /// Oscillation against the mean squared cone area function.
    ConeArea,
    /// Star norm, Garsia norm and Möbius-orbit norm, pairwise.
    Garsia,
    /// Carleson norms of the gradient measures against the squared star
    /// norm, and the Carleson norm against the Poisson functional.
    Carleson,
    /// Pairings of decomposition-backed functions with BMO witnesses.
    Duality,
    /// Truncated g-function against the area function at the squared level.
    GVsArea,
    /// `H¹_c` bracket against the area and g-function norms.
    H1Area,
    /// Atom validation and the area bound.
    Atoms,
}

impl Study {
    pub const ALL: [Study; 9] = [
        Study::LittlewoodPaley,
        Study::PoissonWeighted,
        Study::ConeArea,
        Study::Garsia,
        Study::Carleson,
        Study::Duality,
        Study::GVsArea,
        Study::H1Area,
        Study::Atoms,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Study::LittlewoodPaley => "littlewood-paley",
            Study::PoissonWeighted => "poisson-weighted",
            Study::ConeArea => "cone-area",
            Study::Garsia => "garsia",
            Study::Carleson => "carleson",
            Study::Duality => "duality",
            Study::GVsArea => "g-vs-area",
            Study::H1Area => "h1-area",
            Study::Atoms => "atoms",
        }
    }

    pub fn default_settings(self) -> StudySettings {
        let analytic = |seed, count| CorpusSpec {
            seed,
            count,
            kind: CorpusKind::AnalyticBandlimited { d: 4, n: 8 },
        };
        let mut s = StudySettings::base(analytic(1, 200));
        match self {
            Study::LittlewoodPaley => s.refine = false,
            Study::PoissonWeighted => s.tolerances.ceiling = 16.0,
            Study::ConeArea => {
                s.corpus = analytic(3, 100);
                s.tolerances.ceiling = 50.0;
            }
            Study::Garsia => s.corpus = analytic(4, 50),
            Study::Carleson => s.corpus = analytic(5, 50),
            Study::Duality => {
                s.corpus = CorpusSpec {
                    seed: 6,
                    count: 50,
                    kind: CorpusKind::Piecewise { d: 2, cells: 8 },
                };
                s.refine = false;
            }
            Study::GVsArea => {
                s.corpus = analytic(7, 100);
                s.n_t = 16;
            }
            Study::H1Area => s.corpus = analytic(8, 100),
            Study::Atoms => {
                s.corpus = CorpusSpec {
                    seed: 9,
                    count: 500,
                    kind: CorpusKind::Atoms { d: 4, cells: 6 },
                };
                s.refine = false;
            }
        }
        s
    }
}

impl fmt::Display for Study {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Study {
    type Err = Error;

    fn from_str(s: &str) -> Result<Study> {
        Study::ALL
            .into_iter()
            .find(|st| st.name() == s)
            .ok_or_else(|| invalid("study", format!("unknown study `{s}`")))
    }
}

/// Hard-assertion thresholds.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    /// `|ratio − 1|` for identities.
    pub identity: f64,
    /// Envelopes must lie in `[1/ceiling, ceiling]`.
    pub ceiling: f64,
    /// Largest relative drift of the envelope ends under refinement.
    pub stability: f64,
    /// Relative slack in the duality bound.
    pub duality: f64,
    /// Relative slack in `lower ≤ upper`.
    pub bracket: f64,
    /// PSD checks: minimum eigenvalue `≥ −psd·(1 + ‖·‖)`.
    pub psd: f64,
    /// Absolute slack in node-wise `ν ≤ 2λ`.
    pub node: f64,
    /// Slack in `∫‖a‖₁ dm ≤ 1`.
    pub atom_l1: f64,
    /// Ceiling for `‖A_c(a)‖_{L¹}` over atoms.
    pub atom_area: f64,
    /// Factor applied to the calibrated `C²` before the held-out check.
    pub calibration_margin: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            identity: 1e-9,
            ceiling: 100.0,
            stability: 0.05,
            duality: 1e-9,
            bracket: 1e-10,
            psd: 1e-10,
            node: 1e-9,
            atom_l1: 1e-10,
            atom_area: 100.0,
            calibration_margin: 2.0,
        }
    }
}

impl Tolerances {
    pub fn validate(&self) -> Result<()> {
        let all = [
            ("identity", self.identity),
            ("ceiling", self.ceiling),
            ("stability", self.stability),
            ("duality", self.duality),
            ("bracket", self.bracket),
            ("psd", self.psd),
            ("node", self.node),
            ("atom_l1", self.atom_l1),
            ("atom_area", self.atom_area),
            ("calibration_margin", self.calibration_margin),
        ];
        for (name, v) in all {
            if !(v > 0.0 && v.is_finite()) {
                return Err(invalid("tolerances", format!("`{name}` must be positive and finite, got {v}")));
            }
        }
        if self.ceiling < 1.0 {
            return Err(invalid("tolerances", "`ceiling` must be at least 1"));
        }
        if self.calibration_margin < 1.0 {
            return Err(invalid("tolerances", "`calibration_margin` must be at least 1"));
        }
        Ok(())
    }
}

/// Polar sweep of disk points, `radii × angles` with radii evenly spaced
/// on `[0, r_max]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiskSweep {
    pub radii: usize,
    pub angles: usize,
    pub r_max: f64,
}

impl DiskSweep {
    fn points(&self) -> Result<Vec<DiskPoint>> {
        disk_sweep(self.radii, self.angles, self.r_max)
    }

    fn refined(&self) -> DiskSweep {
        DiskSweep {
            radii: 2 * self.radii,
            angles: 2 * self.angles,
            r_max: self.r_max,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MobiusSpec {
    pub radii: usize,
    pub angles: usize,
    pub r_max: f64,
    pub gammas: Vec<f64>,
}

impl MobiusSpec {
    fn grid(&self) -> Result<MobiusGrid> {
        MobiusGrid::polar(self.radii, self.angles, self.r_max, self.gammas.clone())
    }

    fn refined(&self) -> MobiusSpec {
        MobiusSpec {
            radii: 2 * self.radii,
            angles: 2 * self.angles,
            ..self.clone()
        }
    }
}

/// Extra BMO witnesses: `count` general band-limited functions of degree
/// at most `n` for every dimension up to the corpus maximum.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WitnessSpec {
    pub seed: u64,
    pub count: usize,
    pub n: usize,
}

/// Everything a study run depends on. Fields a study does not use are
/// ignored by it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudySettings {
    pub corpus: CorpusSpec,
    /// Cone aperture.
    pub alpha: f64,
    /// Angular samples for square-function integrals over the circle.
    pub n_t: usize,
    pub grid: GridSpec,
    pub cone: ConeConfig,
    pub measure: MeasureConfig,
    pub tubes: TubeGrid,
    /// Disk points `w` for the weighted identities.
    pub disk: DiskSweep,
    /// Radii of the Poisson-functional grid; its angles follow the measure.
    pub poisson_radii: usize,
    pub poisson_r_max: f64,
    pub mobius: MobiusSpec,
    pub witnesses: WitnessSpec,
    /// Levels of the dyadic decomposition backing the duality study.
    pub dyadic_levels: u32,
    /// Truncation radii `δ` for the g-function.
    pub deltas: Vec<f64>,
    /// Also run at refined resolution and check envelope drift.
    pub refine: bool,
    pub tolerances: Tolerances,
}

impl StudySettings {
    fn base(corpus: CorpusSpec) -> Self {
        StudySettings {
            corpus,
            alpha: 2.0,
            n_t: 64,
            grid: GridSpec::default(),
            cone: ConeConfig::default(),
            measure: MeasureConfig::default(),
            tubes: TubeGrid::default(),
            disk: DiskSweep {
                radii: 5,
                angles: 8,
                r_max: 0.9,
            },
            poisson_radii: 24,
            poisson_r_max: 0.95,
            mobius: MobiusSpec {
                radii: 6,
                angles: 16,
                r_max: 0.99,
                gammas: vec![0.5, 0.75, 0.9, 0.95, 0.99, 0.999],
            },
            witnesses: WitnessSpec { seed: 1000, count: 20, n: 8 },
            dyadic_levels: 4,
            deltas: vec![0.5, 0.9, 1.0],
            refine: true,
            tolerances: Tolerances::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.corpus.validate()?;
        self.tolerances.validate()?;
        if !(self.alpha > 1.0) {
            return Err(invalid("alpha", format!("must exceed 1, got {}", self.alpha)));
        }
        if self.n_t == 0 || self.poisson_radii == 0 || self.witnesses.count == 0 {
            return Err(invalid("settings", "sample counts must be positive"));
        }
        if !(self.disk.r_max >= 0.0 && self.disk.r_max < 1.0) || !(self.poisson_r_max >= 0.0 && self.poisson_r_max < 1.0) {
            return Err(invalid("settings", "disk sweeps must stay inside the disk"));
        }
        if self.deltas.is_empty() || self.deltas.iter().any(|d| !(*d > 0.0 && *d <= 1.0)) {
            return Err(invalid("deltas", "need truncation radii in (0, 1]"));
        }
        Ok(())
    }

    /// Every resolution parameter doubled.
    pub fn refined(&self) -> StudySettings {
        StudySettings {
            n_t: 2 * self.n_t,
            grid: self.grid.refined(),
            cone: self.cone.refined(),
            measure: self.measure.refined(),
            tubes: self.tubes.refined(),
            disk: self.disk.refined(),
            poisson_radii: 2 * self.poisson_radii,
            mobius: self.mobius.refined(),
            ..self.clone()
        }
    }

    fn context(&self, witnesses: Vec<CircleFun>) -> Result<FunctionalContext> {
        let mut ctx = FunctionalContext::new(NormSearchGrid::from_spec(&self.grid)?);
        ctx.alpha = self.alpha;
        ctx.n_t = self.n_t;
        ctx.mobius = self.mobius.grid()?;
        ctx.cone = self.cone;
        ctx.measure = self.measure;
        ctx.tubes = self.tubes;
        ctx.poisson = PoissonGrid::uniform(self.poisson_radii, self.poisson_r_max, self.measure.angles)?;
        ctx.set_witnesses(witnesses)?;
        Ok(ctx)
    }

    fn witness_corpus(&self) -> Result<Corpus> {
        let d = self.corpus.kind.max_dim();
        corpus_generate(&CorpusSpec {
            seed: self.witnesses.seed,
            count: self.witnesses.count * d,
            kind: CorpusKind::GeneralBandlimited { d, n: self.witnesses.n },
        })
    }
}

/// Report under construction.
struct Builder {
    study: Study,
    settings: StudySettings,
    ratios: Vec<RatioReport>,
    stats: BTreeMap<String, f64>,
    checks: Vec<Check>,
}

impl Builder {
    fn new(study: Study, settings: &StudySettings) -> Self {
        Builder {
            study,
            settings: settings.clone(),
            ratios: Vec::new(),
            stats: BTreeMap::new(),
            checks: Vec::new(),
        }
    }

    fn check(&mut self, name: &str, passed: bool, detail: impl Into<String>) {
        self.checks.push(Check::new(name, passed, detail));
    }

    fn stat(&mut self, name: &str, value: f64) {
        self.stats.insert(name.to_string(), value);
    }

    /// Envelope exists, no item failed, and the envelope sits inside
    /// `[1/ceiling, ceiling]`.
    fn check_envelope(&mut self, r: &RatioReport, ceiling: Option<f64>) {
        let name = format!("{} [{}]", r.pair(), r.level);
        let Some(e) = r.envelope else {
            self.check(&format!("{name} envelope"), false, "no finite ratios");
            return;
        };
        self.check(
            &format!("{name} finite"),
            r.failed == 0,
            format!("{} failed, {} below floor", r.failed, r.excluded),
        );
        if let Some(c) = ceiling {
            self.check(
                &format!("{name} within ceiling"),
                e.within(1.0 / c, c),
                format!("[{:.6e}, {:.6e}] against [{:.6e}, {:.6e}]", e.min, e.max, 1.0 / c, c),
            );
        }
    }

    fn check_identity(&mut self, r: &RatioReport, tol: f64) {
        let worst = r
            .rows
            .iter()
            .filter_map(|row| row.ratio)
            .map(|v| (v - 1.0).abs())
            .fold(0.0, f64::max);
        self.stat(&format!("max |ratio - 1| {}", r.pair()), worst);
        self.check(
            &format!("{} identity", r.pair()),
            r.failed == 0 && r.envelope.is_some() && worst <= tol,
            format!("max |ratio - 1| = {worst:.3e}, tolerance {tol:.1e}, {} failed", r.failed),
        );
    }

    /// Pairs `base` and `refined` reports by position.
    fn check_stability(&mut self, base: &[RatioReport], refined: &[RatioReport]) {
        let tol = self.settings.tolerances.stability;
        for (b, r) in base.iter().zip(refined) {
            let name = format!("{} stable", b.pair());
            match (b.envelope, r.envelope) {
                (Some(eb), Some(er)) => {
                    let drift = eb.drift(&er);
                    self.stat(&format!("drift {}", b.pair()), drift);
                    self.check(&name, drift < tol, format!("envelope ends drift {drift:.3e}, tolerance {tol}"));
                }
                _ => self.check(&name, false, "envelope missing at one level"),
            }
        }
    }

    fn finish(self, corpus: &Corpus) -> StudyReport {
        let mut witnesses = Vec::new();
        for r in self.ratios.iter().filter(|r| r.level == "base") {
            let Some(e) = r.envelope else { continue };
            for (end, (item, sub)) in [("min", e.argmin), ("max", e.argmax)] {
                if let Some(it) = corpus.items.get(item) {
                    witnesses.push(WitnessItem {
                        pair: r.pair(),
                        level: r.level.clone(),
                        end: end.to_string(),
                        item,
                        sub,
                        function: FunctionDoc::from(&it.function),
                    });
                }
            }
        }
        let timestamp = std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        StudyReport {
            study: self.study.name().to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            timestamp,
            seed: self.settings.corpus.seed,
            settings: serde_json::to_value(&self.settings).expect("settings serialize"),
            ratios: self.ratios,
            stats: self.stats,
            checks: self.checks,
            witnesses,
        }
    }
}

pub fn run_study(study: Study, settings: &StudySettings) -> Result<StudyReport> {
    settings.validate()?;
    let corpus = corpus_generate(&settings.corpus)?;
    let mut b = Builder::new(study, settings);
    match study {
        Study::LittlewoodPaley => littlewood_paley(&mut b, &corpus)?,
        Study::PoissonWeighted => poisson_weighted(&mut b, &corpus)?,
        Study::ConeArea => pair_study(&mut b, &corpus, &[(Functional::Oscillation, Functional::ConeArea)], true)?,
        Study::Garsia => garsia(&mut b, &corpus)?,
        Study::Carleson => carleson(&mut b, &corpus)?,
        Study::Duality => duality(&mut b, &corpus)?,
        Study::GVsArea => g_vs_area(&mut b, &corpus)?,
        Study::H1Area => h1_area(&mut b, &corpus)?,
        Study::Atoms => atoms(&mut b, &corpus)?,
    }
    Ok(b.finish(&corpus))
}

/// Ratio pairs at base and (optionally) refined resolution, with envelope
/// and stability checks.
fn pair_study(b: &mut Builder, corpus: &Corpus, pairs: &[(Functional, Functional)], ceiling: bool) -> Result<()> {
    let s = b.settings.clone();
    let witnesses = match pairs.iter().any(|(x, y)| *x == Functional::H1Lower || *y == Functional::H1Lower) {
        true => s.witness_corpus()?.items.into_iter().map(|i| i.function).collect(),
        false => Vec::new(),
    };
    let ceiling = ceiling.then_some(s.tolerances.ceiling);
    let base = ratio_studies(pairs, corpus.functions(), &s.context(witnesses.clone())?, "base");
    for r in &base {
        b.check_envelope(r, ceiling);
    }
    if s.refine {
        let refined = ratio_studies(pairs, corpus.functions(), &s.refined().context(witnesses)?, "refined");
        for r in &refined {
            b.check_envelope(r, ceiling);
        }
        b.check_stability(&base, &refined);
        b.ratios.extend(base);
        b.ratios.extend(refined);
    } else {
        b.ratios.extend(base);
    }
    Ok(())
}

fn trace_re(m: &ComplexMatrix) -> f64 {
    m.trace().re
}

fn relative_frobenius(a: &ComplexMatrix, b: &ComplexMatrix) -> f64 {
    let scale = a.frobenius_norm().max(b.frobenius_norm());
    if scale == 0.0 {
        0.0
    } else {
        (a - b).frobenius_norm() / scale
    }
}

fn littlewood_paley(b: &mut Builder, corpus: &Corpus) -> Result<()> {
    let tol = b.settings.tolerances.identity;
    let points = b.settings.disk.points()?;
    let mut origin = Vec::new();
    let mut green = Vec::new();
    let mut worst_matrix: f64 = 0.0;
    for (i, f) in corpus.functions().enumerate() {
        let poly = DiskPoly::grad_sq(f);
        let value = poly.as_ref().map_err(Clone::clone).and_then(|p| {
            let c = f.mean_removed();
            let lhs = crate::circfun::l2_pairing(&c, &c)?;
            let rhs = p.integrate(RadialWeight::LogInverse).scale_real(1.0 / PI);
            worst_matrix = worst_matrix.max(relative_frobenius(&lhs, &rhs));
            Ok((trace_re(&lhs), trace_re(&rhs)))
        });
        origin.push(Entry::new(i, 0, value));
        for (j, &w) in points.iter().enumerate() {
            let value = poly.as_ref().map_err(Clone::clone).map(|p| {
                let lhs = poisson_oscillation(f, w).into_matrix();
                let rhs = p.integrate_green(w.z()).scale_real(1.0 / PI);
                worst_matrix = worst_matrix.max(relative_frobenius(&lhs, &rhs));
                (trace_re(&lhs), trace_re(&rhs))
            });
            green.push(Entry::new(i, j, value));
        }
    }
    let origin = RatioReport::from_entries("oscillation", "log-gradient", "base", origin);
    let green = RatioReport::from_entries("poisson-oscillation", "green-gradient", "base", green);
    b.check_identity(&origin, tol);
    b.check_identity(&green, tol);
    b.stat("max relative matrix error", worst_matrix);
    b.ratios.push(origin);
    b.ratios.push(green);

    // f(z) = z: both sides equal 1.
    let z = CircleFun::monomial(1, ComplexMatrix::identity(1));
    let c = z.mean_removed();
    let lhs = trace_re(&crate::circfun::l2_pairing(&c, &c)?);
    let rhs = trace_re(&DiskPoly::grad_sq(&z)?.integrate(RadialWeight::LogInverse)) / PI;
    b.check(
        "f(z) = z sides equal 1",
        (lhs - 1.0).abs() <= 1e-12 && (rhs - 1.0).abs() <= 1e-12,
        format!("lhs {lhs:.15}, rhs {rhs:.15}"),
    );
    Ok(())
}

fn weighted_entries(corpus: &Corpus, points: &[DiskPoint]) -> Vec<Entry> {
    let mut out = Vec::new();
    for (i, f) in corpus.functions().enumerate() {
        let poly = DiskPoly::grad_sq(f);
        for (j, &w) in points.iter().enumerate() {
            let value = poly.as_ref().map_err(Clone::clone).map(|p| {
                let lhs = poisson_oscillation(f, w).trace();
                let rhs = trace_re(&p.integrate_mobius_weight(w.z()));
                (lhs, rhs)
            });
            out.push(Entry::new(i, j, value));
        }
    }
    out
}

fn poisson_weighted(b: &mut Builder, corpus: &Corpus) -> Result<()> {
    let s = b.settings.clone();
    let ceiling = Some(s.tolerances.ceiling);
    let (x, y) = ("poisson-oscillation", "mobius-gradient");
    let base = RatioReport::from_entries(x, y, "base", weighted_entries(corpus, &s.disk.points()?));
    b.check_envelope(&base, ceiling);
    if s.refine {
        let refined = RatioReport::from_entries(x, y, "refined", weighted_entries(corpus, &s.disk.refined().points()?));
        b.check_envelope(&refined, ceiling);
        b.check_stability(std::slice::from_ref(&base), std::slice::from_ref(&refined));
        b.ratios.push(base);
        b.ratios.push(refined);
    } else {
        b.ratios.push(base);
    }
    Ok(())
}

fn garsia(b: &mut Builder, corpus: &Corpus) -> Result<()> {
    use Functional::{Garsia, MobiusOrbit, Star};
    pair_study(b, corpus, &[(Star, Garsia), (Star, MobiusOrbit), (Garsia, MobiusOrbit)], true)?;

    // Scalar f(t) = t: the supremum 1 − |w|² is attained at the origin.
    let spec = b.settings.grid;
    let grid = NormSearchGrid::from_spec(&spec)?;
    let z = CircleFun::monomial(1, ComplexMatrix::identity(1));
    let value = garsia_norm(&z, &grid)?.value;
    let radii = chebyshev_radii(spec.disk_radii, spec.r_max);
    let resolution = radii.windows(2).map(|w| w[1] - w[0]).fold(1.0 - spec.r_max, f64::max);
    b.stat("garsia of t", value);
    b.check(
        "garsia of t equals 1",
        (value - 1.0).abs() <= 2.0 * resolution,
        format!("value {value:.15}, allowance {:.3e}", 2.0 * resolution),
    );
    Ok(())
}

fn carleson(b: &mut Builder, corpus: &Corpus) -> Result<()> {
    use Functional::{CarlesonLog, CarlesonPoisson, PoissonFunctional, StarSquared};
    pair_study(
        b,
        corpus,
        &[(StarSquared, CarlesonPoisson), (StarSquared, CarlesonLog), (PoissonFunctional, CarlesonPoisson)],
        true,
    )?;

    // ν_f ≤ 2λ_f node by node: 1 − r² ≤ 2 log(1/r).
    let tol = b.settings.tolerances.node;
    let config = b.settings.measure;
    let mut worst = f64::INFINITY;
    let mut failures = 0;
    for f in corpus.functions() {
        let nu = measure_from_gradient(f, MeasureWeight::Poisson, &config)?;
        let lambda = measure_from_gradient(f, MeasureWeight::Log, &config)?;
        for (n, l) in nu.weights().iter().zip(lambda.weights()) {
            let diff = &l.as_matrix().scale_real(2.0) - n.as_matrix();
            let m = diff.eigenvalues_h()?.into_iter().fold(f64::INFINITY, f64::min);
            worst = worst.min(m);
            if m < -tol {
                failures += 1;
            }
        }
    }
    b.stat("min eigenvalue 2 lambda - nu", worst);
    b.check(
        "nu <= 2 lambda node-wise",
        failures == 0,
        format!("{failures} nodes below -{tol:.1e}; smallest eigenvalue {worst:.3e}"),
    );
    Ok(())
}

/// Largest `c` with `c·a − g` singular, restricted to the range of `a`:
/// the smallest `C²` for which `g ≤ C² a` on that range.
pub fn relative_bound(g: &PsdMatrix, a: &PsdMatrix) -> Result<f64> {
    let (values, vectors) = a.as_matrix().eigh()?;
    let top = values.iter().copied().fold(0.0, f64::max);
    let keep: Vec<usize> = (0..values.len()).filter(|&k| values[k] > 1e-12 * top).collect();
    if keep.is_empty() {
        return Ok(if g.op_norm() > 0.0 { f64::INFINITY } else { 0.0 });
    }
    let gm = g.as_matrix().as_nalgebra();
    let n = keep.len();
    let reduced = ComplexMatrix::from_fn(n, |i, j| {
        let (vi, vj) = (vectors.column(keep[i]), vectors.column(keep[j]));
        let s = (vi.adjoint() * gm * vj)[(0, 0)];
        s / (values[keep[i]] * values[keep[j]]).sqrt()
    });
    Ok(reduced.hermitian_part().eigenvalues_h()?.into_iter().fold(0.0, f64::max))
}

struct Domination {
    trace_entries: Vec<Entry>,
    c_max: f64,
}

fn domination_sweep(corpus: &Corpus, s: &StudySettings) -> Result<Domination> {
    let angles = uniform_angles(s.n_t);
    let mut trace_entries = Vec::new();
    let mut c_max: f64 = 0.0;
    for (i, f) in corpus.functions().enumerate() {
        for (k, &delta) in s.deltas.iter().enumerate() {
            let area = AreaFunction::new(f, s.alpha, 0.5 * (1.0 + delta), &s.cone);
            for (j, &t) in angles.iter().enumerate() {
                let value = area.as_ref().map_err(Clone::clone).and_then(|area| {
                    let a2 = area.squared(t);
                    let g2 = g_fun_squared(f, t, delta, &s.cone)?;
                    c_max = c_max.max(relative_bound(&g2, &a2)?);
                    Ok((a2.trace(), g2.trace()))
                });
                trace_entries.push(Entry::new(i, k * angles.len() + j, value));
            }
        }
    }
    Ok(Domination { trace_entries, c_max })
}

fn g_vs_area(b: &mut Builder, corpus: &Corpus) -> Result<()> {
    let s = b.settings.clone();
    let tol = s.tolerances;
    let (x, y) = ("area-squared", "g-squared");

    let base = domination_sweep(corpus, &s)?;
    let base_report = RatioReport::from_entries(x, y, "base", base.trace_entries);
    b.check_envelope(&base_report, None);
    let c2 = tol.calibration_margin * base.c_max;
    b.stat("calibration max relative bound", base.c_max);
    b.stat("calibrated C^2", c2);
    b.stat("calibrated C", c2.sqrt());

    // Held-out corpus: same generator, next seed.
    let held_out = corpus_generate(&s.corpus.with_seed(s.corpus.seed.wrapping_add(1)))?;
    let angles = uniform_angles(s.n_t);
    let (mut failures, mut checked) = (0usize, 0usize);
    let mut worst: f64 = f64::INFINITY;
    let mut held_max: f64 = 0.0;
    for f in held_out.functions() {
        for &delta in &s.deltas {
            let area = AreaFunction::new(f, s.alpha, 0.5 * (1.0 + delta), &s.cone)?;
            for &t in &angles {
                let a2 = area.squared(t);
                let g2 = g_fun_squared(f, t, delta, &s.cone)?;
                held_max = held_max.max(relative_bound(&g2, &a2)?);
                let scaled = a2.as_matrix().scale_real(c2);
                let diff = &scaled - g2.as_matrix();
                let m = diff.eigenvalues_h()?.into_iter().fold(f64::INFINITY, f64::min);
                let allowance = tol.psd * (1.0 + scaled.op_norm());
                worst = worst.min(m / (1.0 + scaled.op_norm()));
                checked += 1;
                if m < -allowance {
                    failures += 1;
                }
            }
        }
    }
    b.stat("held-out max relative bound", held_max);
    b.check(
        "squared domination with calibrated C",
        failures == 0,
        format!("{failures} of {checked} held-out samples violate; worst scaled eigenvalue {worst:.3e}"),
    );

    if s.refine {
        let refined_settings = s.refined();
        let refined = domination_sweep(corpus, &refined_settings)?;
        let refined_report = RatioReport::from_entries(x, y, "refined", refined.trace_entries);
        b.check_envelope(&refined_report, None);
        b.stat("refined calibration max relative bound", refined.c_max);
        b.check_stability(std::slice::from_ref(&base_report), std::slice::from_ref(&refined_report));
        b.ratios.push(base_report);
        b.ratios.push(refined_report);
    } else {
        b.ratios.push(base_report);
    }

    // g_c(z)(t) = (∫_0^1 2(1 − r²) dr)^{1/2} = 2/√3.
    let z = CircleFun::monomial(1, ComplexMatrix::identity(1));
    let g = g_fun(&z, 0.7, 1.0)?.trace();
    let expected = 2.0 / 3f64.sqrt();
    b.check(
        "g-function of z equals 2/sqrt(3)",
        (g - expected).abs() <= 1e-12,
        format!("value {g:.15}, expected {expected:.15}"),
    );
    Ok(())
}

fn h1_area(b: &mut Builder, corpus: &Corpus) -> Result<()> {
    use Functional::{AreaH1, GH1, H1Lower, H1Upper};
    pair_study(b, corpus, &[(H1Upper, AreaH1), (H1Lower, AreaH1), (H1Upper, GH1)], false)?;

    let tol = b.settings.tolerances.bracket;
    let (mut violations, mut worst) = (0usize, 0.0f64);
    let ratios: Vec<_> = b.ratios.iter().filter(|r| r.level == "base").cloned().collect();
    let upper = ratios.iter().find(|r| r.x == H1Upper.name() && r.y == AreaH1.name());
    let lower = ratios.iter().find(|r| r.x == H1Lower.name() && r.y == AreaH1.name());
    if let (Some(u), Some(l)) = (upper, lower) {
        for (ru, rl) in u.rows.iter().zip(&l.rows) {
            if let (Some(up), Some(lo)) = (ru.x, rl.x) {
                worst = worst.max(lo / up);
                if lo > (1.0 + tol) * up {
                    violations += 1;
                }
            }
        }
    }
    b.stat("max lower/upper", worst);
    b.check("lower <= upper", violations == 0, format!("{violations} items; max lower/upper {worst:.6}"));

    // f = g + h with g analytic and h the adjoint of an analytic function.
    let s = b.settings.clone();
    let d = s.corpus.kind.max_dim();
    let angles = uniform_angles(s.n_t);
    let (mut max_c, mut max_r, mut pairs, mut ok) = (0.0f64, 0.0f64, 0usize, true);
    for i in 0..corpus.len().min(10) {
        // Same dimension, disjoint from the first ten items.
        let Some(other) = corpus.items.get(i + 10 * d) else { break };
        let g = &corpus.items[i].function;
        let h = other.function.mean_removed().adjoint();
        let f = g.add(&h)?;
        let residual = f.sub(g)?.sub(&h)?;
        let sample = |u: &CircleFun| -> Result<f64> {
            let area = AreaFunction::new(u, s.alpha, 1.0, &s.cone)?;
            let samples = angles.iter().map(|&t| area.eval(t)).collect::<Result<Vec<_>>>()?;
            Ok(sq_l1_norm(&samples))
        };
        let ac = sample(g)?;
        let ar = sample(&h.adjoint())?;
        ok &= ac.is_finite() && ar.is_finite() && residual.mean().is_zero();
        max_c = max_c.max(ac);
        max_r = max_r.max(ar);
        pairs += 1;
    }
    b.stat("splitting max column area L1", max_c);
    b.stat("splitting max row area L1", max_r);
    b.check(
        "splitting witnesses finite",
        ok && pairs > 0,
        format!("{pairs} splittings; max column {max_c:.6e}, max row {max_r:.6e}"),
    );
    Ok(())
}

fn duality(b: &mut Builder, corpus: &Corpus) -> Result<()> {
    let s = b.settings.clone();
    let tol = s.tolerances;
    let grid = NormSearchGrid::from_spec(&s.grid)?;
    let witness_corpus = s.witness_corpus()?;
    let witnesses: Vec<&CircleFun> = witness_corpus.functions().collect();
    // BMO norms over the base grid, extended per function by the supports
    // of its atoms.
    let base_bmo = witnesses
        .iter()
        .map(|g| bmo_c_norm(g, &grid))
        .collect::<Result<Vec<_>>>()?;
    let scheme = Scheme::Dyadic(s.dyadic_levels);

    let mut entries = Vec::new();
    let (mut violations, mut min_slack) = (0usize, f64::INFINITY);
    let (mut bracket_violations, mut worst_bracket) = (0usize, 0.0f64);
    for (i, f) in corpus.functions().enumerate() {
        let backed = Backed::new(f, scheme)?;
        let arcs = backed.support_arcs();
        let mut sub = 0;
        let mut matching = Vec::new();
        for (g, base) in witnesses.iter().zip(&base_bmo) {
            if g.dim() != f.dim() {
                continue;
            }
            matching.push(((*g).clone(), *base));
            let bmo = augmented_bmo(g, base, &arcs)?;
            let report = DualityReport::new(pairing(f, g)?, bmo, backed.upper, tol.duality);
            min_slack = min_slack.min(report.slack);
            if !report.holds {
                violations += 1;
            }
            entries.push(Entry::new(i, sub, Ok((report.bmo * report.upper, report.pairing.norm()))).with_aux(report.pairing));
            sub += 1;
        }
        let lower = lower_bound_with(f, &matching, &grid, &arcs)?;
        worst_bracket = worst_bracket.max(lower / backed.upper);
        if lower > (1.0 + tol.bracket) * backed.upper {
            bracket_violations += 1;
        }
    }
    let report = RatioReport::from_entries("bmo-times-upper", "pairing", "base", entries);
    b.check_envelope(&report, None);
    b.check(
        "pairing bound",
        violations == 0 && report.failed == 0,
        format!("{violations} violations over {} pairs; min slack {min_slack:.3e}", report.rows.len()),
    );
    b.stat("min slack", min_slack);
    b.stat("max lower/upper", worst_bracket);
    b.check(
        "lower <= upper",
        bracket_violations == 0,
        format!("{bracket_violations} items; max lower/upper {worst_bracket:.6}"),
    );
    b.ratios.push(report);
    Ok(())
}

fn atoms(b: &mut Builder, corpus: &Corpus) -> Result<()> {
    let s = b.settings.clone();
    let tol = s.tolerances;
    let angles = uniform_angles(s.n_t);
    let (mut invalid_atoms, mut global) = (0usize, 0usize);
    let (mut max_l1, mut max_area) = (0.0f64, 0.0f64);
    let mut l1_entries = Vec::new();
    let mut area_entries = Vec::new();
    for (i, item) in corpus.items.iter().enumerate() {
        let Some(atom) = &item.atom else {
            return Err(invalid("corpus", "the atom study needs an atom corpus"));
        };
        let report = validate_atom(atom);
        if !report.ok {
            invalid_atoms += 1;
        }
        if report.global {
            global += 1;
        }
        max_l1 = max_l1.max(report.l1_norm);
        l1_entries.push(Entry::new(i, 0, Ok((1.0, report.l1_norm))));
        let area = AreaFunction::new(atom.data(), s.alpha, 1.0, &s.cone).and_then(|area| {
            let samples = angles.iter().map(|&t| area.eval(t)).collect::<Result<Vec<_>>>()?;
            Ok(sq_l1_norm(&samples))
        });
        if let Ok(v) = area {
            max_area = max_area.max(v);
        }
        area_entries.push(Entry::new(i, 0, area.map(|v| (1.0, v))));
    }
    let l1 = RatioReport::from_entries("unit", "atom-l1", "base", l1_entries);
    let area = RatioReport::from_entries("unit", "atom-area-l1", "base", area_entries);
    b.check("atoms valid", invalid_atoms == 0, format!("{invalid_atoms} of {} atoms invalid", corpus.len()));
    b.check(
        "atom l1 bound",
        max_l1 <= 1.0 + tol.atom_l1,
        format!("max {max_l1:.15}, bound 1 + {:.1e}", tol.atom_l1),
    );
    b.check(
        "atom area bound",
        area.failed == 0 && max_area <= tol.atom_area,
        format!("max {max_area:.6e}, ceiling {}; {} failed", tol.atom_area, area.failed),
    );
    b.stat("max atom l1", max_l1);
    b.stat("max atom area L1", max_area);
    b.stat("global atoms", global as f64);
    b.ratios.push(l1);
    b.ratios.push(area);
    Ok(())
}
