//! Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any
//! criterion fails. Runs the full-size studies; expect a few minutes.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use ncharm_core::circfun::{l2_pairing, lp_c_norm, trace_function, CircleFun, Repr};
use ncharm_core::opalg::{schatten_norm, ComplexMatrix};
use ncharm_core::verify::corpus::{gaussian_matrix, item_rng};
use ncharm_core::verify::{corpus_generate, run_study, CorpusKind, CorpusSpec, Study, StudyReport, StudySettings};
use rand::Rng;

const LP_BUDGET: Duration = Duration::from_secs(30);
const DRAWS: usize = 1000;
const SLACK: f64 = 1e-10;
const HOLDER_EXPONENTS: [(f64, f64, f64); 4] = [(2.0, 2.0, 1.0), (1.0, f64::INFINITY, 1.0), (4.0, 4.0, 2.0), (3.0, 6.0, 2.0)];

type Verdict = Result<(bool, String), String>;

fn err(e: impl std::fmt::Display) -> String {
    e.to_string()
}

fn study(s: Study) -> Result<(StudyReport, Duration), String> {
    let start = Instant::now();
    let report = run_study(s, &s.default_settings()).map_err(err)?;
    Ok((report, start.elapsed()))
}

fn failed_checks(r: &StudyReport) -> String {
    let failed: Vec<String> = r.checks.iter().filter(|c| !c.passed).map(|c| format!("{}: {}", c.name, c.detail)).collect();
    if failed.is_empty() {
        String::new()
    } else {
        format!("; failed: {}", failed.join(" | "))
    }
}

fn envelope(r: &StudyReport, x: &str, y: &str, level: &str) -> String {
    match r.ratio(x, y, level).and_then(|r| r.envelope) {
        Some(e) => format!("{y}/{x} [{level}] in [{:.4}, {:.4}]", e.min, e.max),
        None => format!("{y}/{x} [{level}] missing"),
    }
}

fn stat(r: &StudyReport, name: &str) -> f64 {
    r.stats.get(name).copied().unwrap_or(f64::NAN)
}

fn analytic_corpus(s: &StudySettings, count: usize, max_d: usize, max_n: usize) -> bool {
    s.corpus.count == count && matches!(s.corpus.kind, CorpusKind::AnalyticBandlimited { d, n } if d <= max_d && n <= max_n)
}

fn littlewood_paley(r: &StudyReport, took: Duration) -> Verdict {
    let s = Study::LittlewoodPaley.default_settings();
    let sized = analytic_corpus(&s, 200, 4, 8) && s.tolerances.identity <= 1e-9;
    let closed = r.check("f(z) = z sides equal 1").map(|c| c.passed).unwrap_or(false);
    let worst = r
        .stats
        .iter()
        .filter(|(k, _)| k.starts_with("max |ratio - 1|"))
        .map(|(_, v)| *v)
        .fold(0.0, f64::max);
    Ok((
        r.passed() && sized && closed && took <= LP_BUDGET,
        format!("max |ratio - 1| {worst:.2e}; f(z) = z {}; {:.2}s{}", if closed { "ok" } else { "missing" }, took.as_secs_f64(), failed_checks(r)),
    ))
}

fn poisson_weighted(r: &StudyReport) -> Verdict {
    let s = Study::PoissonWeighted.default_settings();
    let grid = s.disk.radii == 5 && s.disk.angles == 8 && s.disk.r_max <= 0.9;
    let limits = s.tolerances.ceiling <= 16.0 && s.tolerances.stability <= 0.05 && s.refine;
    let pair = r.ratios.first().map(|q| (q.x.clone(), q.y.clone())).unwrap_or_default();
    Ok((
        r.passed() && grid && limits && analytic_corpus(&s, 200, 4, 8),
        format!(
            "{}; {}; drift {:.2e}{}",
            envelope(r, &pair.0, &pair.1, "base"),
            envelope(r, &pair.0, &pair.1, "refined"),
            stat(r, &format!("drift {}/{}", pair.1, pair.0)),
            failed_checks(r)
        ),
    ))
}

fn cone_area(r: &StudyReport) -> Verdict {
    let s = Study::ConeArea.default_settings();
    let limits = s.alpha == 2.0 && s.tolerances.ceiling <= 50.0 && s.refine;
    // Witnesses must survive a write and read of the report.
    let path = std::path::Path::new(env!("CARGO_TARGET_TMPDIR")).join("acceptance-cone-area.json");
    std::fs::write(&path, r.to_json()).map_err(err)?;
    let back = StudyReport::from_json(&std::fs::read_to_string(&path).map_err(err)?).map_err(err)?;
    let persisted = !back.witnesses.is_empty()
        && back
            .witnesses
            .iter()
            .all(|w| CircleFun::try_from(w.function.clone()).is_ok());
    Ok((
        r.passed() && limits && persisted,
        format!(
            "{}; {}; {} witnesses persisted{}",
            envelope(r, "oscillation", "cone-area", "base"),
            envelope(r, "oscillation", "cone-area", "refined"),
            back.witnesses.len(),
            failed_checks(r)
        ),
    ))
}

fn random_function(rng: &mut impl Rng, d: usize) -> Result<CircleFun, String> {
    if rng.random::<bool>() {
        let n = rng.random_range(0..=6i64);
        ncharm_core::verify::corpus::random_band_limited(rng, d, -n, n).map_err(err)
    } else {
        let cells = rng.random_range(1..=8usize);
        let spec = CorpusSpec {
            seed: rng.random(),
            count: d,
            kind: CorpusKind::Piecewise { d, cells },
        };
        Ok(corpus_generate(&spec).map_err(err)?.items[d - 1].function.clone())
    }
}

/// `g·I` for scalar `g`.
fn lift(g: &CircleFun, d: usize) -> Result<CircleFun, String> {
    let id = ComplexMatrix::identity(d);
    match g.repr() {
        Repr::BandLimited { coeffs, .. } => CircleFun::band_limited(d, coeffs.iter().map(|a| id.scale(a.get(0, 0))).collect()),
        Repr::PiecewiseConst { partition, values } => {
            CircleFun::piecewise(partition.clone(), values.iter().map(|a| id.scale(a.get(0, 0))).collect())
        }
    }
    .map_err(err)
}

fn matrix_inequalities() -> Verdict {
    // Hölder: relative slack (1+ε)‖X‖_p‖Y‖_q − ‖XY‖_γ over the right side.
    let mut holder = f64::INFINITY;
    for (k, &(p, q, gamma)) in HOLDER_EXPONENTS.iter().enumerate() {
        for i in 0..DRAWS {
            let mut rng = item_rng(100 + k as u64, i);
            let d = rng.random_range(1..=6);
            let x = gaussian_matrix(&mut rng, d, 1.0);
            let mut y = gaussian_matrix(&mut rng, d, 1.0);
            if rng.random_bool(0.25) {
                // Rank-deficient right factor.
                let c = gaussian_matrix(&mut rng, 1, 1.0).get(0, 0);
                for r in 0..d {
                    y.set(r, d - 1, y.get(r, 0) * c);
                }
            }
            let lhs = schatten_norm(&(&x * &y), gamma).map_err(err)?;
            let rhs = schatten_norm(&x, p).map_err(err)? * schatten_norm(&y, q).map_err(err)?;
            holder = holder.min(((1.0 + SLACK) * rhs - lhs) / rhs);
        }
    }
    // Operator Cauchy–Schwarz: min eigenvalue of (∫|f|²)(∫|g|²) − |∫fg|².
    let mut cs = f64::INFINITY;
    // (∫|τ(f)|²)^{1/2} against the column L¹ norm, per representation.
    let mut trace_bl = f64::INFINITY;
    let mut trace_pc = f64::INFINITY;
    for i in 0..DRAWS {
        let mut rng = item_rng(200, i);
        let d = rng.random_range(1..=6);
        let f = random_function(&mut rng, d)?;
        let g = random_function(&mut rng, 1)?;
        let ff = l2_pairing(&f, &f).map_err(err)?;
        let gg = l2_pairing(&g, &g).map_err(err)?.get(0, 0).re;
        let fg = l2_pairing(&f.adjoint(), &lift(&g, d)?).map_err(err)?;
        let m = &ff.scale_real(gg) - &fg.ad_mul(&fg);
        let min = m.hermitian_part().eigenvalues_h().map_err(err)?[0];
        cs = cs.min(min / (1.0 + ff.op_norm()));

        let t = trace_function(&f, None).map_err(err)?;
        let lhs = l2_pairing(&t, &t).map_err(err)?.get(0, 0).re.max(0.0).sqrt();
        let rhs = lp_c_norm(&f, 1.0).map_err(err)?;
        let slack = ((1.0 + SLACK) * rhs - lhs) / rhs.max(f64::MIN_POSITIVE);
        if f.is_band_limited() {
            trace_bl = trace_bl.min(slack);
        } else {
            trace_pc = trace_pc.min(slack);
        }
    }
    let trace = trace_bl.min(trace_pc);
    Ok((
        holder >= 0.0 && cs >= -SLACK && trace >= 0.0 && trace_bl.is_finite() && trace_pc.is_finite(),
        format!(
            "{DRAWS} draws each; min relative slack: hölder {holder:.3e}, cauchy-schwarz {cs:.3e}, trace band-limited {trace_bl:.3e}, trace piecewise {trace_pc:.3e}"
        ),
    ))
}

fn atoms(r: &StudyReport) -> Verdict {
    let s = Study::Atoms.default_settings();
    let sized = s.corpus.count == 500 && matches!(s.corpus.kind, CorpusKind::Atoms { d, .. } if d <= 4);
    let limits = s.alpha == 2.0 && s.tolerances.atom_l1 <= 1e-10 && s.tolerances.atom_area <= 100.0;
    Ok((
        r.passed() && sized && limits,
        format!(
            "max atom l1 {:.6}; max atom area L1 {:.6} (baseline){}",
            stat(r, "max atom l1"),
            stat(r, "max atom area L1"),
            failed_checks(r)
        ),
    ))
}

fn duality(r: &StudyReport) -> Verdict {
    let s = Study::Duality.default_settings();
    let sized = s.corpus.count == 50 && s.witnesses.count == 20 && s.tolerances.duality <= 1e-9;
    let pairs: usize = r.ratios.iter().filter(|q| q.level == "base").map(|q| q.rows.len()).sum();
    let bound = r.check("pairing bound").map(|c| c.passed).unwrap_or(false);
    let bracket = r.check("lower <= upper").map(|c| c.passed).unwrap_or(false);
    Ok((
        r.passed() && sized && bound && bracket && pairs >= 1000,
        format!(
            "{pairs} pairs; min slack {:.4}; max lower/upper {:.4}{}",
            stat(r, "min slack"),
            stat(r, "max lower/upper"),
            failed_checks(r)
        ),
    ))
}

fn carleson(r: &StudyReport) -> Verdict {
    let s = Study::Carleson.default_settings();
    let limits = s.tolerances.ceiling <= 100.0 && s.tolerances.node <= 1e-9 && s.refine;
    let pairs = [("star-squared", "carleson-poisson"), ("star-squared", "carleson-log"), ("poisson-functional", "carleson-poisson")];
    let present = pairs.iter().all(|(x, y)| r.ratio(x, y, "base").is_some() && r.ratio(x, y, "refined").is_some());
    let detail: Vec<String> = pairs.iter().map(|(x, y)| envelope(r, x, y, "base")).collect();
    Ok((
        r.passed() && limits && present,
        format!(
            "{}; min eigenvalue 2 lambda - nu {:.2e}{}",
            detail.join("; "),
            stat(r, "min eigenvalue 2 lambda - nu"),
            failed_checks(r)
        ),
    ))
}

fn square_functions(g: &StudyReport, h: &StudyReport) -> Verdict {
    let s = Study::H1Area.default_settings();
    let sized = analytic_corpus(&s, 100, 16, 64) && s.refine;
    let closed = g.checks.iter().any(|c| c.name.starts_with("g-function of z") && c.passed);
    let refined = ["h1-upper", "h1-lower"].iter().all(|x| h.ratio(x, "area-h1", "refined").is_some());
    Ok((
        g.passed() && h.passed() && sized && closed && refined,
        format!(
            "calibrated C {:.4}; held-out max {:.4}; {}; {}{}{}",
            stat(g, "calibrated C"),
            stat(g, "held-out max relative bound"),
            envelope(h, "h1-upper", "area-h1", "base"),
            envelope(h, "h1-lower", "area-h1", "base"),
            failed_checks(g),
            failed_checks(h)
        ),
    ))
}

fn garsia(r: &StudyReport) -> Verdict {
    let s = Study::Garsia.default_settings();
    let limits = s.tolerances.ceiling <= 100.0 && analytic_corpus(&s, 50, 16, 64);
    let closed = r.check("garsia of t equals 1").map(|c| c.passed).unwrap_or(false);
    Ok((
        r.passed() && limits && closed,
        format!(
            "garsia of t {:.6}; {}; {}; {}{}",
            stat(r, "garsia of t"),
            envelope(r, "star", "garsia", "base"),
            envelope(r, "star", "mobius-orbit", "base"),
            envelope(r, "garsia", "mobius-orbit", "base"),
            failed_checks(r)
        ),
    ))
}

/// Default settings for cheap studies; a reduced corpus for the rest.
fn rerun_settings(s: Study) -> StudySettings {
    let mut settings = s.default_settings();
    if matches!(s, Study::Garsia | Study::Carleson | Study::H1Area) {
        settings.corpus.count = 8;
    }
    settings
}

fn determinism(first: &[(Study, String)]) -> Verdict {
    let mut mismatched = Vec::new();
    for s in Study::ALL {
        let settings = rerun_settings(s);
        let reference = match first.iter().find(|(f, _)| *f == s) {
            Some((_, csv)) if settings == s.default_settings() => csv.clone(),
            _ => run_study(s, &settings).map_err(err)?.to_csv().map_err(err)?,
        };
        let again = run_study(s, &settings).map_err(err)?.to_csv().map_err(err)?;
        if again != reference {
            mismatched.push(s.name());
        }
    }
    Ok((
        mismatched.is_empty(),
        if mismatched.is_empty() {
            format!("{} studies byte-identical on rerun", Study::ALL.len())
        } else {
            format!("differ: {}", mismatched.join(", "))
        },
    ))
}

fn report(id: usize, name: &str, verdict: Verdict) -> bool {
    let (passed, detail) = verdict.unwrap_or_else(|e| (false, format!("error: {e}")));
    println!("{} {id:>2} {name}: {detail}", if passed { "PASS" } else { "FAIL" });
    passed
}

fn main() -> ExitCode {
    let mut ok = true;
    let mut csvs: Vec<(Study, String)> = Vec::new();
    let mut keep = |s: Study, r: &StudyReport| {
        if let Ok(csv) = r.to_csv() {
            csvs.push((s, csv));
        }
    };

    let verdict = study(Study::LittlewoodPaley).and_then(|(r, t)| {
        keep(Study::LittlewoodPaley, &r);
        littlewood_paley(&r, t)
    });
    ok &= report(1, "littlewood-paley identity", verdict);

    let verdict = study(Study::PoissonWeighted).and_then(|(r, _)| {
        keep(Study::PoissonWeighted, &r);
        poisson_weighted(&r)
    });
    ok &= report(2, "poisson-weighted equivalence", verdict);

    let verdict = study(Study::ConeArea).and_then(|(r, _)| {
        keep(Study::ConeArea, &r);
        cone_area(&r)
    });
    ok &= report(3, "cone-area equivalence", verdict);

    ok &= report(4, "matrix inequalities", matrix_inequalities());

    let verdict = study(Study::Atoms).and_then(|(r, _)| {
        keep(Study::Atoms, &r);
        atoms(&r)
    });
    ok &= report(5, "atoms", verdict);

    let verdict = study(Study::Duality).and_then(|(r, _)| {
        keep(Study::Duality, &r);
        duality(&r)
    });
    ok &= report(6, "duality", verdict);

    ok &= report(7, "carleson", study(Study::Carleson).and_then(|(r, _)| carleson(&r)));

    let verdict = study(Study::GVsArea).and_then(|(g, _)| {
        keep(Study::GVsArea, &g);
        let (h, _) = study(Study::H1Area)?;
        square_functions(&g, &h)
    });
    ok &= report(8, "square functions", verdict);

    ok &= report(9, "garsia", study(Study::Garsia).and_then(|(r, _)| garsia(&r)));

    ok &= report(10, "determinism", determinism(&csvs));

    if ok {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
