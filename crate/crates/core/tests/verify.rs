use std::f64::consts::{PI, TAU};

use approx::assert_relative_eq;
use ncharm_core::atoms::{Atom, Scheme};
use ncharm_core::circfun::{Arc, CircleFun, Partition};
use ncharm_core::error::Error;
use ncharm_core::norms::{GridSpec, NormSearchGrid};
use ncharm_core::opalg::ComplexMatrix;
use ncharm_core::verify::report::CSV_HEADER;
use ncharm_core::verify::{
    check_duality_bound, corpus_generate, pairing, polar_unitary, ratio_study, run_study, Backed, CorpusKind,
    CorpusSpec, Entry, Functional, FunctionalContext, RatioReport, RowStatus, Study, StudyReport,
};
use ncharm_core::Complex64;
use proptest::prelude::*;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn small_grid() -> NormSearchGrid {
    NormSearchGrid::from_spec(&GridSpec {
        centers: 64,
        levels: 6,
        disk_radii: 6,
        disk_angles: 16,
        ..GridSpec::default()
    })
    .unwrap()
}

fn analytic(seed: u64, count: usize, d: usize, n: usize) -> CorpusSpec {
    CorpusSpec {
        seed,
        count,
        kind: CorpusKind::AnalyticBandlimited { d, n },
    }
}

fn unitary() -> ComplexMatrix {
    let s = 0.5f64.sqrt();
    ComplexMatrix::from_rows(&[vec![c(s, 0.0), c(0.0, s)], vec![c(0.0, s), c(s, 0.0)]]).unwrap()
}

/// `2u(χ_{I₁} − χ_{I₂})` on the halves of `I = [1, 1 + π/2]`.
fn two_step_atom() -> Atom {
    let u = unitary().scale_real(2.0);
    let p = Partition::new(vec![1.0, 1.0 + PI / 4.0, 1.0 + PI / 2.0]).unwrap();
    let f = CircleFun::piecewise(p, vec![u.clone(), u.scale_real(-1.0), ComplexMatrix::zeros(2)]).unwrap();
    Atom::new(Arc::from_interval(1.0, 1.0 + PI / 2.0).unwrap(), f).unwrap()
}

#[test]
fn pairing_examples() {
    let e1 = CircleFun::monomial(1, ComplexMatrix::identity(1));
    assert_relative_eq!(pairing(&e1, &e1).unwrap().re, 1.0, epsilon = 1e-15);
    assert!(pairing(&e1, &e1).unwrap().im.abs() < 1e-15);

    let e2 = CircleFun::monomial(2, ComplexMatrix::identity(1));
    assert!(pairing(&e1, &e2).unwrap().norm() < 1e-15);

    let a = ComplexMatrix::from_rows(&[vec![c(1.0, 2.0), c(0.0, 1.0)], vec![c(-1.0, 0.0), c(3.0, -1.0)]]).unwrap();
    let b = ComplexMatrix::from_rows(&[vec![c(0.5, 0.0), c(2.0, -1.0)], vec![c(0.0, 1.0), c(1.0, 1.0)]]).unwrap();
    let got = pairing(&CircleFun::monomial(1, a.clone()), &CircleFun::monomial(1, b.clone())).unwrap();
    // Tr(b* a) entry by entry.
    let mut expected = c(0.0, 0.0);
    for i in 0..2 {
        for j in 0..2 {
            expected += b.get(i, j).conj() * a.get(i, j);
        }
    }
    assert!((got - expected).norm() < 1e-13);

    assert!(matches!(
        pairing(&e1, &CircleFun::monomial(1, ComplexMatrix::identity(2))),
        Err(Error::DimensionMismatch { .. })
    ));
}

#[test]
fn duality_atom_against_constant_pairs_to_zero() {
    let atom = two_step_atom();
    let f = Backed::new(atom.data(), Scheme::Dyadic(3)).unwrap();
    let g = CircleFun::constant(unitary());
    let report = check_duality_bound(&f, &g, &small_grid(), 1e-9).unwrap();
    assert!(report.pairing.norm() < 1e-14);
    assert!(report.holds);
}

#[test]
fn duality_atom_against_first_mode() {
    let atom = two_step_atom();
    let f = Backed::new(atom.data(), Scheme::Dyadic(3)).unwrap();
    let g = CircleFun::monomial(1, ComplexMatrix::identity(2));
    let report = check_duality_bound(&f, &g, &small_grid(), 1e-9).unwrap();
    // τ(u)·2·(1/2π)(∫_{I₁} − ∫_{I₂}) e^{-iθ} dθ with τ(u) = √2.
    let prim = |t: f64| Complex64::from_polar(1.0, -t) * c(0.0, 1.0);
    let (a, m, b) = (1.0, 1.0 + PI / 4.0, 1.0 + PI / 2.0);
    let expected = (prim(m) - prim(a) - (prim(b) - prim(m))) * (2.0 * 2f64.sqrt() / TAU);
    assert!((report.pairing - expected).norm() < 1e-13, "{} vs {expected}", report.pairing);
    assert!(report.holds);
    assert!(report.slack > 0.0);
}

#[test]
fn duality_zero_function_holds_with_equality() {
    let zero = CircleFun::zero(2);
    let f = Backed::new(&zero, Scheme::Global).unwrap();
    let g = CircleFun::monomial(1, unitary());
    let report = check_duality_bound(&f, &g, &small_grid(), 1e-9).unwrap();
    assert_eq!(report.upper, 0.0);
    assert_eq!(report.pairing.norm(), 0.0);
    assert_eq!(report.slack, 0.0);
    assert!(report.holds);
}

#[test]
fn corpus_is_deterministic_and_respects_kind() {
    let spec = analytic(11, 100, 2, 8);
    let a = corpus_generate(&spec).unwrap();
    let b = corpus_generate(&spec).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.len(), 100);
    for (i, f) in a.functions().enumerate() {
        assert!(f.is_analytic());
        assert!(f.degree().unwrap() <= 8);
        assert_eq!(f.dim(), 1 + i % 2);
        for n in 1..=8 {
            assert!(f.fourier_coeff(-n).is_zero());
        }
    }
    let other = corpus_generate(&spec.with_seed(12)).unwrap();
    assert_ne!(a, other);

    let general = corpus_generate(&CorpusSpec {
        seed: 3,
        count: 10,
        kind: CorpusKind::GeneralBandlimited { d: 3, n: 4 },
    })
    .unwrap();
    assert!(general.functions().any(|f| !f.is_analytic()));

    let pc = corpus_generate(&CorpusSpec {
        seed: 3,
        count: 5,
        kind: CorpusKind::Piecewise { d: 2, cells: 7 },
    })
    .unwrap();
    assert!(pc.functions().all(|f| f.is_piecewise()));

    let atoms = corpus_generate(&CorpusSpec {
        seed: 3,
        count: 20,
        kind: CorpusKind::Atoms { d: 3, cells: 4 },
    })
    .unwrap();
    for item in &atoms.items {
        let atom = item.atom.as_ref().unwrap();
        assert!(ncharm_core::atoms::validate_atom(atom).ok);
        assert_eq!(&item.function, atom.data());
    }
    assert!(Atom::from_json(&atoms.item_json(0)).is_ok());
}

#[test]
fn corpus_rejects_invalid_parameters() {
    for spec in [analytic(1, 0, 2, 4), analytic(1, 5, 0, 4), analytic(1, 5, 17, 4), analytic(1, 5, 2, 65), analytic(1, 5, 2, 0)] {
        assert!(matches!(corpus_generate(&spec), Err(Error::InvalidParameter { .. })), "{spec:?}");
    }
    let atoms = CorpusSpec {
        seed: 1,
        count: 3,
        kind: CorpusKind::Atoms { d: 2, cells: 1 },
    };
    assert!(corpus_generate(&atoms).is_err());
}

#[test]
fn corpus_spec_toml_shape() {
    let spec = analytic(5, 10, 3, 6);
    let json = serde_json::to_value(spec).unwrap();
    assert_eq!(json["kind"], "analytic-bandlimited");
    assert_eq!(json["d"], 3);
    assert_eq!(serde_json::from_value::<CorpusSpec>(json).unwrap(), spec);
}

#[test]
fn identical_functionals_give_unit_ratios() {
    let corpus = corpus_generate(&analytic(2, 12, 3, 5)).unwrap();
    let ctx = FunctionalContext::new(small_grid());
    let r = ratio_study(Functional::Oscillation, Functional::Oscillation, corpus.functions(), &ctx);
    assert_eq!(r.rows.len(), 12);
    for row in &r.rows {
        assert_eq!(row.ratio, Some(1.0));
    }
    let e = r.envelope.unwrap();
    assert_eq!((e.min, e.max, e.median), (1.0, 1.0, 1.0));
}

#[test]
fn littlewood_paley_ratio_is_one() {
    let corpus = corpus_generate(&analytic(3, 30, 4, 8)).unwrap();
    let ctx = FunctionalContext::new(small_grid());
    let r = ratio_study(Functional::Oscillation, Functional::LogGradient, corpus.functions(), &ctx);
    let e = r.envelope.unwrap();
    assert!((e.min - 1.0).abs() <= 1e-9 && (e.max - 1.0).abs() <= 1e-9, "{e:?}");
}

#[test]
fn carleson_ratio_on_small_corpus() {
    let corpus = corpus_generate(&analytic(4, 4, 2, 4)).unwrap();
    let mut ctx = FunctionalContext::new(small_grid());
    ctx.measure.angles = 64;
    ctx.tubes.centers = 64;
    let r = ratio_study(Functional::StarSquared, Functional::CarlesonPoisson, corpus.functions(), &ctx);
    let e = r.envelope.unwrap();
    assert_eq!(r.failed, 0);
    assert!(e.within(0.01, 100.0), "{e:?}");
}

#[test]
fn failures_are_flagged_and_floor_excludes() {
    // The log-gradient functional is undefined for piecewise data.
    let p = Partition::new(vec![0.0, 2.0]).unwrap();
    let pc = CircleFun::piecewise(p, vec![ComplexMatrix::identity(1), ComplexMatrix::zeros(1)]).unwrap();
    let fs = vec![CircleFun::monomial(1, ComplexMatrix::identity(1)), pc];
    let ctx = FunctionalContext::new(small_grid());
    let r = ratio_study(Functional::Oscillation, Functional::LogGradient, &fs, &ctx);
    assert_eq!(r.failed, 1);
    assert!(matches!(r.rows[1].status, RowStatus::Failed(_)));
    assert!(r.envelope.is_some());

    let entries = vec![
        Entry::new(0, 0, Ok((1.0, 2.0))),
        Entry::new(1, 0, Ok((3.0, 3.0))),
        Entry::new(2, 0, Ok((0.0, 0.0))),
        Entry::new(3, 0, Ok((1e-14, 1.0))),
        Entry::new(4, 0, Err(Error::ZeroMeasureArc)),
    ];
    let r = RatioReport::from_entries("x", "y", "base", entries);
    assert_eq!(r.excluded, 2);
    assert_eq!(r.failed, 1);
    let e = r.envelope.unwrap();
    assert_eq!((e.min, e.max), (1.0, 2.0));
    assert_eq!((e.argmin, e.argmax), ((1, 0), (0, 0)));
}

#[test]
fn polar_factor_pairs_to_trace_norm() {
    let a = ComplexMatrix::from_rows(&[vec![c(1.0, 2.0), c(0.0, 1.0)], vec![c(-1.0, 0.0), c(3.0, -1.0)]]).unwrap();
    let u = polar_unitary(&a).unwrap();
    let t = u.ad_mul(&a).trace();
    let norm = ncharm_core::opalg::schatten_norm(&a, 1.0).unwrap();
    assert_relative_eq!(t.re, norm, max_relative = 1e-13);
    assert!(t.im.abs() < 1e-12);
}

fn tiny(study: Study) -> ncharm_core::verify::StudySettings {
    let mut s = study.default_settings();
    s.corpus.count = s.corpus.count.min(6);
    s.grid = GridSpec {
        centers: 32,
        levels: 5,
        disk_radii: 6,
        disk_angles: 16,
        ..GridSpec::default()
    };
    s.measure.angles = 32;
    s.measure.levels_one = 8;
    s.tubes.centers = 32;
    s.tubes.levels = 5;
    s.mobius.radii = 3;
    s.mobius.angles = 4;
    s.mobius.gammas = vec![0.5, 0.9];
    s.witnesses.count = 3;
    s.n_t = 16;
    s
}

#[test]
fn every_study_runs_on_a_tiny_corpus() {
    for study in Study::ALL {
        let report = run_study(study, &tiny(study)).unwrap();
        assert_eq!(report.study, study.name());
        assert!(!report.checks.is_empty());
        assert!(!report.ratios.is_empty());
        // Every check may not pass at toy resolution, but identities,
        // bounds and validations must.
        for name in ["pairing bound", "lower <= upper", "atoms valid", "nu <= 2 lambda node-wise"] {
            if let Some(c) = report.check(name) {
                assert!(c.passed, "{study}: {c:?}");
            }
        }
        if study == Study::LittlewoodPaley {
            assert!(report.passed(), "{}", report.summary());
        }
    }
}

#[test]
fn study_output_is_deterministic() {
    let s = tiny(Study::Duality);
    let a = run_study(Study::Duality, &s).unwrap();
    let b = run_study(Study::Duality, &s).unwrap();
    assert_eq!(a.to_csv().unwrap(), b.to_csv().unwrap());
    let csv = a.to_csv().unwrap();
    assert!(csv.starts_with(&CSV_HEADER.join(",")));
    // Pairings carry their real and imaginary parts.
    let first = csv.lines().nth(1).unwrap();
    let fields: Vec<&str> = first.split(',').collect();
    assert_eq!(fields.len(), CSV_HEADER.len());
    assert!(fields[8].parse::<f64>().is_ok() && fields[9].parse::<f64>().is_ok());
}

#[test]
fn report_json_round_trip() {
    let report = run_study(Study::ConeArea, &tiny(Study::ConeArea)).unwrap();
    let back = StudyReport::from_json(&report.to_json()).unwrap();
    assert_eq!(back, report);
    assert!(!report.witnesses.is_empty());
    assert!(CircleFun::try_from(report.witnesses[0].function.clone()).is_ok());
}

#[test]
fn settings_validation() {
    let mut s = Study::LittlewoodPaley.default_settings();
    s.tolerances.identity = -1.0;
    assert!(run_study(Study::LittlewoodPaley, &s).is_err());
    let mut s = Study::Atoms.default_settings();
    s.corpus = analytic(1, 3, 2, 3);
    assert!(run_study(Study::Atoms, &s).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn pairing_is_conjugate_symmetric(seed in any::<u64>(), d in 1usize..4) {
        // Items d − 1 and 2d − 1 both have dimension d.
        let spec = CorpusSpec { seed, count: 2 * d, kind: CorpusKind::GeneralBandlimited { d, n: 5 } };
        let corpus = corpus_generate(&spec).unwrap();
        let (f, g) = (&corpus.items[d - 1].function, &corpus.items[2 * d - 1].function);
        let lhs = pairing(f, g).unwrap();
        let rhs = pairing(g, f).unwrap().conj();
        prop_assert!((lhs - rhs).norm() <= 1e-12 * (1.0 + lhs.norm()));
    }

    #[test]
    fn envelope_is_ordered(values in prop::collection::vec((0.01f64..10.0, 0.01f64..10.0), 1..30)) {
        let entries = values.iter().enumerate().map(|(i, &(x, y))| Entry::new(i, 0, Ok((x, y)))).collect();
        let r = RatioReport::from_entries("x", "y", "base", entries);
        let e = r.envelope.unwrap();
        prop_assert!(e.min <= e.median && e.median <= e.max);
        prop_assert_eq!(r.rows[e.argmin.0].ratio, Some(e.min));
        prop_assert_eq!(r.rows[e.argmax.0].ratio, Some(e.max));
    }

    #[test]
    fn duality_bound_holds_for_piecewise_functions(seed in any::<u64>()) {
        let spec = CorpusSpec { seed, count: 2, kind: CorpusKind::Piecewise { d: 2, cells: 5 } };
        let corpus = corpus_generate(&spec).unwrap();
        let f = Backed::new(&corpus.items[1].function, Scheme::Dyadic(3)).unwrap();
        let gspec = CorpusSpec { seed, count: 4, kind: CorpusKind::GeneralBandlimited { d: 2, n: 4 } };
        let grid = small_grid();
        for g in corpus_generate(&gspec).unwrap().functions().filter(|g| g.dim() == 2) {
            let report = check_duality_bound(&f, g, &grid, 1e-9).unwrap();
            prop_assert!(report.holds, "{report:?}");
        }
    }
}
