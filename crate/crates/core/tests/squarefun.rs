use std::f64::consts::{PI, TAU};

use approx::assert_relative_eq;
use ncharm_core::circfun::{CircleFun, Partition};
use ncharm_core::diskpoly::DiskPoly;
use ncharm_core::opalg::{psd_sqrt, schatten_norm, ComplexMatrix, PsdMatrix};
use ncharm_core::quadrature::gauss_legendre_on;
use ncharm_core::squarefun::{
    area_fun, cone_half_width, full_ring_radius, g_fun, h1c_area_norm, sq_l1_norm, AreaFunction,
    Cone, ConeConfig, ConeRule,
};
use ncharm_core::Complex64;
use proptest::prelude::*;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn sample_a() -> ComplexMatrix {
    ComplexMatrix::from_rows(&[vec![c(1.0, 0.5), c(0.0, -2.0)], vec![c(0.3, 0.0), c(-1.0, 1.0)]]).unwrap()
}

fn close(a: &ComplexMatrix, b: &ComplexMatrix, tol: f64) -> bool {
    (a - b).max_abs_entry() <= tol
}

fn scalar_z() -> CircleFun {
    CircleFun::monomial(1, ComplexMatrix::identity(1))
}

/// Area of `Γ_2(0)` ∩ {|z| < 1 − ε} by midpoint sampling on a fine grid.
fn sampled_cone_area(alpha: f64, eps: f64) -> f64 {
    let cone = Cone::new(alpha, 0.0, 1.0 - eps).unwrap();
    let n = 6000usize;
    let h = 2.0 / n as f64;
    let mut inside = 0usize;
    for i in 0..n {
        let x = -1.0 + (i as f64 + 0.5) * h;
        for j in 0..n {
            let y = -1.0 + (j as f64 + 0.5) * h;
            if cone.contains(c(x, y)) {
                inside += 1;
            }
        }
    }
    inside as f64 * h * h
}

#[test]
fn half_width_matches_membership() {
    for alpha in [1.5, 2.0, 4.0] {
        let cone = Cone::new(alpha, 0.0, 1.0).unwrap();
        for r in [0.05, 0.25, 0.4, 0.65, 0.9, 0.999] {
            let beta = cone_half_width(alpha, r);
            if r <= full_ring_radius(alpha) {
                assert_eq!(beta, PI);
                assert!(cone.contains(Complex64::from_polar(r, PI)));
                continue;
            }
            assert!(cone.contains(Complex64::from_polar(r, beta * (1.0 - 1e-9))));
            assert!(!cone.contains(Complex64::from_polar(r, beta * (1.0 + 1e-9))));
        }
    }
    assert!(Cone::new(1.0, 0.0, 1.0).is_err());
    assert!(Cone::new(2.0, 0.0, 0.0).is_err());
}

#[test]
fn cone_rule_area_matches_sampling() {
    let config = ConeConfig::default();
    let rule = ConeRule::new(2.0, 1.0, &config).unwrap();
    let sampled = sampled_cone_area(2.0, config.eps_bnd);
    assert!((rule.area() - sampled).abs() <= 1e-3 * sampled, "{} vs {sampled}", rule.area());
    assert!(rule.cap_area > 0.0 && rule.cap_area < 1e-7);
}

#[test]
fn under_resolved_rule_is_rejected() {
    let config = ConeConfig { radial_nodes: 1, ..ConeConfig::default() };
    assert!(matches!(
        ConeRule::new(2.0, 1.0, &config),
        Err(ncharm_core::Error::UnderResolved { .. })
    ));
}

#[test]
fn area_function_examples() {
    let config = ConeConfig::default();
    let area = ConeRule::new(2.0, 1.0, &config).unwrap().area();

    let f = CircleFun::constant(sample_a());
    assert!(area_fun(&f, 2.0, 0.3, 1.0).unwrap().as_matrix().is_zero());

    let af = AreaFunction::new(&scalar_z(), 2.0, 1.0, &config).unwrap();
    for t in [0.0, 1.0, 4.0] {
        assert_relative_eq!(af.squared(t).trace(), 2.0 * area, max_relative = 1e-13);
    }

    let a = sample_a();
    let f = CircleFun::monomial(1, a.clone());
    let got = AreaFunction::new(&f, 2.0, 1.0, &config).unwrap().squared(0.7);
    assert!(close(got.as_matrix(), &a.ad_mul(&a).scale_real(2.0 * area), 1e-12));
}

#[test]
fn g_function_examples() {
    assert!(g_fun(&CircleFun::constant(sample_a()), 0.0, 1.0).unwrap().as_matrix().is_zero());
    let g = g_fun(&scalar_z(), 0.4, 1.0).unwrap().as_matrix().get(0, 0).re;
    assert!((g - 2.0 / 3f64.sqrt()).abs() <= 1e-12);

    let a = sample_a();
    let g = g_fun(&CircleFun::monomial(1, a.clone()), 2.0, 1.0).unwrap();
    let expected = psd_sqrt(&a.ad_mul(&a)).unwrap().as_matrix().scale_real((4.0f64 / 3.0).sqrt());
    assert!(close(g.as_matrix(), &expected, 1e-12));
}

#[test]
fn sq_l1_examples() {
    assert_eq!(sq_l1_norm(&vec![PsdMatrix::zeros(2); 8]), 0.0);
    assert_relative_eq!(sq_l1_norm(&vec![PsdMatrix::identity(2); 8]), 2.0);
    let a = sample_a();
    let f = CircleFun::monomial(1, a.clone());
    let samples: Vec<PsdMatrix> = (0..16).map(|k| g_fun(&f, TAU * k as f64 / 16.0, 1.0).unwrap()).collect();
    let expected = (4.0f64 / 3.0).sqrt() * schatten_norm(&a, 1.0).unwrap();
    assert_relative_eq!(sq_l1_norm(&samples), expected, max_relative = 1e-12);
}

#[test]
fn h1_area_norm_examples() {
    let config = ConeConfig::default();
    let area = ConeRule::new(2.0, 1.0, &config).unwrap().area();
    let cst = sample_a();
    let f = CircleFun::constant(cst.clone());
    assert_relative_eq!(h1c_area_norm(&f, 2.0, 16, &config).unwrap(), schatten_norm(&cst, 1.0).unwrap(), max_relative = 1e-12);

    assert_relative_eq!(h1c_area_norm(&scalar_z(), 2.0, 16, &config).unwrap(), (2.0 * area).sqrt(), max_relative = 1e-12);

    let a = sample_a();
    let f = CircleFun::monomial(1, a.clone());
    let expected = schatten_norm(&a, 1.0).unwrap() * (2.0 * area).sqrt();
    assert_relative_eq!(h1c_area_norm(&f, 2.0, 16, &config).unwrap(), expected, max_relative = 1e-12);

    let general = CircleFun::monomial(-1, a);
    assert!(h1c_area_norm(&general, 2.0, 16, &config).is_err());
}

/// Independent Fubini value `∫_D |∇f|² β(r)/π dx dy` for band-limited `f`.
fn fubini_band_limited(f: &CircleFun, alpha: f64, top: f64) -> ComplexMatrix {
    let poly = DiskPoly::grad_sq(f).unwrap();
    let r0 = full_ring_radius(alpha);
    let mut nodes = Vec::new();
    for (lo, hi) in [(0.0, r0), (r0, top)] {
        let segs = 2000;
        for s in 0..segs {
            let a = lo + (hi - lo) * s as f64 / segs as f64;
            let b = lo + (hi - lo) * (s + 1) as f64 / segs as f64;
            nodes.extend(gauss_legendre_on(8, a, b));
        }
    }
    let mut acc = ComplexMatrix::zeros(f.dim());
    for (r, w) in nodes {
        let ring0 = &poly.ring_coefficients(r)[poly.degree()];
        acc.axpy(c(w * r * 2.0 * cone_half_width(alpha, r), 0.0), ring0);
    }
    acc
}

#[test]
fn band_limited_mean_matches_fubini() {
    let a = sample_a();
    let f = CircleFun::from_modes(2, &[(1, a.clone()), (3, a.adjoint()), (-2, a.scale(c(0.0, 0.5)))]).unwrap();
    let config = ConeConfig::default();
    let af = AreaFunction::new(&f, 2.0, 1.0, &config).unwrap();
    let oracle = fubini_band_limited(&f, 2.0, 1.0 - config.eps_bnd);
    let got = af.mean_squared(1);
    assert!(close(&got, &oracle, 1e-6 * oracle.max_abs_entry()), "{got:?} vs {oracle:?}");
}

#[test]
fn piecewise_mean_matches_fourier_series() {
    // Truncated at δ = 0.9 the ring means 2 Σ n² r^{2|n|−2} f̂_n* f̂_n converge fast.
    let p = Partition::new(vec![0.3, 2.0, 4.1]).unwrap();
    let a = sample_a();
    let f = CircleFun::piecewise(p, vec![a.clone(), a.adjoint(), ComplexMatrix::zeros(2)]).unwrap();
    let delta = 0.9;
    let config = ConeConfig::default();
    let af = AreaFunction::new(&f, 2.0, delta, &config).unwrap();
    let got = af.mean_squared(512);

    let nmax = 400i64;
    let hats: Vec<(i64, ComplexMatrix)> = (-nmax..=nmax).filter(|n| *n != 0).map(|n| (n, f.fourier_coeff(n))).collect();
    let r0 = full_ring_radius(2.0);
    let mut oracle = ComplexMatrix::zeros(2);
    for (lo, hi) in [(0.0, r0), (r0, delta)] {
        for s in 0..400 {
            let x0 = lo + (hi - lo) * s as f64 / 400.0;
            let x1 = lo + (hi - lo) * (s + 1) as f64 / 400.0;
            for (r, w) in gauss_legendre_on(8, x0, x1) {
                let scale = w * r * 2.0 * cone_half_width(2.0, r);
                for (n, fh) in &hats {
                    let nn = n.unsigned_abs() as i32;
                    let wt = scale * 2.0 * (nn * nn) as f64 * r.powi(2 * nn - 2);
                    oracle.add_ad_mul(c(wt, 0.0), fh, fh);
                }
            }
        }
    }
    assert!(close(&got, &oracle, 1e-6 * oracle.max_abs_entry()), "{got:?} vs {oracle:?}");
}

fn arb_matrix(d: usize) -> impl Strategy<Value = ComplexMatrix> {
    proptest::collection::vec((-1.0..1.0f64, -1.0..1.0f64), d * d)
        .prop_map(move |v| ComplexMatrix::from_fn(d, |i, j| c(v[i * d + j].0, v[i * d + j].1)))
}

fn arb_band_limited(d: usize) -> impl Strategy<Value = CircleFun> {
    (1usize..5).prop_flat_map(move |n| {
        proptest::collection::vec(arb_matrix(d), 2 * n + 1)
            .prop_map(move |coeffs| CircleFun::band_limited(d, coeffs).unwrap())
    })
}

fn rotate(f: &CircleFun, phi: f64) -> CircleFun {
    match f.repr() {
        ncharm_core::circfun::Repr::BandLimited { degree, coeffs } => {
            let d = *degree as i64;
            let coeffs = coeffs
                .iter()
                .enumerate()
                .map(|(i, a)| a.scale(Complex64::from_polar(1.0, -((i as i64 - d) as f64) * phi)))
                .collect();
            CircleFun::band_limited(f.dim(), coeffs).unwrap()
        }
        ncharm_core::circfun::Repr::PiecewiseConst { partition, values } => {
            let cells: Vec<[f64; 2]> = partition.cells().map(|(a, b)| [a + phi, b + phi]).collect();
            CircleFun::piecewise(Partition::from_cells(&cells).unwrap(), values.clone()).unwrap()
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn rotation_covariance(f in arb_band_limited(2), phi in 0.0..TAU, t in 0.0..TAU) {
        let config = ConeConfig::default();
        let a = AreaFunction::new(&rotate(&f, phi), 2.0, 1.0, &config).unwrap().squared(t);
        let b = AreaFunction::new(&f, 2.0, 1.0, &config).unwrap().squared(t - phi);
        prop_assert!(close(a.as_matrix(), b.as_matrix(), 1e-11 * (1.0 + b.as_matrix().max_abs_entry())));
    }

    #[test]
    fn rotation_covariance_piecewise(vals in proptest::collection::vec(arb_matrix(2), 3), phi in 0.0..1.0f64, t in 0.0..TAU) {
        let p = Partition::new(vec![0.5, 2.5, 4.0]).unwrap();
        let f = CircleFun::piecewise(p, vals).unwrap();
        let config = ConeConfig::default();
        let a = AreaFunction::new(&rotate(&f, phi), 2.0, 1.0, &config).unwrap().squared(t);
        let b = AreaFunction::new(&f, 2.0, 1.0, &config).unwrap().squared(t - phi);
        prop_assert!(close(a.as_matrix(), b.as_matrix(), 1e-9 * (1.0 + b.as_matrix().max_abs_entry())));
    }

    #[test]
    fn truncation_monotone(f in arb_band_limited(2), t in 0.0..TAU, d1 in 0.1..1.0f64, d2 in 0.1..1.0f64) {
        let (lo, hi) = if d1 < d2 { (d1, d2) } else { (d2, d1) };
        let config = ConeConfig::default();
        let small = AreaFunction::new(&f, 2.0, lo, &config).unwrap().squared(t);
        let large = AreaFunction::new(&f, 2.0, hi, &config).unwrap().squared(t);
        let diff = large.as_matrix() - small.as_matrix();
        let min = diff.eigenvalues_h().unwrap()[0];
        prop_assert!(min >= -1e-10 * (1.0 + large.op_norm()), "{}", min);
    }
}
