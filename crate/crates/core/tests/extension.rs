use std::f64::consts::{PI, TAU};

use approx::assert_relative_eq;
use ncharm_core::circfun::{l2_pairing, CircleFun, Partition};
use ncharm_core::diskpoly::{DiskPoly, RadialWeight};
use ncharm_core::extension::{
    analytic_projection, cauchy_integral, dilate, grad_sq, grad_sq_analytic, gradient,
    poisson_extend, poisson_kernel, poisson_oscillation, poisson_second_moment, DiskPoint, Mobius,
};
use ncharm_core::opalg::ComplexMatrix;
use ncharm_core::quadrature::gauss_legendre_on;
use ncharm_core::Complex64;
use proptest::prelude::*;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn pt(re: f64, im: f64) -> DiskPoint {
    DiskPoint::new(c(re, im)).unwrap()
}

fn sample_a() -> ComplexMatrix {
    ComplexMatrix::from_rows(&[vec![c(1.0, 0.5), c(0.0, -2.0)], vec![c(0.3, 0.0), c(-1.0, 1.0)]]).unwrap()
}

fn sample_b() -> ComplexMatrix {
    ComplexMatrix::from_rows(&[vec![c(0.2, 0.0), c(1.0, 1.0)], vec![c(-0.7, 0.4), c(0.5, 0.0)]]).unwrap()
}

fn close(a: &ComplexMatrix, b: &ComplexMatrix, tol: f64) -> bool {
    (a - b).max_abs_entry() <= tol
}

fn scalar_z() -> CircleFun {
    CircleFun::monomial(1, ComplexMatrix::identity(1))
}

fn step_fun() -> CircleFun {
    let p = Partition::new(vec![0.2, 1.5, 3.0, 5.0]).unwrap();
    CircleFun::piecewise(
        p,
        vec![sample_a(), sample_b(), ComplexMatrix::identity(2), ComplexMatrix::zeros(2)],
    )
    .unwrap()
}

/// `∫ f(t) w(t) dm` by Gauss-Legendre on each cell of a step function.
fn cellwise_quadrature(f: &CircleFun, weight: impl Fn(f64) -> f64) -> ComplexMatrix {
    let ncharm_core::circfun::Repr::PiecewiseConst { partition, values } = f.repr() else {
        panic!("step function expected");
    };
    let mut acc = ComplexMatrix::zeros(f.dim());
    for (k, v) in values.iter().enumerate() {
        let (a, b) = partition.cell(k);
        let mut s = 0.0;
        for (lo, hi) in (0..64).map(|j| (a + (b - a) * j as f64 / 64.0, a + (b - a) * (j + 1) as f64 / 64.0)) {
            for (t, w) in gauss_legendre_on(16, lo, hi) {
                s += w * weight(t);
            }
        }
        acc.axpy(c(s / TAU, 0.0), v);
    }
    acc
}

#[test]
fn poisson_kernel_examples() {
    assert_eq!(poisson_kernel(DiskPoint::origin(), 1.3), 1.0);
    assert_relative_eq!(poisson_kernel(pt(0.5, 0.0), 0.0), 3.0, epsilon = 1e-14);
    assert_relative_eq!(poisson_kernel(pt(0.5, 0.0), PI), 1.0 / 3.0, epsilon = 1e-14);
    assert!(DiskPoint::new(c(1.0, 0.0)).is_err());
}

#[test]
fn poisson_kernel_is_normalized() {
    let m = 4096;
    for r in [0.0, 0.3, 0.7, 0.9, 0.99] {
        for th in [0.0, 1.0, 4.0] {
            let z = DiskPoint::from_polar(r, th).unwrap();
            let s: f64 = (0..m).map(|k| poisson_kernel(z, TAU * k as f64 / m as f64)).sum::<f64>() / m as f64;
            assert!((s - 1.0).abs() < 1e-12, "r={r}: {s}");
        }
    }
}

#[test]
fn poisson_extend_examples() {
    let cst = sample_a();
    let f = CircleFun::constant(cst.clone());
    assert!(close(&poisson_extend(&f, pt(0.3, -0.6)), &cst, 1e-15));

    let a = sample_a();
    let f = CircleFun::monomial(1, a.clone());
    assert!(close(&poisson_extend(&f, pt(0.0, 0.3)), &a.scale(c(0.0, 0.3)), 1e-15));

    let w = c(-0.4, 0.25);
    let v = poisson_extend(&scalar_z(), DiskPoint::new(w).unwrap()).get(0, 0);
    assert!((v - w).norm() < 1e-15);

    // Piecewise constants keep constants.
    let p = Partition::new(vec![0.5, 2.0]).unwrap();
    let f = CircleFun::piecewise(p, vec![cst.clone(), cst.clone()]).unwrap();
    assert!(close(&poisson_extend(&f, pt(0.6, 0.7)), &cst, 1e-13));
}

#[test]
fn piecewise_extension_matches_quadrature() {
    let f = step_fun();
    for z in [pt(0.0, 0.0), pt(0.5, 0.1), pt(-0.3, -0.8), pt(0.9, 0.0)] {
        let exact = poisson_extend(&f, z);
        let quad = cellwise_quadrature(&f, |t| poisson_kernel(z, t));
        assert!(close(&exact, &quad, 1e-11), "z={z:?}");
        let cauchy = cauchy_integral(&f, z);
        let quad = cellwise_quadrature(&f, |t| (1.0 / (c(1.0, 0.0) - Complex64::from_polar(1.0, -t) * z.z())).re);
        let quad_im = cellwise_quadrature(&f, |t| (1.0 / (c(1.0, 0.0) - Complex64::from_polar(1.0, -t) * z.z())).im);
        let expected = &quad + &quad_im.scale(c(0.0, 1.0));
        assert!(close(&cauchy, &expected, 1e-11));
    }
}

#[test]
fn cauchy_examples() {
    let a = sample_a();
    let b = sample_b();
    let z = pt(0.2, 0.5);
    let f = CircleFun::from_modes(2, &[(0, a.clone()), (2, b.clone())]).unwrap();
    assert!(close(&cauchy_integral(&f, z), &poisson_extend(&f, z), 1e-15));

    let f = CircleFun::monomial(-1, a.clone());
    assert!(cauchy_integral(&f, z).is_zero());

    let f = CircleFun::from_modes(2, &[(-1, a), (1, b.clone())]).unwrap();
    assert!(close(&cauchy_integral(&f, z), &b.scale(z.z()), 1e-15));

    let proj = analytic_projection(&f).unwrap();
    assert!(close(&cauchy_integral(&proj, z), &cauchy_integral(&f, z), 1e-15));
}

#[test]
fn grad_sq_examples() {
    let f = CircleFun::constant(sample_a());
    assert!(grad_sq(&f, pt(0.3, 0.3)).as_matrix().is_zero());

    let a = sample_a();
    let f = CircleFun::monomial(1, a.clone());
    for z in [pt(0.0, 0.0), pt(0.4, -0.5)] {
        assert!(close(grad_sq(&f, z).as_matrix(), &a.ad_mul(&a).scale_real(2.0), 1e-13));
    }

    let f = CircleFun::monomial(2, ComplexMatrix::identity(1));
    for r in [0.1, 0.5, 0.95] {
        let g = grad_sq(&f, DiskPoint::from_polar(r, 0.8).unwrap()).as_matrix().get(0, 0).re;
        assert_relative_eq!(g, 8.0 * r * r, max_relative = 1e-13);
    }
}

#[test]
fn piecewise_gradient_matches_finite_differences() {
    let f = step_fun();
    for z in [pt(0.1, 0.2), pt(-0.6, 0.3), pt(0.0, -0.9)] {
        let h = 1e-5 * (1.0 - z.norm());
        let shift = |d: Complex64| poisson_extend(&f, DiskPoint::new(z.z() + d).unwrap());
        let fdx = (&shift(c(h, 0.0)) - &shift(c(-h, 0.0))).scale_real(0.5 / h);
        let fdy = (&shift(c(0.0, h)) - &shift(c(0.0, -h))).scale_real(0.5 / h);
        let (dx, dy) = gradient(&f, z);
        let scale = 1.0 + dx.max_abs_entry() + dy.max_abs_entry();
        assert!(close(&dx, &fdx, 1e-6 * scale));
        assert!(close(&dy, &fdy, 1e-6 * scale));
    }
}

#[test]
fn mobius_examples() {
    let id = Mobius::identity();
    let z = pt(0.3, -0.2);
    assert_eq!(id.apply(z).unwrap(), z);

    let psi = Mobius::new(0.7, c(0.4, 0.1)).unwrap();
    assert!(psi.map(c(0.4, 0.1)).norm() < 1e-16);
    let back = psi.inverse().map(psi.map(z.z()));
    assert!((back - z.z()).norm() < 1e-14);

    let psi = Mobius::new(0.0, c(0.5, 0.0)).unwrap();
    assert!((psi.map(c(0.0, 0.0)) - c(-0.5, 0.0)).norm() < 1e-16);
    assert!(Mobius::new(0.0, c(1.0, 0.0)).is_err());
}

#[test]
fn mobius_boundary_is_a_circle_homeomorphism() {
    let psi = Mobius::new(1.3, c(-0.6, 0.5)).unwrap();
    let n = 2000;
    let mut total = 0.0;
    let mut prev = psi.boundary(0.0);
    for k in 1..=n {
        let cur = psi.boundary(TAU * k as f64 / n as f64);
        let step = (cur - prev).rem_euclid(TAU);
        assert!(step > 0.0 && step < PI);
        total += step;
        prev = cur;
    }
    assert_relative_eq!(total, TAU, epsilon = 1e-9);
}

#[test]
fn dilate_examples() {
    let a = sample_a();
    let f = CircleFun::monomial(1, a.clone());
    let g = dilate(&f, 0.5).unwrap();
    assert!(close(&g.coeff(1).unwrap(), &a.scale_real(0.5), 1e-16));
    let cst = CircleFun::constant(a.clone());
    assert_eq!(dilate(&cst, 0.3).unwrap(), cst);
    assert!(dilate(&f, 1.0).is_err());
    assert!(dilate(&f, 0.0).is_err());
    assert!(dilate(&step_fun(), 0.5).is_err());

    let f = CircleFun::from_modes(2, &[(-2, sample_b()), (1, a)]).unwrap();
    let g = dilate(&f, 1.0 - 1e-6).unwrap();
    for t in [0.0, 1.0, 2.0] {
        assert!(close(&g.eval(t), &f.eval(t), 1e-5 * 20.0));
    }
}

#[test]
fn littlewood_paley_closed_form_instance() {
    let f = scalar_z();
    let lhs = l2_pairing(&f, &f).unwrap().get(0, 0).re;
    let rhs = DiskPoly::grad_sq(&f).unwrap().integrate(RadialWeight::LogInverse).get(0, 0).re / PI;
    assert_relative_eq!(lhs, 1.0, epsilon = 1e-15);
    assert_relative_eq!(rhs, 1.0, epsilon = 1e-15);
}

#[test]
fn green_potential_of_constant() {
    // ∫_D G(z, w) dA = (π/2)(1 − |w|²).
    let mut one = DiskPoly::zero(1, 0);
    *one.coeff_mut(0, 0) = ComplexMatrix::identity(1);
    let w = c(0.3, -0.5);
    let v = one.integrate_green(w).get(0, 0);
    assert_relative_eq!(v.re, 0.5 * PI * (1.0 - w.norm_sqr()), epsilon = 1e-15);
}

#[test]
fn poisson_oscillation_closed_form() {
    // ∫|t − w|² P_w dm = 1 − |w|².
    let f = scalar_z();
    for w in [pt(0.0, 0.0), pt(0.5, 0.2), pt(-0.1, 0.9)] {
        let v = poisson_oscillation(&f, w).trace();
        assert_relative_eq!(v, 1.0 - w.norm() * w.norm(), epsilon = 1e-14);
    }
}

fn arb_matrix(d: usize) -> impl Strategy<Value = ComplexMatrix> {
    proptest::collection::vec((-1.0..1.0f64, -1.0..1.0f64), d * d)
        .prop_map(move |v| ComplexMatrix::from_fn(d, |i, j| c(v[i * d + j].0, v[i * d + j].1)))
}

fn arb_band_limited(d: usize, analytic: bool) -> impl Strategy<Value = CircleFun> {
    (1usize..6).prop_flat_map(move |n| {
        proptest::collection::vec(arb_matrix(d), 2 * n + 1).prop_map(move |mut coeffs| {
            if analytic {
                for a in coeffs.iter_mut().take(n) {
                    *a = ComplexMatrix::zeros(d);
                }
            }
            CircleFun::band_limited(d, coeffs).unwrap()
        })
    })
}

fn arb_point() -> impl Strategy<Value = DiskPoint> {
    (0.0..0.95f64, 0.0..TAU).prop_map(|(r, t)| DiskPoint::from_polar(r, t).unwrap())
}

proptest! {
    #[test]
    fn analytic_gradient_paths_agree(f in arb_band_limited(2, true), z in arb_point()) {
        let real = grad_sq(&f, z);
        let analytic = grad_sq_analytic(&f, z).unwrap();
        let scale = analytic.as_matrix().max_abs_entry();
        prop_assert!(close(real.as_matrix(), analytic.as_matrix(), 1e-10 * (1.0 + scale)));
    }

    #[test]
    fn gradient_polynomial_matches_pointwise(f in arb_band_limited(2, false), z in arb_point()) {
        let poly = DiskPoly::grad_sq(&f).unwrap();
        let direct = grad_sq(&f, z);
        let scale = direct.as_matrix().max_abs_entry();
        prop_assert!(close(&poly.eval(z.z()), direct.as_matrix(), 1e-11 * (1.0 + scale)));
        prop_assert!(poly.hermitian_defect() < 1e-12 * (1.0 + scale));
    }

    #[test]
    fn littlewood_paley_identity(f in arb_band_limited(3, false)) {
        let g = f.map_constant_shift(&f.coeff(0).unwrap());
        let lhs = l2_pairing(&g, &g).unwrap();
        let rhs = DiskPoly::grad_sq(&f).unwrap().integrate(RadialWeight::LogInverse).scale_real(1.0 / PI);
        prop_assert!(close(&lhs, &rhs, 1e-12 * (1.0 + lhs.max_abs_entry())));
    }

    #[test]
    fn weighted_green_identity(f in arb_band_limited(2, false), w in arb_point()) {
        let lhs = poisson_oscillation(&f, w);
        let rhs = DiskPoly::grad_sq(&f).unwrap().integrate_green(w.z()).scale_real(1.0 / PI);
        let scale = 1.0 + lhs.as_matrix().max_abs_entry();
        prop_assert!(close(lhs.as_matrix(), &rhs, 1e-10 * scale));
    }

    #[test]
    fn poisson_weighted_disk_integral(f in arb_band_limited(1, false), w in arb_point()) {
        // Polar Gauss-Legendre oracle for ∫_D P_w |∇f|² (1 − |z|²) dA.
        let poly = DiskPoly::grad_sq(&f).unwrap();
        let exact = poly.integrate_mobius_weight(w.z()).get(0, 0).re;
        let mut quad = 0.0;
        let radial: Vec<(f64, f64)> = [0.0, 0.5, 0.8, 0.9, 0.95, 0.98, 1.0]
            .windows(2)
            .flat_map(|s| gauss_legendre_on(24, s[0], s[1]))
            .collect();
        let m = 512;
        for &(r, wr) in &radial {
            for k in 0..m {
                let th = TAU * k as f64 / m as f64;
                let z = Complex64::from_polar(r, th);
                let pz = (1.0 - w.norm().powi(2)) / (c(1.0, 0.0) - w.z().conj() * z).norm_sqr();
                quad += wr * r * (TAU / m as f64) * pz * poly.eval(z).get(0, 0).re * (1.0 - r * r);
            }
        }
        prop_assert!((exact - quad).abs() <= 1e-8 * (1.0 + exact.abs()), "{} vs {}", exact, quad);
    }

    #[test]
    fn cauchy_idempotent(f in arb_band_limited(2, false), z in arb_point()) {
        let once = cauchy_integral(&f, z);
        let twice = cauchy_integral(&analytic_projection(&f).unwrap(), z);
        prop_assert!(close(&once, &twice, 1e-14 * (1.0 + once.max_abs_entry())));
    }

    #[test]
    fn mobius_maps_disk_to_disk(rot in 0.0..TAU, b in arb_point(), z in arb_point()) {
        let psi = Mobius::new(rot, b.z()).unwrap();
        prop_assert!(psi.apply(z).unwrap().norm() < 1.0);
    }

    #[test]
    fn piecewise_second_moment_matches_quadrature(w in arb_point()) {
        let f = step_fun();
        let exact = poisson_second_moment(&f, w);
        let mut acc = ComplexMatrix::zeros(2);
        let ncharm_core::circfun::Repr::PiecewiseConst { partition, values } = f.repr() else { unreachable!() };
        for (k, v) in values.iter().enumerate() {
            let (a, b) = partition.cell(k);
            let mut s = 0.0;
            for j in 0..64 {
                let lo = a + (b - a) * j as f64 / 64.0;
                let hi = a + (b - a) * (j + 1) as f64 / 64.0;
                for (t, wt) in gauss_legendre_on(16, lo, hi) {
                    s += wt * poisson_kernel(w, t);
                }
            }
            acc.add_ad_mul(c(s / TAU, 0.0), v, v);
        }
        prop_assert!(close(&exact, &acc, 1e-10));
    }
}
