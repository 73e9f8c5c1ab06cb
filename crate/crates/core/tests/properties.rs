use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use std::f64::consts::PI;
use vessel_core::kernels::KernelContext;
use vessel_core::meromorphic::MeromorphicFn;
use vessel_core::model_ops::{hankel_inverse, resolvent, taylor_delta_check, HankelBlock, ModelSpace};
use vessel_core::surface::{RealCurve, Side, SurfacePoint};
use vessel_core::theta::*;
use vessel_core::transfer::BlaschkeProduct;
use vessel_core::Complex64 as C;

fn c(re: f64, im: f64) -> C {
    C::new(re, im)
}

fn genus2() -> PeriodMatrix {
    let g = DMatrix::from_row_slice(2, 2, &[c(0.1, 1.1), c(0.25, 0.3), c(0.25, 0.3), c(-0.2, 0.9)]);
    PeriodMatrix::new(g, None).unwrap()
}

fn period(g: usize) -> PeriodMatrix {
    if g == 1 {
        PeriodMatrix::genus1(c(0.0, 1.0)).unwrap()
    } else {
        genus2()
    }
}

/// Magnitude of the dominant lattice term, exp(π Im λᵀ Y⁻¹ Im λ).
fn dominant(pm: &PeriodMatrix, lambda: &[C]) -> f64 {
    let g = pm.g();
    let y = pm.gamma().map(|z| z.im);
    let v = DVector::from_iterator(g, lambda.iter().map(|z| z.im));
    let w = y.try_inverse().unwrap() * &v;
    (PI * v.dot(&w)).exp()
}

fn cvec(g: usize) -> impl Strategy<Value = Vec<C>> {
    prop::collection::vec((-1.0..1.0f64, -0.5..0.5f64).prop_map(|(a, b)| c(a, b)), g)
}

fn torus() -> (RealCurve, KernelContext) {
    let x = RealCurve::rectangular(0.8).unwrap();
    let ctx = KernelContext::with_char(&x, 0.3, 0.0).unwrap();
    (x, ctx)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn theta_quasi_periodic(g in 1usize..=2, lam in cvec(2), m in prop::collection::vec(-3i64..=3, 2), n in prop::collection::vec(-3i64..=3, 2)) {
        let pm = period(g);
        let lam = &lam[..g];
        let (m, n) = (&m[..g], &n[..g]);
        let shifted = lattice_shift(&pm, lam, m, n, 1.0);
        let lhs = theta(&pm, &shifted, DEFAULT_TOL).unwrap();
        let mut ex = C::new(0.0, 0.0);
        for i in 0..g {
            for j in 0..g {
                ex += pm.gamma()[(i, j)] * (n[i] * n[j]) as f64;
            }
            ex += 2.0 * lam[i] * n[i] as f64;
        }
        let rhs = (-C::i() * PI * ex).exp() * theta(&pm, lam, DEFAULT_TOL).unwrap();
        let scale = dominant(&pm, &shifted);
        prop_assert!((lhs - rhs).norm() < 1e-10 * scale, "{lhs} {rhs}");
    }

    #[test]
    fn theta_parity(g in 1usize..=2, lam in cvec(2)) {
        let pm = period(g);
        let lam = &lam[..g];
        let neg: Vec<C> = lam.iter().map(|z| -z).collect();
        let scale = dominant(&pm, lam);
        let even = theta(&pm, lam, DEFAULT_TOL).unwrap() - theta(&pm, &neg, DEFAULT_TOL).unwrap();
        prop_assert!(even.norm() < 1e-11 * scale);
        let odd = if g == 1 { ThetaChar::odd_genus1() } else { ThetaChar::new(vec![0.5, 0.0], vec![0.5, 0.0]) };
        let s = theta_char(&pm, &odd, lam, DEFAULT_TOL).unwrap() + theta_char(&pm, &odd, &neg, DEFAULT_TOL).unwrap();
        prop_assert!(s.norm() < 1e-11 * scale);
    }

    #[test]
    fn theta_derivative_matches_differences(g in 1usize..=2, lam in cvec(2), dir in 0usize..2) {
        let pm = period(g);
        let lam = &lam[..g];
        let k = dir.min(g - 1);
        let chi = ThetaChar::new(vec![0.5; g], vec![0.5; g]);
        let mut order = vec![0; g];
        order[k] = 1;
        let d = theta_deriv(&pm, &chi, lam, &order, DEFAULT_TOL).unwrap();
        let h = 1e-5;
        let mut up = lam.to_vec();
        let mut dn = lam.to_vec();
        up[k] += h;
        dn[k] -= h;
        let fd = (theta_char(&pm, &chi, &up, DEFAULT_TOL).unwrap() - theta_char(&pm, &chi, &dn, DEFAULT_TOL).unwrap()) / (2.0 * h);
        prop_assert!((d - fd).norm() < 1e-6 * d.norm().max(dominant(&pm, lam)), "{d} {fd}");
    }

    #[test]
    fn lattice_reduce_is_idempotent(re in -5.0..5.0f64, im in -4.0..4.0f64) {
        let pm = period(1);
        let (z1, m, n) = lattice_reduce(&pm, &[c(re, im)]);
        let back = lattice_shift(&pm, &z1, &m, &n, 1.0);
        prop_assert!((back[0] - c(re, im)).norm() < 1e-12);
        let (z2, m2, n2) = lattice_reduce(&pm, &z1);
        prop_assert!((z2[0] - z1[0]).norm() < 1e-14 && m2 == vec![0] && n2 == vec![0]);
    }

    #[test]
    fn prime_form_is_antisymmetric(a in 0.0..1.0f64, b in 0.0..0.8f64, s in 0.0..1.0f64, t in 0.0..0.8f64) {
        let x = RealCurve::rectangular(0.8).unwrap();
        let (u, v) = (SurfacePoint::new(c(a, b)), SurfacePoint::new(c(s, t)));
        let e1 = x.prime_form(&u, &v).unwrap();
        let e2 = x.prime_form(&v, &u).unwrap();
        prop_assert!((e1 + e2).norm() < 1e-11 * e1.norm().max(1.0));
    }

    #[test]
    fn cauchy_kernel_is_hermitian(a in 0.0..1.0f64, b in 0.02..0.38f64, s in 0.0..1.0f64, t in 0.02..0.38f64) {
        let (_, ctx) = torus();
        let (u, v) = (SurfacePoint::new(c(a, b)), SurfacePoint::new(c(s, t)));
        let k1 = ctx.cauchy_kernel(&u, &v).unwrap();
        let k2 = ctx.cauchy_kernel(&v, &u).unwrap();
        prop_assert!((k1 - k2.conj()).norm() < 1e-9 * k1.norm().max(1.0));
    }

    #[test]
    fn kernel_diagonal_sign_follows_side(a in 0.0..1.0f64, b in 0.02..0.78f64) {
        prop_assume!((b - 0.4).abs() > 0.02);
        let (x, ctx) = torus();
        let q = SurfacePoint::new(c(a, b));
        let k = ctx.cauchy_kernel(&q, &q).unwrap();
        prop_assert!(k.im.abs() < 1e-9 * k.norm());
        match x.side(&q).unwrap() {
            Side::Plus => prop_assert!(k.re > 0.0),
            Side::Minus => prop_assert!(k.re < 0.0),
            Side::Real => {}
        }
    }

    #[test]
    fn hankel_inverse_is_inverse(s in 1usize..=6, lead in 0.5..1.5f64, sign in prop::bool::ANY, rest in prop::collection::vec((-1.0..1.0f64, -1.0..1.0f64), 6)) {
        let mut coeffs: Vec<C> = rest[..s - 1].iter().map(|&(a, b)| c(a, b)).collect();
        coeffs.push(c(if sign { lead } else { -lead }, 0.3));
        let h = HankelBlock::new(coeffs);
        let inv = hankel_inverse(&h).unwrap();
        let e = (h.matrix() * &inv - DMatrix::identity(s, s)).norm();
        prop_assert!(e < 1e-10, "{e}");
    }

    #[test]
    fn taylor_limit_is_kronecker_delta(d in 1usize..=5, c0 in 0.5..2.0f64, rest in prop::collection::vec((-1.0..1.0f64, -1.0..1.0f64), 5)) {
        let mut cs = vec![c(c0, 0.0)];
        cs.extend(rest[..d].iter().map(|&(a, b)| c(a, b)));
        for a in 0..d {
            for b in 0..d {
                let v = taylor_delta_check(d, a, b, &cs).unwrap();
                let e = if a == b { 1.0 } else { 0.0 };
                prop_assert!((v - e).norm() < 1e-10, "d={d} a={a} b={b} {v}");
            }
        }
    }

    #[test]
    fn meromorphic_derivative_matches_differences(s in 0.0..1.0f64, t in 0.05..0.35f64) {
        let (x, _) = torus();
        let y = MeromorphicFn::zeta_pair(&x, &SurfacePoint::new(c(0.3, 0.4)), &SurfacePoint::real(0.6)).unwrap();
        let p = c(s, t);
        prop_assume!((p - c(0.3, 0.4)).norm() > 0.05 && (p - c(0.6, 0.0)).norm() > 0.05);
        let h = 1e-5;
        let fd = (y.eval(&SurfacePoint::new(p + h)).unwrap() - y.eval(&SurfacePoint::new(p - h)).unwrap()) / (2.0 * h);
        let d = y.deriv(&SurfacePoint::new(p)).unwrap();
        prop_assert!((d - fd).norm() < 1e-6 * d.norm().max(1.0), "{d} {fd}");
    }

    #[test]
    fn resolvent_identity(ar in -2.0..2.0f64, ai in 0.3..2.0f64, br in -2.0..2.0f64, bi in -2.0..-0.3f64) {
        let x = RealCurve::genus0();
        let ctx = KernelContext::new(&x, vessel_core::surface::ToriiPoint::genus0()).unwrap();
        let pts = vec![SurfacePoint::new(c(0.2, 1.0)), SurfacePoint::new(c(-0.7, 0.4)), SurfacePoint::new(c(1.3, 2.1))];
        let ms = ModelSpace::new(ctx, pts).unwrap();
        let y = MeromorphicFn::rational(&x, vec![c(1.0, 0.0)], vec![c(-0.5, 0.0), c(1.0, 0.0)]).unwrap();
        let (a, b) = (c(ar, ai), c(br, bi));
        let ra = resolvent(&ms, &y, a).unwrap().mat;
        let rb = resolvent(&ms, &y, b).unwrap().mat;
        let e = (&ra - &rb - (&ra * &rb) * (a - b)).norm();
        prop_assert!(e < 1e-9 * (ra.norm() * rb.norm()).max(1.0), "{e}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn blaschke_products_are_inner_and_symmetric(
        zs in prop::collection::vec((0.0..1.0f64, 0.04..0.36f64), 1..=3),
        s in 0.0..1.0f64,
        t in 0.03..0.37f64,
    ) {
        let (x, ctx) = torus();
        let zeros: Vec<SurfacePoint> = zs.iter().map(|&(a, b)| SurfacePoint::new(c(a, b))).collect();
        let bp = BlaschkeProduct::new(&ctx, zeros.clone()).unwrap();
        for h in [0.0, 0.4] {
            let u = SurfacePoint::new(c(s, h));
            prop_assert!((bp.eval(&u).unwrap().norm() - 1.0).abs() < 1e-9);
        }
        let p = SurfacePoint::new(c(s, t));
        prop_assume!(zeros.iter().all(|z| (z.finite().unwrap() - c(s, t)).norm() > 0.02));
        let prod = bp.eval(&p).unwrap() * bp.eval(&x.involution(&p)).unwrap().conj();
        prop_assert!((prod - 1.0).norm() < 1e-9, "{prod}");
    }
}
