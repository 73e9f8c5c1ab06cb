use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use vessel_core::kernels::KernelContext;
use vessel_core::meromorphic::MeromorphicFn;
use vessel_core::model_ops::ModelSpace;
use vessel_core::surface::{RealCurve, SurfacePoint, ToriiPoint};
use vessel_core::vessel::*;
use vessel_core::Complex64 as C;

fn c(re: f64, im: f64) -> C {
    C::new(re, im)
}

fn torus() -> (RealCurve, ModelSpace) {
    let x = RealCurve::rectangular(0.8).unwrap();
    let ctx = KernelContext::with_char(&x, 0.3, 0.0).unwrap();
    let pts = vec![
        SurfacePoint::new(c(0.11, 0.13)),
        SurfacePoint::new(c(0.47, 0.22)),
        SurfacePoint::new(c(0.78, 0.31)),
        SurfacePoint::new(c(0.29, 0.33)),
        SurfacePoint::new(c(0.62, 0.06)),
    ];
    (x.clone(), ModelSpace::new(ctx, pts).unwrap())
}

fn genus0() -> (RealCurve, ModelSpace) {
    let x = RealCurve::genus0();
    let ctx = KernelContext::new(&x, ToriiPoint::genus0()).unwrap();
    let pts = vec![SurfacePoint::new(c(0.2, 1.0)), SurfacePoint::new(c(-0.7, 0.4)), SurfacePoint::new(c(1.3, 2.1))];
    (x, ModelSpace::new(ctx, pts).unwrap())
}

/// Real function with a conjugate pair of poles on each sheet: 1/(y − w) + 1/(y − w̄).
fn conjugate_pair(y: &MeromorphicFn, w: C) -> MeromorphicFn {
    let one = c(1.0, 0.0);
    let zero = c(0.0, 0.0);
    let a = y.mobius([zero, one, one, -w]).unwrap();
    let b = y.mobius([zero, one, one, -w.conj()]).unwrap();
    a.add(&b).unwrap()
}

fn check_all(v: &Vessel, ms: &ModelSpace, y1: &MeromorphicFn, y2: &MeromorphicFn, probes: &[SurfacePoint]) {
    let r = verify_vessel(v);
    assert!(r.max() < 1e-8, "{r:?}");
    assert!(v.jet_leak < 1e-9);
    let h = DVector::from_fn(ms.dim(), |i, _| c(1.0 / (i as f64 + 1.0), 0.3 * i as f64));
    for z in probes {
        for xi in [(1.0, 0.0), (0.0, 1.0)] {
            let e = model_map_identity_check(v, ms, y1, y2, z, &h, xi).unwrap();
            assert!(e < 1e-8, "model map {e}");
        }
    }
}

#[test]
fn genus0_layouts() {
    let (x, ms) = genus0();
    let z = MeromorphicFn::identity(&x).unwrap();
    let probes = [SurfacePoint::new(c(0.5, 0.7)), SurfacePoint::new(c(-1.5, 1.2))];
    // real simple poles
    let y2 = MeromorphicFn::rational(&x, vec![c(1.0, 0.0)], vec![c(-0.5, 0.0), c(1.0, 0.0)]).unwrap();
    let v = build_model_vessel(&ms, &z, &y2, None).unwrap();
    check_all(&v, &ms, &z, &y2, &probes);
    // conjugate pair
    let y3 = conjugate_pair(&z, c(0.4, 0.9));
    let v = build_model_vessel(&ms, &z, &y3, None).unwrap();
    assert_eq!(v.n(), 3);
    check_all(&v, &ms, &z, &y3, &probes);
    // double real pole
    let y4 = MeromorphicFn::rational(&x, vec![c(1.0, 0.0)], vec![c(0.25, 0.0), c(-1.0, 0.0), c(1.0, 0.0)]).unwrap();
    let v = build_model_vessel(&ms, &z, &y4, None).unwrap();
    assert_eq!(v.n(), 3);
    check_all(&v, &ms, &z, &y4, &probes);
}

#[test]
fn genus1_layouts() {
    let (x, ms) = torus();
    let y1 = MeromorphicFn::zeta_pair(&x, &SurfacePoint::new(c(0.3, 0.4)), &SurfacePoint::real(0.6)).unwrap();
    let probes = [SurfacePoint::new(c(0.37, 0.18)), SurfacePoint::new(c(0.91, 0.27))];
    let wp = MeromorphicFn::wp_like(&x, &SurfacePoint::real(0.45)).unwrap();
    let v = build_model_vessel(&ms, &wp, &y1, None).unwrap();
    check_all(&v, &ms, &wp, &y1, &probes);
    let y3 = conjugate_pair(&y1, c(0.5, 1.3));
    let v = build_model_vessel(&ms, &y1, &y3, None).unwrap();
    assert_eq!(v.n(), 6);
    assert!(v.poles[2..].iter().enumerate().all(|(k, p)| p.partner == 2 + (k ^ 1)));
    check_all(&v, &ms, &y1, &y3, &probes);
}

#[test]
fn reproducing_kernel_through_characteristic_function() {
    let (x, ms) = torus();
    let y1 = MeromorphicFn::zeta_pair(&x, &SurfacePoint::new(c(0.3, 0.4)), &SurfacePoint::real(0.6)).unwrap();
    let y2 = MeromorphicFn::wp_like(&x, &SurfacePoint::real(0.45)).unwrap();
    let v = build_model_vessel(&ms, &y1, &y2, None).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut pt = || SurfacePoint::new(c(rng.gen::<f64>(), 0.02 + 0.36 * rng.gen::<f64>()));
    for _ in 0..20 {
        let (p, q) = (pt(), pt());
        let via = kernel_via_ccf(&v, &ms, &y1, &y2, &p, &q, (0.6, 0.8)).unwrap();
        let direct = model_kernel(&ms, &p, &q).unwrap();
        assert!((via - direct).norm() < 1e-7 * direct.norm().max(1.0), "{via} {direct}");
    }
}

#[test]
fn perturbed_gamma_is_flagged() {
    let (x, ms) = torus();
    let y1 = MeromorphicFn::zeta_pair(&x, &SurfacePoint::new(c(0.3, 0.4)), &SurfacePoint::real(0.6)).unwrap();
    let y2 = MeromorphicFn::zeta_pair(&x, &SurfacePoint::new(c(0.7, 0.4)), &SurfacePoint::real(0.05)).unwrap();
    let mut v = build_model_vessel(&ms, &y1, &y2, None).unwrap();
    let n = v.n();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let e = DMatrix::from_fn(n, n, |_, _| c(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5));
    v.gamma += (&e + e.adjoint()) * c(0.5e-3, 0.0);
    let r = verify_vessel(&v);
    assert!(r.input > 1e-5 && r.linkage > 1e-5, "{r:?}");
    assert!(r.output < 1e-8);
}

#[test]
fn zero_vessel_is_consistent() {
    let z = DMatrix::from_element(2, 2, c(0.0, 0.0));
    let v = Vessel {
        a1: z.clone(),
        a2: z.clone(),
        phi: z.clone(),
        sigma1: z.clone(),
        sigma2: z.clone(),
        gamma: z.clone(),
        gamma_tilde: z.clone(),
        gram: DMatrix::identity(2, 2),
        poles: vec![],
        chart: "standard".into(),
        jet_leak: 0.0,
    };
    assert_eq!(verify_vessel(&v).max(), 0.0);
}

#[test]
fn discriminant_of_one_dimensional_vessel() {
    let (x, ms) = genus0();
    let z = MeromorphicFn::identity(&x).unwrap();
    let k = MeromorphicFn::constant(&x, c(2.0, 0.0)).unwrap();
    let v = build_model_vessel(&ms, &z, &k, None).unwrap();
    assert_eq!(v.n(), 1);
    let d = discriminant(&v).unwrap();
    // det(λ₁σ₂ − λ₂σ₁ + γ) = −σ₁λ₂ + γ with σ₂ = 0
    let s1 = v.sigma1[(0, 0)];
    let g = v.gamma[(0, 0)];
    assert!((d.coeffs[0][0] - g).norm() < 1e-12);
    assert!((d.coeffs[0][1] + s1).norm() < 1e-12);
    assert!(d.coeffs[1][0].norm() < 1e-12 && d.coeffs[1][1].norm() < 1e-12);
}
