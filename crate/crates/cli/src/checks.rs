//! Catalog of verifications. Each check reads its inputs from the resolved
//! scenario, draws random samples from its own seeded stream and reports one
//! or more residuals, each compared against `value ≤ tol`.

use crate::scenario::{CheckSpec, Scenario};
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::{json, Value};
use std::collections::BTreeMap;
use std::f64::consts::PI;
use vessel_core::kernels::{ExtC, KernelContext};
use vessel_core::meromorphic::MeromorphicFn;
use vessel_core::model_ops::*;
use vessel_core::surface::{RealCurve, Side, SurfacePoint, ToriiPoint};
use vessel_core::theta::{self, PeriodMatrix, ThetaChar};
use vessel_core::transfer::*;
use vessel_core::vessel::*;
use vessel_core::{Complex64 as C, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Need {
    Y,
    Y1Y2,
    Transfer,
    ModelSpace,
}

#[derive(Debug)]
pub struct CheckDef {
    pub id: &'static str,
    pub modules: &'static [&'static str],
    pub anchor: &'static str,
    pub default_tol: f64,
    pub needs: &'static [Need],
    pub run: fn(&mut Run) -> Result<()>,
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct Residual {
    pub name: String,
    pub value: f64,
    pub tol: f64,
    pub passed: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness: Option<Value>,
}

/// Numeric table dumped to CSV when a CSV directory is configured.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub name: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

/// Running maximum of a residual together with the inputs that produced it.
pub struct Tracker {
    name: String,
    tol: f64,
    value: f64,
    witness: Option<Value>,
}

impl Tracker {
    pub fn observe(&mut self, v: f64, witness: impl FnOnce() -> Value) {
        let v = if v.is_nan() { f64::INFINITY } else { v };
        if v > self.value || self.witness.is_none() {
            self.value = self.value.max(v);
            if v >= self.value {
                self.witness = Some(witness());
            }
        }
    }

    fn finish(self) -> Residual {
        let passed = self.value.is_finite() && self.value <= self.tol;
        Residual { name: self.name, value: self.value, tol: self.tol, passed, witness: if passed { None } else { self.witness } }
    }
}

/// Execution state of a single check.
pub struct Run<'a> {
    pub sc: &'a Scenario,
    pub spec: &'a CheckSpec,
    pub rng: ChaCha8Rng,
    scale: f64,
    pub residuals: Vec<Residual>,
    pub info: BTreeMap<String, Value>,
    pub tables: Vec<Table>,
}

impl<'a> Run<'a> {
    pub fn new(sc: &'a Scenario, spec: &'a CheckSpec, def: &CheckDef, rng: ChaCha8Rng, tol_scale: f64) -> Self {
        let base = spec.tol.unwrap_or(def.default_tol);
        Run { sc, spec, rng, scale: tol_scale * base / def.default_tol, residuals: vec![], info: BTreeMap::new(), tables: vec![] }
    }

    /// Tracker whose tolerance follows the check's tolerance override and the
    /// global scale, proportionally to `default`.
    pub fn tracker(&self, name: &str, default: f64) -> Tracker {
        Tracker { name: name.into(), tol: default * self.scale, value: 0.0, witness: None }
    }

    /// Tracker for a count or flag: its threshold is not scaled.
    pub fn counter(&self, name: &str) -> Tracker {
        self.fixed(name, 0.5)
    }

    /// Tracker for a unitless ratio whose threshold is not scaled.
    pub fn fixed(&self, name: &str, tol: f64) -> Tracker {
        Tracker { name: name.into(), tol, value: 0.0, witness: None }
    }

    pub fn push(&mut self, t: Tracker) {
        self.residuals.push(t.finish());
    }

    pub fn note(&mut self, key: &str, v: impl Serialize) {
        self.info.insert(key.into(), serde_json::to_value(v).unwrap_or(Value::Null));
    }

    fn samples(&self, default: usize) -> usize {
        self.spec.samples.unwrap_or(default)
    }

    fn nodes(&self, default: usize) -> usize {
        self.spec.nodes.unwrap_or(default)
    }

    fn func(&self, key: &str) -> Result<&'a MeromorphicFn> {
        let name = match key {
            "y" => &self.spec.y,
            "y1" => &self.spec.y1,
            _ => &self.spec.y2,
        };
        name.as_ref().and_then(|n| self.sc.functions.get(n)).ok_or_else(|| Error::InvalidArgument(format!("missing function {key}")))
    }

    fn ms(&self) -> Result<&'a ModelSpace> {
        self.sc.model_space.as_ref().ok_or_else(|| Error::InvalidArgument("scenario has no model space".into()))
    }

    fn transfer(&self) -> Result<&'a BlaschkeProduct> {
        self.spec
            .transfer
            .as_ref()
            .and_then(|n| self.sc.transfers.get(n))
            .map(|t| &t.product)
            .ok_or_else(|| Error::InvalidArgument("missing transfer".into()))
    }

    fn curve(&self) -> &'a RealCurve {
        &self.sc.curve
    }

    fn cplx(&mut self, r: f64) -> C {
        C::new(self.rng.gen_range(-r..r), self.rng.gen_range(-r..r))
    }

    fn vector(&mut self, n: usize) -> DVector<C> {
        DVector::from_fn(n, |_, _| C::new(self.rng.gen_range(-1.0..1.0), self.rng.gen_range(-1.0..1.0)))
    }

    /// Point of X_+ kept away from X_ℝ.
    fn plus_point(&mut self) -> Result<SurfacePoint> {
        let (s, t) = (self.rng.gen::<f64>(), self.rng.gen::<f64>());
        self.curve().plus_point(s, t, 0.05)
    }

    /// Point of X off X_ℝ, on either side when the curve is dividing.
    fn any_point(&mut self) -> SurfacePoint {
        let curve = self.curve();
        match curve.tau() {
            None => {
                let x = self.rng.gen_range(-2.0..2.0);
                let y = self.rng.gen_range(0.1..2.0) * if self.rng.gen::<bool>() { 1.0 } else { -1.0 };
                SurfacePoint::new(C::new(x, y))
            }
            Some(tau) => loop {
                let (s, t): (f64, f64) = (self.rng.gen(), self.rng.gen_range(0.03..0.97));
                if (t - 0.5).abs() > 0.03 {
                    return SurfacePoint::new(C::new(s, 0.0) + tau * t);
                }
            },
        }
    }

    /// Real point on a random component of X_ℝ.
    fn boundary_point(&mut self) -> Result<SurfacePoint> {
        let comps = self.curve().real_components()?;
        let k = self.rng.gen_range(0..comps.len());
        let s: f64 = self.rng.gen();
        let x = if comps[k].height.is_none() { (PI * (s - 0.5)).tan() } else { s };
        Ok(self.curve().boundary_point(&comps[k], x))
    }

    /// Retries sampling when the draw hits a spectrum point, a pole or a
    /// ramified fiber.
    fn retry<T>(&mut self, mut f: impl FnMut(&mut Self) -> Result<T>) -> Result<T> {
        let mut last = None;
        for _ in 0..16 {
            match f(self) {
                Ok(v) => return Ok(v),
                Err(e) if resample(&e) => {
                    let n = self.info.get("resampled").and_then(|v| v.as_u64()).unwrap_or(0);
                    self.info.insert("resampled".into(), json!(n + 1));
                    last = Some(e);
                }
                Err(e) => return Err(e),
            }
        }
        Err(last.unwrap_or(Error::InvalidArgument("sampling failed".into())))
    }
}

fn resample(e: &Error) -> bool {
    matches!(
        e,
        Error::SpectrumHit(..)
            | Error::PoleCollision
            | Error::PoleHit(_)
            | Error::RamifiedFiber(_)
            | Error::FiberIncomplete { .. }
            | Error::ThetaVanishes(_)
            | Error::QuadratureDivergence
    )
}

pub fn pj(p: &SurfacePoint) -> Value {
    match p.finite() {
        Some(z) => json!([z.re, z.im]),
        None => json!("inf"),
    }
}

pub fn cj(z: C) -> Value {
    json!([z.re, z.im])
}

fn far_from_poles(p: &SurfacePoint, fns: &[&MeromorphicFn], curve: &RealCurve, d: f64) -> bool {
    fns.iter().all(|f| f.poles().iter().all(|q| !curve.same_point(&q.point, p, d)))
}

fn far(p: &SurfacePoint, fns: &[&MeromorphicFn], curve: &RealCurve) -> Result<()> {
    if far_from_poles(p, fns, curve, 0.05) {
        Ok(())
    } else {
        Err(Error::PoleCollision)
    }
}

fn gram_norm(ms: &ModelSpace, c: &DVector<C>) -> f64 {
    ms.inner(c, c).re.abs().sqrt()
}

fn hermitian_min_eig(g: &DMatrix<C>) -> (f64, f64) {
    let h = (g + g.adjoint()) * C::new(0.5, 0.0);
    let e = h.symmetric_eigenvalues();
    let min = e.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = e.iter().map(|x| x.abs()).fold(0.0, f64::max);
    (min, max)
}

// ---- theta_core / surface ----

fn builtin_genus2() -> Result<PeriodMatrix> {
    let g = DMatrix::from_row_slice(2, 2, &[C::new(0.1, 1.1), C::new(0.25, 0.3), C::new(0.25, 0.3), C::new(-0.2, 0.9)]);
    PeriodMatrix::new(g, None)
}

/// exp(π Im λᵀ (Im Γ)⁻¹ Im λ): the largest term of the lattice sum, which is
/// the natural scale of θ(λ).
fn dominant(pm: &PeriodMatrix, lambda: &[C]) -> f64 {
    let g = pm.g();
    let y = pm.gamma().map(|z| z.im);
    let v = DVector::from_iterator(g, lambda.iter().map(|z| z.im));
    match y.try_inverse() {
        Some(yi) => (PI * v.dot(&(yi * &v))).exp(),
        None => f64::INFINITY,
    }
}

fn theta_identities(r: &mut Run) -> Result<()> {
    let tol = r.curve().theta_tol();
    let g1 = match r.curve().period_matrix() {
        Some(pm) if pm.g() == 1 => pm.clone(),
        _ => PeriodMatrix::genus1(C::new(0.0, 1.0))?,
    };
    let g2 = builtin_genus2()?;
    let mut quasi = r.tracker("quasi_periodicity", 1e-10);
    let mut parity = r.tracker("parity", 1e-11);
    let n = r.samples(500);
    for k in 0..n {
        let pm = if k % 2 == 0 { &g1 } else { &g2 };
        let g = pm.g();
        let lam: Vec<C> = (0..g).map(|_| C::new(r.rng.gen_range(-1.0..1.0), r.rng.gen_range(-0.5..0.5))).collect();
        let m: Vec<i64> = (0..g).map(|_| r.rng.gen_range(-3..=3)).collect();
        let nn: Vec<i64> = (0..g).map(|_| r.rng.gen_range(-3..=3)).collect();
        let shifted = theta::lattice_shift(pm, &lam, &m, &nn, 1.0);
        let lhs = theta::theta(pm, &shifted, tol)?;
        let mut ex = C::new(0.0, 0.0);
        for i in 0..g {
            for j in 0..g {
                ex += pm.gamma()[(i, j)] * (nn[i] * nn[j]) as f64;
            }
            ex += 2.0 * lam[i] * nn[i] as f64;
        }
        let rhs = (-C::i() * PI * ex).exp() * theta::theta(pm, &lam, tol)?;
        let w = || json!({"genus": g, "lambda": lam.iter().map(|z| cj(*z)).collect::<Vec<_>>(), "m": m, "n": nn});
        quasi.observe((lhs - rhs).norm() / dominant(pm, &shifted), w);

        let neg: Vec<C> = lam.iter().map(|z| -z).collect();
        let scale = dominant(pm, &lam);
        let even = (theta::theta(pm, &lam, tol)? - theta::theta(pm, &neg, tol)?).norm();
        let odd_char = if g == 1 { ThetaChar::odd_genus1() } else { ThetaChar::new(vec![0.5, 0.0], vec![0.5, 0.0]) };
        let odd = (theta::theta_char(pm, &odd_char, &lam, tol)? + theta::theta_char(pm, &odd_char, &neg, tol)?).norm();
        parity.observe(even.max(odd) / scale, w);
    }
    r.note("samples", n);
    r.note("theta_tol", tol);
    r.note("genus2_lambda_min", g2.lambda_min());
    r.push(quasi);
    r.push(parity);
    Ok(())
}

fn prime_form(r: &mut Run) -> Result<()> {
    let curve = r.curve();
    let tau = curve.tau();
    let slope = curve.odd_slope().norm();
    let mut zero = r.tracker("zero_locus", 1e-10);
    let mut anti = r.tracker("antisymmetry", 1e-10);
    let mut expansion = r.tracker("first_order_expansion", 1e-3);
    let mut off = r.counter("off_diagonal_zeros");
    let mut min_off = f64::INFINITY;
    let n = r.samples(100);
    for _ in 0..n {
        let u = r.any_point();
        let uz = u.finite().unwrap_or_default();
        // zero at u itself and at its lattice translates
        let (m, k) = (r.rng.gen_range(-2..=2) as f64, if tau.is_some() { r.rng.gen_range(-2..=2) as f64 } else { 0.0 });
        let shift = C::new(m, 0.0) * if tau.is_some() { 1.0 } else { 0.0 } + tau.unwrap_or_default() * k;
        let e0 = curve.prime_form(&u, &SurfacePoint::new(uz + shift))?;
        let scale = match (curve.period_matrix(), tau) {
            (Some(pm), Some(_)) => dominant(pm, &[shift]) / slope,
            _ => 1.0,
        };
        zero.observe(e0.norm() / scale, || json!({"u": pj(&u), "shift": cj(shift)}));

        let v = r.any_point();
        if curve.same_point(&u, &v, 0.05) {
            continue;
        }
        let e1 = curve.prime_form(&u, &v)?;
        let e2 = curve.prime_form(&v, &u)?;
        anti.observe((e1 + e2).norm() / e1.norm(), || json!({"u": pj(&u), "v": pj(&v)}));
        min_off = min_off.min(e1.norm());
        off.observe(if e1.norm() <= 1e-8 { 1.0 } else { 0.0 }, || json!({"u": pj(&u), "v": pj(&v)}));

        let h = C::from_polar(1e-4, r.rng.gen_range(0.0..2.0 * PI));
        let eh = curve.prime_form(&u, &SurfacePoint::new(uz + h))?;
        expansion.observe((eh / h - 1.0).norm(), || json!({"u": pj(&u), "h": cj(h)}));
    }
    r.note("min_off_diagonal_abs", min_off);
    r.push(zero);
    r.push(anti);
    r.push(expansion);
    r.push(off);
    Ok(())
}

// ---- kernels ----

fn kernel_hermitian(r: &mut Run) -> Result<()> {
    let ctx = &r.sc.ctx;
    let curve = r.curve();
    let mut herm = r.tracker("hermitian", 1e-9);
    let n = r.samples(200);
    for _ in 0..n {
        let (u, v) = (r.any_point(), r.any_point());
        let k1 = match ctx.cauchy_kernel(&u, &v) {
            Ok(k) => k,
            Err(Error::PoleHit(_)) => continue,
            Err(e) => return Err(e),
        };
        let k2 = ctx.cauchy_kernel(&v, &u)?;
        herm.observe((k1 - k2.conj()).norm() / k1.norm().max(1e-300), || json!({"u": pj(&u), "v": pj(&v)}));
    }
    r.push(herm);

    let in_t0 = ctx.zeta().nu.iter().all(|&b| b == 0);
    if curve.is_dividing() && in_t0 {
        let mut sign = r.tracker("sign_law", 1e-9);
        let mut counts = [0usize; 2];
        for _ in 0..n {
            let q = r.any_point();
            let k = ctx.cauchy_kernel(&q, &q)?;
            let s = match curve.side(&q)? {
                Side::Plus => 1.0,
                Side::Minus => -1.0,
                Side::Real => continue,
            };
            counts[(s < 0.0) as usize] += 1;
            let bad = (-s * k.re).max(0.0) + k.im.abs();
            sign.observe(bad / k.norm(), || json!({"q": pj(&q), "k": cj(k), "side": s}));
        }
        r.note("sign_law_samples_plus_minus", counts);
        r.push(sign);
    } else {
        r.note("sign_law", "skipped: curve not dividing or zeta outside T_0");
    }

    // genus-0 backend against 1/(−i(z − w̄))
    let g0 = KernelContext::new(&RealCurve::genus0(), ToriiPoint::genus0())?;
    let mut closed = r.tracker("genus0_closed_form", 1e-14);
    for _ in 0..n {
        let z = C::new(r.rng.gen_range(-3.0..3.0), r.rng.gen_range(0.05..3.0));
        let w = C::new(r.rng.gen_range(-3.0..3.0), r.rng.gen_range(0.05..3.0));
        let k = g0.cauchy_kernel(&SurfacePoint::new(z), &SurfacePoint::new(w))?;
        let exact = 1.0 / (-C::i() * (z - w.conj()));
        closed.observe((k - exact).norm() / exact.norm(), || json!({"z": cj(z), "w": cj(w)}));
    }
    r.push(closed);
    r.note("samples", n);
    Ok(())
}

fn kernel_psd(r: &mut Run) -> Result<()> {
    let batches = r.samples(8);
    let size = 6;
    let t = r.spec.transfer.as_ref().map(|_| r.transfer()).transpose()?;
    let mut psd = r.tracker("min_eigenvalue", 1e-8);
    let mut herm = r.tracker("hermitian_defect", 1e-9);
    let mut eigs = vec![];
    for _ in 0..batches {
        let pts: Vec<SurfacePoint> = (0..size).map(|_| r.plus_point()).collect::<Result<_>>()?;
        let mut g = DMatrix::from_element(size, size, C::new(0.0, 0.0));
        for i in 0..size {
            for j in 0..size {
                g[(i, j)] = match t {
                    Some(t) => kernel_kt(t, &pts[i], &pts[j])?,
                    None => r.sc.ctx.cauchy_kernel(&pts[i], &pts[j])?,
                };
            }
        }
        let (min, max) = hermitian_min_eig(&g);
        let rel = min / max.max(1e-300);
        eigs.push(rel);
        let w = || json!({"points": pts.iter().map(pj).collect::<Vec<_>>()});
        psd.observe((-rel).max(0.0), w);
        herm.observe((&g - g.adjoint()).norm() / g.norm(), w);
    }
    r.note("kernel", if t.is_some() { "K_T" } else { "K_zeta" });
    r.note("batch_min_eigenvalue_relative", eigs);
    r.push(psd);
    r.push(herm);
    Ok(())
}

/// Nearest signed permutation (entries ±1), chosen row by row.
fn signed_permutation(k: &DMatrix<C>) -> DMatrix<C> {
    let n = k.nrows();
    let mut p = DMatrix::from_element(n, n, C::new(0.0, 0.0));
    for i in 0..n {
        let j = (0..n).max_by(|&a, &b| k[(i, a)].norm().partial_cmp(&k[(i, b)].norm()).unwrap()).unwrap_or(0);
        p[(i, j)] = C::new(k[(i, j)].re.signum(), 0.0);
    }
    p
}

fn collection_formula(r: &mut Run) -> Result<()> {
    let y = r.func("y")?;
    let ctx = &r.sc.ctx;
    let n = y.degree();
    let mut three = r.tracker("three_point", 1e-8);
    let mut infty = r.tracker("through_infinity", 1e-8);
    let mut inverse = r.tracker("inverse_pair", 1e-8);
    let mut limit = r.tracker("diagonal_limit", 1e-8);
    let fibers = r.samples(50);
    let lam = |r: &mut Run| C::new(r.rng.gen_range(-3.0..3.0), r.rng.gen_range(0.2..3.0) * if r.rng.gen::<bool>() { 1.0 } else { -1.0 });
    for _ in 0..fibers {
        let (l1, l2, l3, k12, k13, k32, k31) = r.retry(|r| {
            let (l1, l2, l3) = (lam(r), lam(r), lam(r));
            let k = |a: C, b: C| ctx.collection_matrix(y, ExtC::Finite(a), ExtC::Finite(b)).map(|m| m.entries);
            Ok((l1, l2, l3, k(l1, l2)?, k(l1, l3)?, k(l3, l2)?, k(l3, l1)?))
        })?;
        let w = || json!({"lambda1": cj(l1), "lambda2": cj(l2), "lambda3": cj(l3)});
        let scale = k12.norm().max(1.0);
        three.observe((&k13 * &k32 - &k12).norm() / scale, w);
        inverse.observe((&k13 * &k31 - DMatrix::identity(n, n)).norm() / (k13.norm() * k31.norm()).max(1.0), w);
        let k1i = ctx.collection_matrix(y, ExtC::Finite(l1), ExtC::Infinity)?.entries;
        let ki2 = ctx.collection_matrix(y, ExtC::Infinity, ExtC::Finite(l2))?.entries;
        infty.observe((&k1i * &ki2 - &k12).norm() / scale, w);

        // K(λ, λ + ε) → I: Richardson in ε after undoing fiber order and √dy signs
        let eps = C::from_polar(1e-5 * l1.norm().max(1.0), r.rng.gen_range(0.0..2.0 * PI));
        let ka = ctx.collection_matrix(y, ExtC::Finite(l1), ExtC::Finite(l1 + eps))?.entries;
        let kb = ctx.collection_matrix(y, ExtC::Finite(l1), ExtC::Finite(l1 + eps * 0.5))?.entries;
        let pa = signed_permutation(&ka);
        let pb = signed_permutation(&kb);
        let extrap = &kb * pb.transpose() * C::new(2.0, 0.0) - &ka * pa.transpose();
        limit.observe((extrap - DMatrix::identity(n, n)).norm(), || json!({"lambda": cj(l1), "epsilon": cj(eps)}));
    }
    r.note("fibers", fibers);
    r.note("degree", n);
    r.push(three);
    r.push(infty);
    r.push(inverse);
    r.push(limit);
    Ok(())
}

fn generalized_collection(r: &mut Run) -> Result<()> {
    let y = r.func("y")?;
    let ctx = &r.sc.ctx;
    let curve = r.curve();
    let mut res = r.tracker("generalized_collection", 1e-7);
    let n = r.samples(20);
    for k in 0..n {
        let (v, w, val) = r.retry(|r| {
            let v = r.any_point();
            let w = if k % 5 == 4 { v } else { r.any_point() };
            far(&v, &[y], curve)?;
            far(&w, &[y], curve)?;
            let lhs = if curve.same_point(&v, &w, 1e-12) {
                y.deriv(&v)?.norm()
            } else {
                ((y.eval(&v)? - y.eval(&w)?) * ctx.s_kernel(&v, &w)?).norm()
            };
            Ok((v, w, ctx.generalized_collection_check(y, &v, &w)? / lhs.max(1.0)))
        })?;
        res.observe(val, || json!({"v": pj(&v), "w": pj(&w)}));
    }
    r.note("max_pole_order", y.poles().iter().map(|p| p.order).max().unwrap_or(0));
    r.push(res);
    Ok(())
}

fn dividing_certificate(r: &mut Run) -> Result<()> {
    let y = r.func("y")?;
    let cert = y.is_dividing(r.samples(64));
    let mut agree = r.counter("criteria_agree");
    let residue_route = cert.poles_real_simple_negative.unwrap_or(false);
    let sampled = cert.dividing;
    agree.observe(if sampled == residue_route { 0.0 } else { 1.0 }, || {
        json!({"sampled_dividing": sampled, "real_simple_negative_poles": residue_route, "violations": cert.violations.len()})
    });
    r.note("dividing", sampled);
    r.note("real_simple_negative_poles", residue_route);
    r.note("samples_checked", cert.samples_checked);
    r.note("violations", cert.violations.iter().take(5).map(|v| json!({"point": pj(&v.point), "value": cj(v.value), "kind": v.kind})).collect::<Vec<_>>());
    r.push(agree);
    Ok(())
}

// ---- model_ops ----

fn model_algebra(r: &mut Run) -> Result<()> {
    let (y1, y2, ms) = (r.func("y1")?, r.func("y2")?, r.ms()?);
    let rep = algebra_check(ms, y1, y2)?;
    let m1 = model_operator_collocated(ms, y1)?.mat;
    let m2 = model_operator_collocated(ms, y2)?.mat;
    let (n1, n2) = (ms.op_norm(&m1), ms.op_norm(&m2));
    let w = || json!({"op_norms": [n1, n2]});
    let mut sum = r.tracker("sum", 1e-7);
    sum.observe(rep.sum / (n1 + n2).max(1.0), w);
    let mut prod = r.tracker("product", 1e-7);
    prod.observe(rep.product / (n1 * n2).max(1.0), w);
    let mut comm = r.tracker("commutator", 1e-7);
    comm.observe(rep.commutator / (n1 * n2).max(1.0), w);

    // discriminant polynomial annihilates the pair
    let v = build_model_vessel(ms, y1, y2, None)?;
    let d = discriminant(&v)?;
    let a1n = ms.op_norm(&v.a1);
    let a2n = ms.op_norm(&v.a2);
    let p = d.eval_matrices(&v.a1, &v.a2);
    let mut ch = r.tracker("cayley_hamilton", 1e-7);
    ch.observe(ms.op_norm(&p) / d.scale(C::new(a1n, 0.0), C::new(a2n, 0.0)).max(1e-300), w);
    r.note("model_dim", ms.dim());
    r.note("discriminant_degree", v.n());
    r.push(sum);
    r.push(prod);
    r.push(comm);
    r.push(ch);
    Ok(())
}

fn resolvent_laws(r: &mut Run) -> Result<()> {
    let (y, ms) = (r.func("y")?, r.ms()?);
    let curve = r.curve();
    let m = ms.dim();
    let mop = model_operator(ms, y)?.mat;
    let mut inv = r.tracker("inverse", 1e-9);
    let mut ident = r.tracker("resolvent_identity", 1e-9);
    let mut point = r.tracker("pointwise_vs_matrix", 1e-8);
    let mut eig = r.tracker("kernel_eigenvectors", 1e-8);
    let n = r.samples(30);
    let draw = |r: &mut Run| {
        let s = if r.rng.gen::<bool>() { 1.0 } else { -1.0 };
        C::new(r.rng.gen_range(-3.0..3.0), s * r.rng.gen_range(0.3..2.0))
    };
    for _ in 0..n {
        let (a, b, ra, rb) = r.retry(|r| {
            let (a, b) = (draw(r), draw(r));
            Ok((a, b, resolvent(ms, y, a)?.mat, resolvent(ms, y, b)?.mat))
        })?;
        let w = || json!({"alpha": cj(a), "beta": cj(b)});
        let (na, nb) = (ms.op_norm(&ra), ms.op_norm(&rb));
        let mi = &mop - DMatrix::identity(m, m) * a;
        inv.observe(ms.op_norm(&(&ra * &mi - DMatrix::identity(m, m))) / (na * ms.op_norm(&mi)).max(1.0), w);
        ident.observe(ms.op_norm(&(&ra - &rb - &ra * &rb * (a - b))) / (na * nb * (a - b).norm()).max(1.0), w);

        let c = r.vector(m);
        let (u, pw, mat) = r.retry(|r| {
            let u = r.any_point();
            far(&u, &[y], curve)?;
            Ok((u, resolvent_pointwise(ms, y, a, &c, &u)?, ms.eval(&(&ra * &c), &u)?))
        })?;
        point.observe((pw - mat).norm() / mat.norm().max(1.0), || json!({"alpha": cj(a), "u": pj(&u)}));

        let j = r.rng.gen_range(0..m);
        let mut e = DVector::from_element(m, C::new(0.0, 0.0));
        e[j] = C::new(1.0, 0.0);
        let lhs = model_operator_pointwise(ms, y, &e, &u)?;
        let rhs = y.eval(&ms.points()[j])?.conj() * ms.ctx().cauchy_kernel(&u, &ms.points()[j])?;
        eig.observe((lhs - rhs).norm() / rhs.norm().max(1.0), || json!({"u": pj(&u), "w": pj(&ms.points()[j])}));
    }
    r.note("pairs", n);
    r.push(inv);
    r.push(ident);
    r.push(point);
    r.push(eig);
    Ok(())
}

fn structure_identity(r: &mut Run) -> Result<()> {
    let (y, ms) = (r.func("y")?, r.ms()?);
    let m = ms.dim();
    let mut res = r.tracker("structure_identity", 1e-8);
    let mut chart = r.tracker("chart_rescaling", 1e-9);
    let n = r.samples(20);
    let draw = |r: &mut Run| C::new(r.rng.gen_range(-3.0..3.0), r.rng.gen_range(0.3..2.0) * if r.rng.gen::<bool>() { 1.0 } else { -1.0 });
    for _ in 0..n {
        let f = r.vector(m);
        let g = r.vector(m);
        let rescale = r.rng.gen_range(0.2..5.0);
        let (a, b, r1, r2, scale) = r.retry(|r| {
            let (a, b) = (draw(r), draw(r));
            let ra = resolvent(ms, y, a)?.mat;
            let rb = resolvent(ms, y, b)?.mat;
            let scale = (gram_norm(ms, &(&ra * &f)) * gram_norm(ms, &g) + gram_norm(ms, &f) * gram_norm(ms, &(&rb * &g))).max(1.0);
            let r1 = structure_identity_residual(ms, y, a, b, &f, &g, 1.0)?;
            let r2 = structure_identity_residual(ms, y, a, b, &f, &g, rescale)?;
            Ok((a, b, r1, r2, scale))
        })?;
        let w = || json!({"alpha": cj(a), "beta": cj(b), "chart_scale": rescale});
        res.observe(r1 / scale, w);
        chart.observe((r1 - r2).abs() / scale, w);
    }
    r.push(res);
    r.push(chart);
    Ok(())
}

fn hankel_inverse_check(r: &mut Run) -> Result<()> {
    let mut right = r.tracker("right_inverse", 1e-10);
    let mut left = r.tracker("left_inverse", 1e-10);
    let n = r.samples(20);
    for k in 0..n {
        let s = 1 + k % 6;
        let mut coeffs: Vec<C> = (0..s - 1).map(|_| r.cplx(1.0)).collect();
        let lead = C::from_polar(r.rng.gen_range(0.5..1.5), r.rng.gen_range(0.0..2.0 * PI));
        coeffs.push(lead);
        let h = HankelBlock::new(coeffs.clone());
        let hi = hankel_inverse(&h)?;
        let hm = h.matrix();
        let id = DMatrix::identity(s, s);
        let w = || json!({"coeffs": coeffs.iter().map(|c| cj(*c)).collect::<Vec<_>>()});
        right.observe((&hm * &hi - &id).norm(), w);
        left.observe((&hi * &hm - &id).norm(), w);
    }
    let singular = matches!(hankel_inverse(&HankelBlock::new(vec![C::new(1.0, 0.0), C::new(0.0, 0.0)])), Err(Error::SingularBlock));
    let mut flag = r.counter("singular_block_rejected");
    flag.observe(if singular { 0.0 } else { 1.0 }, || json!("a_{-s} = 0"));
    r.push(right);
    r.push(left);
    r.push(flag);
    Ok(())
}

fn taylor_delta(r: &mut Run) -> Result<()> {
    let mut res = r.tracker("kronecker_delta", 1e-10);
    let n = r.samples(20);
    for k in 0..n {
        let d = 1 + k % 5;
        let mut cs = vec![C::from_polar(r.rng.gen_range(0.5..2.0), r.rng.gen_range(0.0..2.0 * PI))];
        cs.extend((0..d).map(|_| r.cplx(1.0)));
        for a in 0..d {
            for b in 0..d {
                let v = taylor_delta_check(d, a, b, &cs)?;
                let e = if a == b { 1.0 } else { 0.0 };
                res.observe((v - e).norm(), || json!({"d": d, "a": a, "b": b, "c": cs.iter().map(|c| cj(*c)).collect::<Vec<_>>()}));
            }
        }
    }
    r.push(res);
    Ok(())
}

// ---- vessel ----

fn vessel_of(r: &Run) -> Result<(Vessel, &'static str)> {
    let (y1, y2, ms) = (r.func("y1")?, r.func("y2")?, r.ms()?);
    Ok((build_model_vessel(ms, y1, y2, None)?, "model"))
}

fn pole_layout(v: &Vessel) -> Value {
    let n_real = v.poles.iter().enumerate().filter(|(i, p)| p.partner == *i).count();
    json!({
        "dimension": v.n(),
        "poles": v.poles.len(),
        "real_poles": n_real,
        "conjugate_pairs": (v.poles.len() - n_real) / 2,
        "max_order": v.poles.iter().map(|p| p.order).max().unwrap_or(0),
        "orders": v.poles.iter().map(|p| p.order).collect::<Vec<_>>(),
    })
}

fn colligation(r: &mut Run) -> Result<()> {
    let (v, _) = vessel_of(r)?;
    let rep = verify_vessel(&v);
    let layout = pole_layout(&v);
    let mut c1 = r.tracker("colligation_1", 1e-8);
    c1.observe(rep.colligation1, || layout.clone());
    let mut c2 = r.tracker("colligation_2", 1e-8);
    c2.observe(rep.colligation2, || layout.clone());
    let mut sa = r.tracker("sigma_selfadjoint", 1e-8);
    sa.observe(rep.sigma_selfadjoint, || layout.clone());
    r.note("layout", &layout);
    r.push(c1);
    r.push(c2);
    r.push(sa);
    Ok(())
}

fn vessel_conditions(r: &mut Run) -> Result<()> {
    let (v, _) = vessel_of(r)?;
    let rep = verify_vessel(&v);
    let layout = pole_layout(&v);
    for (name, val) in [
        ("input", rep.input),
        ("output", rep.output),
        ("linkage", rep.linkage),
        ("commutator", rep.commutator),
        ("gamma_selfadjoint", rep.gamma_selfadjoint),
        ("jet_leak", v.jet_leak),
    ] {
        let mut t = r.tracker(name, 1e-8);
        t.observe(val, || layout.clone());
        r.push(t);
    }
    r.note("layout", layout);
    Ok(())
}

fn discriminant_equality(r: &mut Run) -> Result<()> {
    let (v, _) = vessel_of(r)?;
    let (y1, y2) = (r.func("y1")?, r.func("y2")?);
    let curve = r.curve();
    let d = discriminant(&v)?;
    let mut eq = r.tracker("gamma_vs_gamma_tilde", 1e-8);
    eq.observe(d.gamma_mismatch, || json!({"degree": v.n()}));
    let mut on = r.tracker("vanishes_on_image", 1e-8);
    for _ in 0..r.samples(20) {
        let (u, l1, l2) = r.retry(|r| {
            let u = r.any_point();
            far(&u, &[y1, y2], curve)?;
            Ok((u, y1.eval(&u)?, y2.eval(&u)?))
        })?;
        on.observe(d.eval(l1, l2).norm() / d.scale(l1, l2), || json!({"u": pj(&u), "lambda": [cj(l1), cj(l2)]}));
    }
    r.note("coefficients", d.coeffs.iter().map(|row| row.iter().map(|c| cj(*c)).collect::<Vec<_>>()).collect::<Vec<_>>());
    r.push(eq);
    r.push(on);
    Ok(())
}

fn unit_direction(r: &mut Run) -> (f64, f64) {
    let t = r.rng.gen_range(0.0..2.0 * PI);
    (t.cos(), t.sin())
}

fn ccf_metric_check(r: &mut Run) -> Result<()> {
    let (v, _) = vessel_of(r)?;
    let mut iso = r.tracker("isometric_on_real_axis", 1e-8);
    let mut exp = r.tracker("expansive_above", 1e-8);
    let n = r.samples(20);
    for _ in 0..n {
        let (x1, x2) = unit_direction(r);
        let sig = (&v.sigma1 * C::new(x1, 0.0) + &v.sigma2 * C::new(x2, 0.0)).norm().max(1.0);
        let (z, e) = r.retry(|r| {
            let z = C::new(r.rng.gen_range(-5.0..5.0), 0.0);
            Ok((z, ccf_metric(&v, x1, x2, z)?))
        })?;
        let dev = e.iter().map(|x| x.abs()).fold(0.0, f64::max);
        iso.observe(dev / sig, || json!({"xi": [x1, x2], "z": cj(z)}));
        let (z, e) = r.retry(|r| {
            let z = C::new(r.rng.gen_range(-5.0..5.0), r.rng.gen_range(0.05..3.0));
            Ok((z, ccf_metric(&v, x1, x2, z)?))
        })?;
        exp.observe((-e[0]).max(0.0) / sig, || json!({"xi": [x1, x2], "z": cj(z), "min_eig": e[0]}));
    }
    r.push(iso);
    r.push(exp);
    Ok(())
}

fn jcf_independence(r: &mut Run) -> Result<()> {
    let (v, _) = vessel_of(r)?;
    let (y1, y2) = (r.func("y1")?, r.func("y2")?);
    let curve = r.curve();
    let mut spread = r.tracker("direction_spread", 1e-7);
    let mut image = r.tracker("image_in_kernel", 1e-7);
    let mut singular = 0usize;
    let n = r.samples(10);
    for _ in 0..n {
        let mut dirs = vec![(1.0, 0.0), (0.0, 1.0)];
        for _ in 0..3 {
            dirs.push(unit_direction(r));
        }
        let out = r.retry(|r| {
            let u = r.any_point();
            far(&u, &[y1, y2], curve)?;
            let (l1, l2) = (y1.eval(&u)?, y2.eval(&u)?);
            match jcf(&v, l1, l2, &dirs) {
                Ok(j) => Ok(Some((u, j))),
                Err(Error::SingularCurvePoint(_)) => Ok(None),
                Err(e) => Err(e),
            }
        })?;
        let (u, j) = match out {
            Some(x) => x,
            None => {
                singular += 1;
                continue;
            }
        };
        let w = || json!({"u": pj(&u), "value": cj(j.value)});
        spread.observe(j.spread / j.value.norm().max(1.0), w);
        image.observe(j.image_residual, w);
    }
    if singular == n {
        return Err(Error::SingularCurvePoint(2));
    }
    r.note("singular_points_skipped", singular);
    r.push(spread);
    r.push(image);
    Ok(())
}

fn model_map_identity(r: &mut Run) -> Result<()> {
    let (v, _) = vessel_of(r)?;
    let (y1, y2, ms) = (r.func("y1")?, r.func("y2")?, r.ms()?);
    let curve = r.curve();
    let mut res = r.tracker("model_map", 1e-8);
    for _ in 0..r.samples(12) {
        let h = r.vector(ms.dim());
        let xi = unit_direction(r);
        let (z, e, hz) = r.retry(|r| {
            let z = r.plus_point()?;
            far(&z, &[y1, y2], curve)?;
            Ok((z, model_map_identity_check(&v, ms, y1, y2, &z, &h, xi)?, ms.eval(&h, &z)?))
        })?;
        res.observe(e / hz.norm().max(1.0), || json!({"z": pj(&z), "xi": [xi.0, xi.1]}));
    }
    r.push(res);
    Ok(())
}

fn kernel_via_ccf_check(r: &mut Run) -> Result<()> {
    let (v, _) = vessel_of(r)?;
    let (y1, y2, ms) = (r.func("y1")?, r.func("y2")?, r.ms()?);
    let curve = r.curve();
    let mut res = r.tracker("reproducing_kernel", 1e-7);
    for _ in 0..r.samples(20) {
        let xi = unit_direction(r);
        let (p, q, via, direct) = r.retry(|r| {
            let (p, q) = (r.plus_point()?, r.plus_point()?);
            far(&p, &[y1, y2], curve)?;
            far(&q, &[y1, y2], curve)?;
            Ok((p, q, kernel_via_ccf(&v, ms, y1, y2, &p, &q, xi)?, model_kernel(ms, &p, &q)?))
        })?;
        res.observe((via - direct).norm() / direct.norm().max(1.0), || json!({"p": pj(&p), "q": pj(&q), "xi": [xi.0, xi.1]}));
    }
    r.push(res);
    Ok(())
}

// ---- transfer ----

fn blaschke_inner(r: &mut Run) -> Result<()> {
    let t = r.transfer()?;
    let curve = r.curve();
    let mut factor = r.tracker("factor_unimodular", 1e-8);
    let mut prod = r.tracker("product_unimodular", 1e-8);
    let mut sym = r.tracker("symmetry", 1e-9);
    let n = r.samples(64);
    for _ in 0..n {
        let u = r.boundary_point()?;
        for a in &t.zeros {
            let b = blaschke_factor(curve, a, &u)?;
            factor.observe((b.norm() - 1.0).abs(), || json!({"zero": pj(a), "u": pj(&u)}));
        }
        let tv = t.eval(&u)?;
        prod.observe((tv.norm() - 1.0).abs(), || json!({"u": pj(&u)}));
        let p = r.any_point();
        if t.zeros.iter().any(|a| curve.same_point(a, &p, 0.02) || curve.same_point(&curve.involution(a), &p, 0.02)) {
            continue;
        }
        let s = t.eval(&p)? * t.eval(&curve.involution(&p))?.conj();
        sym.observe((s - 1.0).norm(), || json!({"p": pj(&p), "product": cj(s)}));
    }
    r.note("zeros", t.zeros.iter().map(pj).collect::<Vec<_>>());
    r.note("zeta_out_torus", torus_index(curve, t.ctx_out().zeta()));
    r.push(factor);
    r.push(prod);
    r.push(sym);
    Ok(())
}

fn contractivity(r: &mut Run) -> Result<()> {
    let t = r.transfer()?;
    let grid = r.samples(24);
    let seed = r.rng.gen::<u64>();
    let rep = contractivity_report(t, grid, 8, 6, seed)?;
    let witness = json!({
        "max_abs_t": rep.max_abs_t,
        "max_point": cj(rep.max_point),
        "min_batch": rep.min_batch,
        "min_batch_points": rep.min_batch_points.iter().map(|z| cj(*z)).collect::<Vec<_>>(),
        "min_eig_rel": rep.min_eig_rel,
    });
    let mut sup = r.tracker("sup_abs_t", 1e-8);
    sup.observe((rep.max_abs_t - 1.0).max(0.0), || witness.clone());
    let mut psd = r.tracker("kt_psd", 1e-8);
    psd.observe((-rep.min_eig_rel).max(0.0), || witness.clone());
    let mut eq = r.counter("criteria_agree");
    eq.observe(if rep.consistent { 0.0 } else { 1.0 }, || witness.clone());
    r.note("max_abs_t", rep.max_abs_t);
    r.note("batch_min_eigs", &rep.batch_min_eigs);
    r.tables.push(Table {
        name: "grid".into(),
        header: vec!["re".into(), "im".into(), "abs_t".into()],
        rows: rep
            .grid
            .iter()
            .map(|g| {
vec![g.point.re, g.point.im, g.abs_t]
            })
            .collect(),
    });
    r.push(sup);
    r.push(psd);
    r.push(eq);
    Ok(())
}

fn njcf(r: &mut Run) -> Result<()> {
    let t = r.transfer()?;
    let (y1, y2) = (r.func("y1")?, r.func("y2")?);
    let curve = r.curve();
    let ms = transfer_model_space(t)?;
    let v = build_model_vessel(&ms, y1, y2, None)?;
    let mut res = r.tracker("two_routes", 1e-6);
    for _ in 0..r.samples(10) {
        let xi = unit_direction(r);
        let (p, q, e, scale) = r.retry(|r| {
            let (p, q) = (r.plus_point()?, r.plus_point()?);
            far(&p, &[y1, y2], curve)?;
            far(&q, &[y1, y2], curve)?;
            let e = njcf_consistency(&v, &ms, y1, y2, t, &[(p, q)], xi)?;
            Ok((p, q, e, kernel_kt(t, &p, &q)?.norm()))
        })?;
        res.observe(e / scale.max(1.0), || json!({"p": pj(&p), "q": pj(&q), "xi": [xi.0, xi.1]}));
    }
    r.note("vessel_dimension", v.n());
    r.note("model_dim", ms.dim());
    r.push(res);
    Ok(())
}

/// Offset from X_ℝ at which the boundary rule is still resolving the
/// kernel's nearby pole at the default node count.
fn near_boundary(curve: &RealCurve, x: f64) -> SurfacePoint {
    match curve.tau() {
        None => SurfacePoint::new(C::new(x, 0.008)),
        Some(_) => SurfacePoint::new(C::new(x, 0.002)),
    }
}

fn beurling(r: &mut Run) -> Result<()> {
    let t = r.transfer()?;
    let curve = r.curve();
    let nodes = r.nodes(2048);
    let f = r.vector(t.zeros.len());
    let mut orth = r.tracker("orthogonality", 1e-5);
    let mut refine = r.fixed("refinement_ratio", 0.5);
    let mut rows = vec![];
    for k in 0..r.samples(2) {
        let v = r.plus_point()?;
        let e = beurling_orthogonality(t, &f, &v, nodes)?;
        orth.observe(e, || json!({"v": pj(&v), "nodes": nodes}));
        let vn = near_boundary(curve, 0.5 + 0.25 * k as f64);
        let e1 = beurling_orthogonality(t, &f, &vn, nodes)?;
        let e2 = beurling_orthogonality(t, &f, &vn, 4 * nodes)?;
        orth.observe(e1, || json!({"v": pj(&vn), "nodes": nodes}));
        // both at round-off: no refinement left to observe
        let ratio = if e1 <= 1e-13 { 0.0 } else { e2 / e1 };
        refine.observe(ratio, || json!({"v": pj(&vn), "coarse": e1, "fine": e2, "nodes": [nodes, 4 * nodes]}));
        rows.push(vec![vn.finite().unwrap_or_default().im, nodes as f64, e1, (4 * nodes) as f64, e2]);
    }
    r.tables.push(Table {
        name: "refinement".into(),
        header: ["offset", "nodes", "residual", "nodes_fine", "residual_fine"].iter().map(|s| s.to_string()).collect(),
        rows,
    });
    r.push(orth);
    r.push(refine);
    Ok(())
}

fn mm_duality_check(r: &mut Run) -> Result<()> {
    let (y, ms) = (r.func("y")?, r.ms()?);
    let nodes = r.nodes(2048);
    let mut res = r.tracker("duality", 1e-5);
    for _ in 0..r.samples(3) {
        let c = r.vector(ms.dim());
        let (alpha, v, e) = r.retry(|r| {
            let alpha = C::new(r.rng.gen_range(-2.0..2.0), r.rng.gen_range(0.3..2.0));
            let v = r.plus_point()?;
            Ok((alpha, v, mm_duality(ms, y, alpha, &c, &v, nodes)?))
        })?;
        res.observe(e, || json!({"alpha": cj(alpha), "v": pj(&v), "nodes": nodes}));
    }
    r.push(res);
    Ok(())
}

// ---- registry ----

const Y: &[Need] = &[Need::Y];
const Y_MS: &[Need] = &[Need::Y, Need::ModelSpace];
const PAIR_MS: &[Need] = &[Need::Y1Y2, Need::ModelSpace];
const T: &[Need] = &[Need::Transfer];

pub static CATALOG: &[CheckDef] = &[
    CheckDef { id: "theta_identities", modules: &["theta_core"], anchor: "theta quasi-periodicity under the lattice and parity of characteristics", default_tol: 1e-10, needs: &[], run: theta_identities },
    CheckDef { id: "prime_form", modules: &["surface", "theta_core"], anchor: "prime form vanishes exactly on the diagonal, antisymmetry, first-order local expansion", default_tol: 1e-10, needs: &[], run: prime_form },
    CheckDef { id: "kernel_hermitian", modules: &["kernels", "surface"], anchor: "Cauchy kernel Hermitian symmetry and sign on the two halves for the zero torus", default_tol: 1e-9, needs: &[], run: kernel_hermitian },
    CheckDef { id: "kernel_psd", modules: &["kernels", "transfer"], anchor: "positivity of the Cauchy kernel (or of K_T) on X_+", default_tol: 1e-8, needs: &[], run: kernel_psd },
    CheckDef { id: "collection_formula", modules: &["kernels", "meromorphic"], anchor: "collection formulas for the fiber matrices K(lambda1, lambda2)", default_tol: 1e-8, needs: Y, run: collection_formula },
    CheckDef { id: "generalized_collection", modules: &["kernels", "meromorphic"], anchor: "collection formula for functions with poles of higher order", default_tol: 1e-7, needs: Y, run: generalized_collection },
    CheckDef { id: "dividing_certificate", modules: &["meromorphic"], anchor: "dividing functions have only real simple poles with negative residues", default_tol: 0.5, needs: Y, run: dividing_certificate },
    CheckDef { id: "model_algebra", modules: &["model_ops", "vessel"], anchor: "model operators form an algebra homomorphism; discriminant annihilates the pair", default_tol: 1e-7, needs: PAIR_MS, run: model_algebra },
    CheckDef { id: "resolvent_laws", modules: &["model_ops", "kernels"], anchor: "resolvent of the model operator, resolvent identity, Cauchy kernels as eigenvectors", default_tol: 1e-9, needs: Y_MS, run: resolvent_laws },
    CheckDef { id: "structure_identity", modules: &["model_ops", "kernels"], anchor: "quadratic structure identity for the resolvents and its chart independence", default_tol: 1e-8, needs: Y_MS, run: structure_identity },
    CheckDef { id: "colligation", modules: &["vessel", "model_ops"], anchor: "colligation condition with Hankel and conjugate-pair sigma blocks", default_tol: 1e-8, needs: PAIR_MS, run: colligation },
    CheckDef { id: "vessel_conditions", modules: &["vessel"], anchor: "input, output and linkage vessel conditions for the model vessel", default_tol: 1e-8, needs: PAIR_MS, run: vessel_conditions },
    CheckDef { id: "discriminant_equality", modules: &["vessel"], anchor: "input and output discriminant polynomials coincide and vanish on the image of the curve", default_tol: 1e-8, needs: PAIR_MS, run: discriminant_equality },
    CheckDef { id: "ccf_metric", modules: &["vessel"], anchor: "complete characteristic function is isometric on the real axis and expansive above it", default_tol: 1e-8, needs: PAIR_MS, run: ccf_metric_check },
    CheckDef { id: "jcf_independence", modules: &["vessel"], anchor: "joint characteristic function does not depend on the direction", default_tol: 1e-7, needs: PAIR_MS, run: jcf_independence },
    CheckDef { id: "model_map_identity", modules: &["vessel", "model_ops"], anchor: "functional model map reproduces the model-space sections", default_tol: 1e-8, needs: PAIR_MS, run: model_map_identity },
    CheckDef { id: "kernel_via_ccf", modules: &["vessel", "model_ops", "kernels"], anchor: "reproducing kernel in terms of the joint characteristic function", default_tol: 1e-7, needs: PAIR_MS, run: kernel_via_ccf_check },
    CheckDef { id: "blaschke_inner", modules: &["transfer", "surface"], anchor: "theta-Blaschke products are unimodular on X_R and satisfy T(p) conj T(tau p) = 1", default_tol: 1e-8, needs: T, run: blaschke_inner },
    CheckDef { id: "contractivity", modules: &["transfer", "kernels"], anchor: "T contractive on X_+ if and only if K_T is positive", default_tol: 1e-8, needs: T, run: contractivity },
    CheckDef { id: "njcf_consistency", modules: &["transfer", "vessel"], anchor: "normalized joint characteristic function equals the Blaschke transfer function", default_tol: 1e-6, needs: &[Need::Transfer, Need::Y1Y2], run: njcf },
    CheckDef { id: "beurling_orthogonality", modules: &["transfer", "kernels"], anchor: "H(T) is orthogonal to T times the Hardy space (Beurling-Lax)", default_tol: 1e-5, needs: T, run: beurling },
    CheckDef { id: "mm_duality", modules: &["transfer", "model_ops"], anchor: "resolvent invariance duality with multiplication by 1/(y - conj alpha)", default_tol: 1e-5, needs: Y_MS, run: mm_duality_check },
    CheckDef { id: "hankel_inverse", modules: &["model_ops"], anchor: "inverse of an upper-skew-triangular Hankel block", default_tol: 1e-10, needs: &[], run: hankel_inverse_check },
    CheckDef { id: "taylor_delta", modules: &["model_ops"], anchor: "Kronecker-delta Taylor coefficient lemma", default_tol: 1e-10, needs: &[], run: taylor_delta },
];

pub fn catalog() -> &'static [CheckDef] {
    CATALOG
}

pub fn lookup(id: &str) -> Option<&'static CheckDef> {
    CATALOG.iter().find(|d| d.id == id)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn catalog_ids_unique_and_anchored() {
        let mut ids: Vec<&str> = CATALOG.iter().map(|d| d.id).collect();
        ids.sort();
        ids.dedup();
        assert_eq!(ids.len(), CATALOG.len());
        for d in CATALOG {
            assert!(!d.anchor.is_empty() && d.default_tol > 0.0 && !d.modules.is_empty());
        }
        for id in ["collection_formula", "structure_identity", "vessel_conditions", "kernel_psd", "beurling_orthogonality"] {
            assert!(lookup(id).is_some(), "{id}");
        }
    }

    #[test]
    fn tracker_keeps_worst_witness() {
        let mut t = Tracker { name: "x".into(), tol: 1.0, value: 0.0, witness: None };
        t.observe(0.5, || json!(1));
        t.observe(2.0, || json!(2));
        t.observe(1.5, || json!(3));
        let r = t.finish();
        assert!(!r.passed && r.value == 2.0 && r.witness == Some(json!(2)));
        let mut t = Tracker { name: "nan".into(), tol: 1.0, value: 0.0, witness: None };
        t.observe(f64::NAN, || json!("bad"));
        assert!(!t.finish().passed);
    }

    #[test]
    fn signed_permutation_recovers_order() {
        let mut k = DMatrix::from_element(3, 3, C::new(1e-3, 0.0));
        k[(0, 2)] = C::new(1.0, 1e-4);
        k[(1, 0)] = C::new(-0.999, 0.0);
        k[(2, 1)] = C::new(1.001, 0.0);
        let p = signed_permutation(&k);
        assert_eq!(p[(0, 2)], C::new(1.0, 0.0));
        assert_eq!(p[(1, 0)], C::new(-1.0, 0.0));
        assert_eq!(p[(2, 1)], C::new(1.0, 0.0));
    }
}
