//! Real meromorphic functions on the curve.
//!
//! A function is an expression tree over a few atoms (constants, rational
//! functions on the sphere, differences of logarithmic derivatives of θ[δ] and
//! their derivatives on a torus). Laurent data anywhere come from series
//! arithmetic on the atoms' expansions, so pole orders and coefficients are
//! exact up to roundoff rather than fitted.

use crate::error::{Error, Result};
use crate::poly;
use crate::series::Laurent;
use crate::surface::{Backend, RealCurve, SurfacePoint, POINT_TOL};
use crate::theta::{self, lattice_coords};
use num_complex::Complex64;
use serde::Serialize;
use std::f64::consts::PI;

type C = Complex64;

fn cz() -> C {
    C::new(0.0, 0.0)
}

/// Fiber points closer than this (mod Λ) are identified.
pub const FIBER_DEDUP: f64 = 1e-6;
/// Ramification guard on |dy|.
pub const RAMIFICATION_TOL: f64 = 1e-8;
/// Newton seed grid per side on genus one.
pub const SEED_GRID: usize = 40;

/// Local coordinate used for Laurent data.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Chart {
    /// z − p on the sphere.
    Affine,
    /// t = −1/z at the point at infinity.
    AtInfinity,
    /// u − p in the flat chart of the torus.
    Flat,
}

impl Chart {
    pub fn id(&self) -> &'static str {
        match self {
            Chart::Affine => "affine",
            Chart::AtInfinity => "t=-1/z",
            Chart::Flat => "flat",
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Pole {
    pub point: SurfacePoint,
    pub order: usize,
    /// a_{−s}, …, a_{−1}, a_0 in `chart`.
    pub laurent: Vec<C>,
    pub chart: Chart,
}

impl Pole {
    /// Coefficient a_k for −s ≤ k ≤ 0.
    pub fn coeff(&self, k: i32) -> C {
        let idx = k + self.order as i32;
        if idx < 0 || idx as usize >= self.laurent.len() {
            return cz();
        }
        self.laurent[idx as usize]
    }

    pub fn residue(&self) -> C {
        self.coeff(-1)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Fiber {
    pub alpha: C,
    pub points: Vec<SurfacePoint>,
    pub dy_values: Vec<C>,
}

#[derive(Debug, Clone)]
enum Expr {
    Const(C),
    /// N/D on the sphere, ascending coefficients; `roots` are the distinct
    /// roots of D.
    Rational { num: Vec<C>, den: Vec<C>, roots: Vec<C> },
    /// L(u − a) − L(u − b) + c0 with L = θ[δ]'/θ[δ].
    ZetaPair { a: C, b: C, c0: C },
    /// −L'(u − a): double pole, leading coefficient 1.
    WpLike { a: C },
    Sum(Box<Expr>, Box<Expr>),
    Product(Box<Expr>, Box<Expr>),
    /// (m0·f + m1)/(m2·f + m3).
    Mobius([C; 4], Box<Expr>),
}

impl Expr {
    /// Upper bound on the pole order at any point, used as series headroom.
    fn depth(&self) -> i32 {
        match self {
            Expr::Const(_) => 0,
            Expr::Rational { num, den, .. } => {
                let dn = poly::degree(num) as i32;
                let dd = poly::degree(den) as i32;
                dd + (dn - dd).max(0)
            }
            Expr::ZetaPair { .. } => 1,
            Expr::WpLike { .. } => 2,
            Expr::Sum(a, b) => a.depth().max(b.depth()),
            Expr::Product(a, b) => a.depth() + b.depth(),
            Expr::Mobius(_, f) => 2 * f.depth() + 2,
        }
    }
}

/// A real meromorphic function with precomputed pole divisor.
#[derive(Debug, Clone)]
pub struct MeromorphicFn {
    curve: RealCurve,
    expr: Expr,
    poles: Vec<Pole>,
    degree: usize,
    headroom: i32,
}

/// L(w + t) = θ[δ]'/θ[δ] expanded in t, known for exponents < `order`.
fn log_deriv_series(curve: &RealCurve, w: C, order: i32) -> Result<Laurent> {
    let pm = curve.pm()?;
    let delta = curve.odd_char().ok_or_else(|| Error::UnsupportedBackend("odd characteristic".into()))?;
    let tau = pm.gamma()[(0, 0)];
    let (s, t) = lattice_coords(pm, &[w]);
    let m = s[0].round();
    let n = t[0].round();
    let wr = w - m - tau * n;
    let k_max = (order + 3).max(3) as usize;
    let at_lattice = wr.norm() <= 1e-10;
    let center = if at_lattice { cz() } else { wr };
    let mut jet = theta::theta_jet(pm, delta, &[center], &[C::new(1.0, 0.0)], k_max, curve.theta_tol())?;
    let th = if at_lattice {
        for (k, c) in jet.iter_mut().enumerate() {
            if k % 2 == 0 {
                *c = cz();
            }
        }
        Laurent::new(1, jet[1..].to_vec())
    } else {
        Laurent::taylor(jet)
    };
    let l = th.deriv().div(&th);
    let shift = Laurent::constant(C::new(0.0, -2.0 * PI * n), (order.max(1)) as usize);
    Ok(l.add(&shift).truncate_order(order))
}

fn pad(mut v: Vec<C>, n: usize) -> Vec<C> {
    if v.len() < n {
        v.resize(n, cz());
    }
    v
}

/// Laurent expansion of N/D at p (affine chart or t = −1/z at ∞), exponents < order.
fn rational_series(num: &[C], den: &[C], p: &SurfacePoint, order: i32, headroom: i32) -> Laurent {
    let len = (order + headroom + 2).max(1) as usize;
    match p {
        SurfacePoint::Finite(z) => {
            let n = Laurent::taylor(pad(poly::shift(num, *z), len + headroom as usize));
            let d = Laurent::taylor(pad(poly::shift(den, *z), len + headroom as usize)).normalize(1e-11);
            n.div(&d).truncate_order(order)
        }
        SurfacePoint::Infinity => {
            let at_inf = |q: &[C]| {
                let q = poly::trim(q);
                let dq = q.len() - 1;
                let coeffs: Vec<C> = (0..=dq)
                    .map(|j| {
                        let k = dq - j;
                        if k % 2 == 0 {
                            q[k]
                        } else {
                            -q[k]
                        }
                    })
                    .collect();
                Laurent::new(-(dq as i32), pad(coeffs, len + 2 * headroom as usize + dq))
            };
            let n = at_inf(num);
            let d = at_inf(den).normalize(1e-11);
            n.div(&d).truncate_order(order)
        }
    }
}

impl MeromorphicFn {
    fn build(curve: &RealCurve, expr: Expr, extra_candidates: Vec<SurfacePoint>) -> Result<Self> {
        let headroom = expr.depth() + 2;
        let mut f = MeromorphicFn { curve: curve.clone(), expr, poles: vec![], degree: 0, headroom };
        let mut cands = f.candidates()?;
        cands.extend(extra_candidates);
        let mut uniq: Vec<SurfacePoint> = vec![];
        for c in cands {
            if !uniq.iter().any(|u| curve.same_point(u, &c, 1e-7)) {
                uniq.push(c);
            }
        }
        let mut poles = vec![];
        for p in uniq {
            let s = f.series(&p, 1)?.normalize(1e-10);
            if s.val < 0 {
                let order = (-s.val) as usize;
                let laurent = (0..=order).map(|j| s.coeff(j as i32 - order as i32)).collect();
                let chart = match (curve.genus(), &p) {
                    (0, SurfacePoint::Infinity) => Chart::AtInfinity,
                    (0, _) => Chart::Affine,
                    _ => Chart::Flat,
                };
                poles.push(Pole { point: p, order, laurent, chart });
            }
        }
        f.poles = order_poles(curve, poles);
        f.degree = f.poles.iter().map(|p| p.order).sum();
        Ok(f)
    }

    /// Candidate pole locations from the atoms.
    fn candidates(&self) -> Result<Vec<SurfacePoint>> {
        self.expr_candidates(&self.expr)
    }

    fn expr_candidates(&self, e: &Expr) -> Result<Vec<SurfacePoint>> {
        Ok(match e {
            Expr::Const(_) => vec![],
            Expr::Rational { num, den, roots } => {
                let mut v: Vec<SurfacePoint> = roots.iter().cloned().map(SurfacePoint::Finite).collect();
                if poly::degree(num) > poly::degree(den) {
                    v.push(SurfacePoint::Infinity);
                }
                v
            }
            Expr::ZetaPair { a, b, .. } => vec![SurfacePoint::Finite(*a), SurfacePoint::Finite(*b)],
            Expr::WpLike { a } => vec![SurfacePoint::Finite(*a)],
            Expr::Sum(a, b) | Expr::Product(a, b) => {
                let mut v = self.expr_candidates(a)?;
                v.extend(self.expr_candidates(b)?);
                v
            }
            Expr::Mobius(m, f) => {
                if m[2].norm() == 0.0 {
                    self.expr_candidates(f)?
                } else {
                    let inner = MeromorphicFn::build(&self.curve, (**f).clone(), vec![])?;
                    inner.fiber_points(-m[3] / m[2], true)?
                }
            }
        })
    }

    fn expr_series(&self, e: &Expr, p: &SurfacePoint, order: i32) -> Result<Laurent> {
        let len = (order + 1).max(1) as usize;
        match e {
            Expr::Const(c) => Ok(Laurent::constant(*c, len)),
            Expr::Rational { num, den, .. } => Ok(rational_series(num, den, p, order, self.headroom)),
            Expr::ZetaPair { a, b, c0 } => {
                let u = self.finite(p)?;
                let la = log_deriv_series(&self.curve, u - a, order)?;
                let lb = log_deriv_series(&self.curve, u - b, order)?;
                Ok(la.sub(&lb).add(&Laurent::constant(*c0, len)))
            }
            Expr::WpLike { a } => {
                let u = self.finite(p)?;
                Ok(log_deriv_series(&self.curve, u - a, order + 1)?.deriv().neg())
            }
            Expr::Sum(a, b) => Ok(self.expr_series(a, p, order)?.add(&self.expr_series(b, p, order)?)),
            Expr::Product(a, b) => {
                let h = self.headroom;
                let sa = self.expr_series(a, p, order + h)?;
                let sb = self.expr_series(b, p, order + h)?;
                Ok(sa.mul(&sb).truncate_order(order))
            }
            Expr::Mobius(m, f) => {
                let h = self.headroom;
                let s = self.expr_series(f, p, order + 2 * h)?.trim_principal(1e-10);
                let one = Laurent::constant(C::new(1.0, 0.0), s.coeffs.len() + s.val.max(0) as usize);
                let num = s.scale(m[0]).add(&one.scale(m[1]));
                let mut den = s.scale(m[2]).add(&one.scale(m[3]));
                if s.val >= 0 {
                    // a zero of m2·f + m3 shows up as cancellation in the leading terms
                    let cancel = (m[2] * s.coeff(0)).norm() + m[3].norm();
                    let lead = den.coeffs.iter().take_while(|c| c.norm() <= 1e-11 * cancel).count();
                    if lead > 0 && lead < den.coeffs.len() {
                        den.coeffs.drain(..lead);
                        den.val += lead as i32;
                    }
                }
                Ok(num.div(&den).truncate_order(order))
            }
        }
    }

    fn finite(&self, p: &SurfacePoint) -> Result<C> {
        p.finite().ok_or_else(|| Error::InvalidArgument("point at infinity on a torus".into()))
    }

    /// Laurent expansion at p in the standard chart, known for exponents < `order`.
    pub fn series(&self, p: &SurfacePoint, order: i32) -> Result<Laurent> {
        self.expr_series(&self.expr, p, order)
    }

    // ---- constructors ----

    pub fn constant(curve: &RealCurve, c: C) -> Result<Self> {
        let e = if curve.genus() == 0 {
            rational_expr(&[c], &[C::new(1.0, 0.0)])
        } else {
            Expr::Const(c)
        };
        MeromorphicFn::build(curve, e, vec![])
    }

    /// N(z)/D(z) on the sphere, ascending coefficient lists.
    pub fn rational(curve: &RealCurve, num: Vec<C>, den: Vec<C>) -> Result<Self> {
        if curve.genus() != 0 {
            return Err(Error::UnsupportedBackend("rational functions in z need genus 0".into()));
        }
        if poly::trim(&den).iter().all(|c| c.norm() == 0.0) {
            return Err(Error::InvalidArgument("zero denominator".into()));
        }
        MeromorphicFn::build(curve, rational_expr(&num, &den), vec![])
    }

    /// y(z) = z on the sphere.
    pub fn identity(curve: &RealCurve) -> Result<Self> {
        MeromorphicFn::rational(curve, vec![cz(), C::new(1.0, 0.0)], vec![C::new(1.0, 0.0)])
    }

    /// Elliptic function with simple poles at a (residue +1) and b (residue −1).
    /// When a and b are real the reality constant makes y(τu) = conj(y(u)).
    pub fn zeta_pair(curve: &RealCurve, a: &SurfacePoint, b: &SurfacePoint) -> Result<Self> {
        curve.require_genus1()?;
        let (za, zb) = match (a, b) {
            (SurfacePoint::Finite(x), SurfacePoint::Finite(y)) => (*x, *y),
            _ => return Err(Error::InvalidArgument("poles must be finite lifts".into())),
        };
        if curve.same_point(a, b, POINT_TOL) {
            return Err(Error::CoincidentPoles);
        }
        let c0 = match (curve.lattice_offset(&a.conj(), a, POINT_TOL), curve.lattice_offset(&b.conj(), b, POINT_TOL)) {
            (Some((_, na)), Some((_, nb))) => C::new(0.0, PI * (na - nb) as f64),
            _ => cz(),
        };
        MeromorphicFn::build(curve, Expr::ZetaPair { a: za, b: zb, c0 }, vec![])
    }

    /// −(θ[δ]'/θ[δ])'(u − a): a ℘-type function with a double pole at a.
    pub fn wp_like(curve: &RealCurve, a: &SurfacePoint) -> Result<Self> {
        curve.require_genus1()?;
        let za = a.finite().ok_or_else(|| Error::InvalidArgument("pole must be a finite lift".into()))?;
        MeromorphicFn::build(curve, Expr::WpLike { a: za }, vec![])
    }

    fn same_curve(&self, o: &MeromorphicFn) -> Result<()> {
        if self.curve.genus() != o.curve.genus() || self.curve.tau() != o.curve.tau() {
            return Err(Error::InvalidArgument("functions live on different curves".into()));
        }
        Ok(())
    }

    fn combine_rational(&self, o: &MeromorphicFn, op: &str) -> Option<Expr> {
        if let (Expr::Rational { num: n1, den: d1, .. }, Expr::Rational { num: n2, den: d2, .. }) = (&self.expr, &o.expr) {
            let (num, den) = match op {
                "add" => (poly::add(&poly::mul(n1, d2), &poly::mul(n2, d1)), poly::mul(d1, d2)),
                _ => (poly::mul(n1, n2), poly::mul(d1, d2)),
            };
            return Some(rational_expr(&num, &den));
        }
        None
    }

    pub fn add(&self, o: &MeromorphicFn) -> Result<Self> {
        self.same_curve(o)?;
        let e = self
            .combine_rational(o, "add")
            .unwrap_or_else(|| Expr::Sum(Box::new(self.expr.clone()), Box::new(o.expr.clone())));
        MeromorphicFn::build(&self.curve, e, vec![])
    }

    pub fn mul(&self, o: &MeromorphicFn) -> Result<Self> {
        self.same_curve(o)?;
        let e = self
            .combine_rational(o, "mul")
            .unwrap_or_else(|| Expr::Product(Box::new(self.expr.clone()), Box::new(o.expr.clone())));
        MeromorphicFn::build(&self.curve, e, vec![])
    }

    pub fn scale(&self, s: C) -> Result<Self> {
        self.mul(&MeromorphicFn::constant(&self.curve, s)?)
    }

    pub fn shift(&self, c: C) -> Result<Self> {
        self.add(&MeromorphicFn::constant(&self.curve, c)?)
    }

    /// (m0·y + m1)/(m2·y + m3).
    pub fn mobius(&self, m: [C; 4]) -> Result<Self> {
        if (m[0] * m[3] - m[1] * m[2]).norm() == 0.0 {
            return Err(Error::InvalidArgument("degenerate Möbius map".into()));
        }
        if let Expr::Rational { num, den, .. } = &self.expr {
            let n = poly::add(&poly::scale(num, m[0]), &poly::scale(den, m[1]));
            let d = poly::add(&poly::scale(num, m[2]), &poly::scale(den, m[3]));
            return MeromorphicFn::build(&self.curve, rational_expr(&n, &d), vec![]);
        }
        MeromorphicFn::build(&self.curve, Expr::Mobius(m, Box::new(self.expr.clone())), vec![])
    }

    // ---- accessors ----

    pub fn curve(&self) -> &RealCurve {
        &self.curve
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    /// Poles ordered real first, then conjugate pairs adjacent.
    pub fn poles(&self) -> &[Pole] {
        &self.poles
    }

    pub fn has_simple_poles(&self) -> bool {
        self.poles.iter().all(|p| p.order == 1)
    }

    /// Index of the pole paired with pole i under the involution.
    pub fn pole_partner(&self, i: usize) -> Option<usize> {
        let target = self.curve.involution(&self.poles[i].point);
        self.poles.iter().position(|q| self.curve.same_point(&q.point, &target, 1e-7))
    }

    pub fn is_pole(&self, p: &SurfacePoint, tol: f64) -> bool {
        self.poles.iter().any(|q| self.curve.same_point(&q.point, p, tol))
    }

    /// Laurent coefficients a_{−s}..a_{k_max} at pole i.
    pub fn laurent_at_pole(&self, i: usize, k_max: i32) -> Result<Vec<C>> {
        let pole = &self.poles[i];
        let s = self.series(&pole.point, k_max + 1)?;
        Ok((-(pole.order as i32)..=k_max).map(|k| s.coeff(k)).collect())
    }

    /// Taylor coefficients c_0..c_k at a regular point (standard chart there).
    pub fn taylor_at(&self, p: &SurfacePoint, k: usize) -> Result<Vec<C>> {
        let s = self.series(p, k as i32 + 1)?;
        if s.val < 0 {
            let c0 = s.coeff(0).norm().max(1.0);
            if (s.val..0).any(|j| s.coeff(j).norm() > 1e-8 * c0) {
                return Err(Error::PoleCollision);
            }
        }
        Ok((0..=k as i32).map(|j| s.coeff(j)).collect())
    }

    pub fn eval(&self, p: &SurfacePoint) -> Result<C> {
        Ok(self.taylor_at(p, 0)?[0])
    }

    /// Chart derivative dy at p.
    pub fn deriv(&self, p: &SurfacePoint) -> Result<C> {
        Ok(self.taylor_at(p, 1)?[1])
    }

    fn value_and_deriv(&self, z: C) -> Option<(C, C)> {
        let s = self.series(&SurfacePoint::Finite(z), 2).ok()?;
        if s.val < 0 {
            let lead = s.coeff(s.val);
            if lead.norm() > 1e-8 * s.coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max) {
                return None;
            }
        }
        let v = s.coeff(0);
        let d = s.coeff(1);
        if v.is_finite() && d.is_finite() {
            Some((v, d))
        } else {
            None
        }
    }

    // ---- fibers ----

    /// All points with y(u) = α; errors if the count differs from the degree
    /// or a point is ramified.
    pub fn solve_fiber(&self, alpha: C) -> Result<Fiber> {
        if self.degree == 0 {
            return Err(Error::InvalidArgument("constant function has no fibers".into()));
        }
        let points = self.fiber_points(alpha, false)?;
        let mut dy_values = vec![];
        for p in &points {
            let d = self.deriv(p)?;
            if d.norm() <= RAMIFICATION_TOL {
                return Err(Error::RamifiedFiber(d.norm()));
            }
            dy_values.push(d);
        }
        Ok(Fiber { alpha, points, dy_values })
    }

    fn fiber_points(&self, alpha: C, allow_partial: bool) -> Result<Vec<SurfacePoint>> {
        match (&self.expr, self.curve.backend()) {
            (Expr::Rational { num, den, .. }, Backend::Genus0) => {
                let q = poly::trim(&poly::add(num, &poly::scale(den, -alpha)));
                let n = self.degree;
                let mut pts: Vec<SurfacePoint> = if q.iter().all(|c| c.norm() == 0.0) {
                    vec![]
                } else {
                    poly::roots(&q).into_iter().map(SurfacePoint::Finite).collect()
                };
                if pts.len() < n {
                    if let Ok(v) = self.eval(&SurfacePoint::Infinity) {
                        if (v - alpha).norm() <= 1e-8 * alpha.norm().max(1.0) {
                            pts.push(SurfacePoint::Infinity);
                        }
                    }
                }
                let mut uniq: Vec<SurfacePoint> = vec![];
                for p in pts {
                    if !uniq.iter().any(|u| self.curve.same_point(u, &p, FIBER_DEDUP)) {
                        uniq.push(p);
                    }
                }
                if uniq.len() != n && !allow_partial {
                    return Err(Error::FiberIncomplete { found: uniq.len(), expected: n });
                }
                Ok(uniq)
            }
            _ => self.newton_fiber(alpha, allow_partial),
        }
    }

    fn newton_fiber(&self, alpha: C, allow_partial: bool) -> Result<Vec<SurfacePoint>> {
        let tau = self.curve.require_genus1()?;
        let n = self.degree;
        let scale = alpha.norm().max(1.0);
        let mut found: Vec<SurfacePoint> = vec![];
        let mut visited = vec![false; SEED_GRID * SEED_GRID];
        for step in [10usize, 5, 2, 1] {
            for i in (0..SEED_GRID).step_by(step) {
                for j in (0..SEED_GRID).step_by(step) {
                    if visited[i * SEED_GRID + j] {
                        continue;
                    }
                    visited[i * SEED_GRID + j] = true;
                    if found.len() == n && !allow_partial {
                        return Ok(found);
                    }
                    let seed = C::new((i as f64 + 0.5) / SEED_GRID as f64, 0.0) + tau * ((j as f64 + 0.37) / SEED_GRID as f64);
                    if let Some(z) = self.newton(seed, alpha, tau, scale) {
                        let p = self.curve.reduce(&SurfacePoint::Finite(z));
                        if !found.iter().any(|q| self.curve.same_point(q, &p, FIBER_DEDUP)) {
                            found.push(p);
                        }
                    }
                }
            }
        }
        if found.len() != n && !allow_partial {
            return Err(Error::FiberIncomplete { found: found.len(), expected: n });
        }
        Ok(found)
    }

    fn newton(&self, seed: C, alpha: C, tau: C, scale: f64) -> Option<C> {
        let cap = 0.25 * tau.norm().min(1.0);
        let mut z = seed;
        for _ in 0..80 {
            let (v, d) = self.value_and_deriv(z)?;
            let r = v - alpha;
            if r.norm() <= 1e-14 * scale {
                break;
            }
            let mut step = r / d;
            if !step.is_finite() {
                return None;
            }
            if step.norm() > cap {
                step *= cap / step.norm();
            }
            z -= step;
            if step.norm() < 1e-16 {
                break;
            }
        }
        let (v, _) = self.value_and_deriv(z)?;
        if (v - alpha).norm() <= 1e-10 * scale {
            Some(z)
        } else {
            None
        }
    }

    // ---- dividing type ----

    /// Sampled test of y(X_ℝ) ⊂ ℝ and y(X_+) ⊂ ℂ_+, with the residue-sign cross-check.
    pub fn is_dividing(&self, samples: usize) -> DividingCertificate {
        let mut cert = DividingCertificate::default();
        if !self.curve.is_dividing() {
            cert.note = Some("curve is not of dividing type".into());
            return cert;
        }
        let comps = match self.curve.real_components() {
            Ok(c) => c,
            Err(e) => {
                cert.note = Some(e.to_string());
                return cert;
            }
        };
        let samples = samples.max(1);
        for comp in &comps {
            for k in 0..samples {
                let s = (k as f64 + 0.5) / samples as f64;
                let x = if comp.height.is_none() { (PI * (s - 0.5)).tan() } else { s };
                let p = self.curve.boundary_point(comp, x);
                if let Ok(v) = self.eval(&p) {
                    if v.norm() > 1e8 {
                        continue;
                    }
                    cert.samples_checked += 1;
                    if v.im.abs() > 1e-9 * v.norm().max(1.0) {
                        cert.violations.push(DividingViolation { point: p, value: v, kind: "boundary" });
                    }
                }
            }
        }
        let golden = 0.5 * (5f64.sqrt() - 1.0);
        for k in 0..samples {
            let s = (k as f64 + 0.5) / samples as f64;
            let t = (k as f64 * golden + 0.25).fract();
            let p = match self.curve.plus_point(s, t, 0.02) {
                Ok(p) => p,
                Err(_) => break,
            };
            if let Ok(v) = self.eval(&p) {
                if v.norm() > 1e8 {
                    continue;
                }
                cert.samples_checked += 1;
                if v.im < -1e-9 * v.norm().max(1.0) {
                    cert.violations.push(DividingViolation { point: p, value: v, kind: "upper" });
                }
            }
        }
        cert.dividing = cert.violations.is_empty() && self.degree > 0;
        let mut residue_ok = true;
        for pole in &self.poles {
            let real = self.curve.same_point(&pole.point, &self.curve.involution(&pole.point), 1e-8);
            let orient = self.curve.chart_orientation(&pole.point);
            match (real, orient, pole.order) {
                (true, Some(o), 1) => {
                    let r = pole.residue() * o;
                    cert.oriented_residues.push(r);
                    if !(r.re < 0.0 && r.im.abs() <= 1e-8 * r.norm().max(1.0)) {
                        residue_ok = false;
                    }
                }
                _ => residue_ok = false,
            }
        }
        cert.poles_real_simple_negative = Some(residue_ok);
        cert
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct DividingViolation {
    pub point: SurfacePoint,
    pub value: C,
    /// "boundary" (non-real value on X_ℝ) or "upper" (value below ℝ on X_+).
    pub kind: &'static str,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct DividingCertificate {
    pub dividing: bool,
    pub samples_checked: usize,
    pub violations: Vec<DividingViolation>,
    /// Residues multiplied by the chart orientation at real simple poles.
    pub oriented_residues: Vec<C>,
    pub poles_real_simple_negative: Option<bool>,
    pub note: Option<String>,
}

/// N/D with D rebuilt from its clustered roots, so that multiple roots are
/// exact roots of the stored polynomial.
fn rational_expr(num: &[C], den: &[C]) -> Expr {
    let den = poly::trim(den);
    let n = den.len() - 1;
    let mut snapped = vec![den[n]];
    let mut roots = vec![];
    if n > 0 {
        let r = poly::roots(&den);
        let mut clusters: Vec<(C, usize)> = vec![];
        for z in r {
            let tol = 1e-5 * z.norm().max(1.0);
            match clusters.iter_mut().find(|(c, _)| (c - z).norm() <= tol) {
                Some(cl) => {
                    cl.0 = (cl.0 * cl.1 as f64 + z) / (cl.1 as f64 + 1.0);
                    cl.1 += 1;
                }
                None => clusters.push((z, 1)),
            }
        }
        for (mut z, m) in clusters {
            // a root of multiplicity m is a simple root of D^(m−1)
            let mut dm = den.clone();
            for _ in 1..m {
                dm = poly::deriv(&dm);
            }
            let dm1 = poly::deriv(&dm);
            for _ in 0..4 {
                let step = poly::eval(&dm, z) / poly::eval(&dm1, z);
                if step.is_finite() {
                    z -= step;
                }
            }
            roots.push(z);
            for _ in 0..m {
                snapped = poly::mul(&snapped, &[-z, C::new(1.0, 0.0)]);
            }
        }
    }
    Expr::Rational { num: poly::trim(num), den: snapped, roots }
}

/// Real poles first (in discovery order), then conjugate pairs adjacent.
fn order_poles(curve: &RealCurve, poles: Vec<Pole>) -> Vec<Pole> {
    let is_real = |p: &Pole| curve.same_point(&p.point, &curve.involution(&p.point), 1e-8);
    let mut out: Vec<Pole> = poles.iter().filter(|p| is_real(p)).cloned().collect();
    let mut rest: Vec<Pole> = poles.into_iter().filter(|p| !is_real(p)).collect();
    while !rest.is_empty() {
        let p = rest.remove(0);
        let target = curve.involution(&p.point);
        let partner = rest.iter().position(|q| curve.same_point(&q.point, &target, 1e-7));
        out.push(p);
        if let Some(j) = partner {
            out.push(rest.remove(j));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C {
        C::new(re, im)
    }

    fn square() -> RealCurve {
        RealCurve::rectangular(1.0).unwrap()
    }

    #[test]
    fn identity_fiber_and_pole() {
        let x = RealCurve::genus0();
        let y = MeromorphicFn::identity(&x).unwrap();
        assert_eq!(y.degree(), 1);
        assert_eq!(y.poles()[0].point, SurfacePoint::Infinity);
        assert!((y.poles()[0].residue() - c(-1.0, 0.0)).norm() < 1e-14);
        let f = y.solve_fiber(c(3.0, 1.0)).unwrap();
        assert_eq!(f.points.len(), 1);
        assert!((f.points[0].finite().unwrap() - c(3.0, 1.0)).norm() < 1e-12);
    }

    #[test]
    fn zeta_pair_residues_and_reality() {
        let x = square();
        let a = SurfacePoint::new(c(0.3, 0.5));
        let b = SurfacePoint::real(0.7);
        let y = MeromorphicFn::zeta_pair(&x, &a, &b).unwrap();
        assert_eq!(y.degree(), 2);
        let total: C = y.poles().iter().map(|p| p.residue()).sum();
        assert!(total.norm() < 1e-9);
        let r: Vec<C> = y.poles().iter().map(|p| p.residue()).collect();
        assert!(r.iter().any(|v| (v - 1.0).norm() < 1e-9));
        for u in [c(0.11, 0.23), c(0.71, 0.83), c(0.42, 0.37)] {
            let p = SurfacePoint::new(u);
            let v1 = y.eval(&p).unwrap();
            let v2 = y.eval(&x.involution(&p)).unwrap();
            assert!((v1 - v2.conj()).norm() < 1e-9, "{v1} {v2}");
        }
    }

    #[test]
    fn zeta_pair_fiber_has_two_points() {
        let x = square();
        let y = MeromorphicFn::zeta_pair(&x, &SurfacePoint::new(c(0.3, 0.5)), &SurfacePoint::real(0.7)).unwrap();
        let alpha = c(0.4, 1.3);
        let f = y.solve_fiber(alpha).unwrap();
        assert_eq!(f.points.len(), 2);
        for p in &f.points {
            assert!((y.eval(p).unwrap() - alpha).norm() < 1e-9);
        }
        let p = SurfacePoint::new(c(0.21, 0.17));
        let f2 = y.solve_fiber(y.eval(&p).unwrap()).unwrap();
        assert!(f2.points.iter().any(|q| x.same_point(q, &p, 1e-8)));
    }

    #[test]
    fn wp_like_double_pole() {
        let x = square();
        let y = MeromorphicFn::wp_like(&x, &SurfacePoint::real(0.25)).unwrap();
        assert_eq!(y.poles().len(), 1);
        let p = &y.poles()[0];
        assert_eq!(p.order, 2);
        assert!((p.coeff(-2) - 1.0).norm() < 1e-10);
        assert!(p.coeff(-1).norm() < 1e-10);
    }

    #[test]
    fn derivative_matches_differences() {
        let x = square();
        let y = MeromorphicFn::zeta_pair(&x, &SurfacePoint::new(c(0.3, 0.5)), &SurfacePoint::real(0.7)).unwrap();
        let p = c(0.13, 0.29);
        let h = 1e-5;
        let fd = (y.eval(&SurfacePoint::new(p + h)).unwrap() - y.eval(&SurfacePoint::new(p - h)).unwrap()) / (2.0 * h);
        let d = y.deriv(&SurfacePoint::new(p)).unwrap();
        assert!((fd - d).norm() < 1e-6 * d.norm());
    }

    #[test]
    fn dividing_classification_genus0() {
        let x = RealCurve::genus0();
        let y = MeromorphicFn::identity(&x).unwrap();
        let cert = y.is_dividing(64);
        assert!(cert.dividing);
        assert_eq!(cert.poles_real_simple_negative, Some(true));
        let sq = y.mul(&y).unwrap();
        let cert = sq.is_dividing(64);
        assert!(!cert.dividing);
        assert!(cert.violations.iter().any(|v| v.kind == "upper"));
    }

    #[test]
    fn dividing_zeta_pair_on_two_components() {
        let x = square();
        let y = MeromorphicFn::zeta_pair(&x, &SurfacePoint::new(c(0.3, 0.5)), &SurfacePoint::real(0.7)).unwrap();
        let cert = y.is_dividing(48);
        assert!(cert.dividing, "{:?}", cert.violations.first());
        assert_eq!(cert.poles_real_simple_negative, Some(true));
    }

    #[test]
    fn mobius_value_near_inner_pole() {
        let x = RealCurve::rectangular(0.8).unwrap();
        let y = MeromorphicFn::zeta_pair(&x, &SurfacePoint::new(c(0.3, 0.4)), &SurfacePoint::real(0.6)).unwrap();
        let w = c(0.5, 1.3);
        let m = y.mobius([cz(), c(1.0, 0.0), c(1.0, 0.0), -w]).unwrap();
        // close to the pole of y at 0.3 + 0.4i, where its Taylor coefficients grow quickly
        let p = SurfacePoint::new(c(0.29, 0.33));
        let direct = 1.0 / (y.eval(&p).unwrap() - w);
        assert!((m.eval(&p).unwrap() - direct).norm() < 1e-12 * direct.norm());
    }

    #[test]
    fn mobius_moves_poles() {
        let x = square();
        let y = MeromorphicFn::zeta_pair(&x, &SurfacePoint::new(c(0.3, 0.5)), &SurfacePoint::real(0.7)).unwrap();
        let w = y.mobius([cz(), c(1.0, 0.0), c(1.0, 0.0), c(-2.0, 0.0)]).unwrap();
        assert_eq!(w.degree(), 2);
        for p in w.poles() {
            assert!((y.eval(&p.point).unwrap() - 2.0).norm() < 1e-8);
        }
    }

    #[test]
    fn rational_with_double_pole() {
        let x = RealCurve::genus0();
        // 1/(z-1)^2
        let y = MeromorphicFn::rational(&x, vec![c(1.0, 0.0)], vec![c(1.0, 0.0), c(-2.0, 0.0), c(1.0, 0.0)]).unwrap();
        assert_eq!(y.degree(), 2);
        assert_eq!(y.poles()[0].order, 2);
        assert!((y.poles()[0].coeff(-2) - 1.0).norm() < 1e-6);
    }
}
