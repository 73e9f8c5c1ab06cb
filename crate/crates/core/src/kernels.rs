//! Cauchy kernels, their derivatives, Gram matrices and collection matrices.
//!
//! Everything is built on the unconjugated kernel
//! S(x, z) = θ[ζ](x − z) / (θ[ζ](0) E(x, z)) ≈ 1/(z − x),
//! holomorphic in both slots, and K_ζ(u, v) = i·S(τv, u).
//! On genus one S(x, z) = F(x − z) with
//! F(w) = −θ[δ]'(0) θ[ζ](w) / (θ[ζ](0) θ[δ](w)).
//! On genus zero the point at infinity uses t = −1/z with √(dz/dt) = 1/t.

use crate::error::{Error, Result};
use crate::meromorphic::{Fiber, MeromorphicFn};
use crate::series::Laurent;
use crate::surface::{RealCurve, SurfacePoint, ToriiPoint};
use crate::theta::{self, ThetaChar};
use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::Serialize;
use std::f64::consts::PI;

type C = Complex64;

const I: C = C::new(0.0, 1.0);

/// Threshold on |E| (equivalently the lattice distance) for the pole locus.
pub const POLE_TOL: f64 = 1e-12;
/// Public derivative cap for `cauchy_kernel_deriv`.
pub const KERNEL_DERIV_CAP: usize = 6;

fn factorial(n: usize) -> f64 {
    (1..=n).fold(1.0, |a, k| a * k as f64)
}

/// λ ∈ ℂ ∪ {∞}.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum ExtC {
    Finite(C),
    Infinity,
}

#[derive(Debug, Clone)]
pub struct KernelContext {
    curve: RealCurve,
    zeta: ToriiPoint,
    chi: Option<ThetaChar>,
    theta0: C,
}

#[derive(Debug, Clone)]
pub struct CollectionMatrix {
    pub entries: DMatrix<C>,
    pub lambda1: ExtC,
    pub lambda2: ExtC,
}

impl KernelContext {
    pub fn new(curve: &RealCurve, zeta: ToriiPoint) -> Result<Self> {
        match curve.genus() {
            0 => Ok(KernelContext { curve: curve.clone(), zeta, chi: None, theta0: C::new(1.0, 0.0) }),
            1 => {
                let pm = curve.pm()?;
                if zeta.zeta.len() != 1 {
                    return Err(Error::InvalidArgument("ζ must have one coordinate".into()));
                }
                let th = theta::theta(pm, &zeta.zeta, curve.theta_tol())?;
                if th.norm() <= 1e-8 {
                    return Err(Error::ThetaVanishes(th.norm()));
                }
                let chi = ThetaChar::from_point(pm, &zeta.zeta);
                let theta0 = theta::theta_char(pm, &chi, &[C::new(0.0, 0.0)], curve.theta_tol())?;
                if theta0.norm() <= 1e-8 {
                    return Err(Error::ThetaVanishes(theta0.norm()));
                }
                Ok(KernelContext { curve: curve.clone(), zeta, chi: Some(chi), theta0 })
            }
            _ => Err(Error::UnsupportedBackend("kernels need genus 0 or 1".into())),
        }
    }

    /// Context for ζ = b + τ·a on a genus-one curve, or the genus-0 context.
    pub fn with_char(curve: &RealCurve, a: f64, b: f64) -> Result<Self> {
        match curve.tau() {
            None => KernelContext::new(curve, ToriiPoint::genus0()),
            Some(tau) => {
                let pm = curve.pm()?;
                KernelContext::new(curve, ToriiPoint::from_zeta(pm, vec![tau * a + b]))
            }
        }
    }

    pub fn curve(&self) -> &RealCurve {
        &self.curve
    }

    pub fn zeta(&self) -> &ToriiPoint {
        &self.zeta
    }

    pub fn chi(&self) -> Option<&ThetaChar> {
        self.chi.as_ref()
    }

    pub fn chart_id(&self) -> &'static str {
        if self.curve.genus() == 0 {
            "standard"
        } else {
            "flat"
        }
    }

    /// Taylor coefficients of F about w (genus one), k = 0..=k_max.
    fn f_series(&self, w: C, k_max: usize) -> Result<Vec<C>> {
        let pm = self.curve.pm()?;
        let chi = self.chi.as_ref().expect("genus-one characteristic");
        let delta = self.curve.odd_char().expect("genus-one odd characteristic");
        let tol = self.curve.theta_tol();
        if let Some((m, n)) = theta::lattice_difference(pm, &[w], &[C::new(0.0, 0.0)], POLE_TOL) {
            let _ = (m, n);
            return Err(Error::PoleHit(0.0));
        }
        let one = [C::new(1.0, 0.0)];
        let num = theta::theta_jet(pm, chi, &[w], &one, k_max, tol)?;
        let den = theta::theta_jet(pm, delta, &[w], &one, k_max, tol)?;
        let q = Laurent::taylor(num).div(&Laurent::taylor(den));
        let pref = -self.curve.odd_slope() / self.theta0;
        Ok(q.coeffs.iter().map(|c| c * pref).collect())
    }

    /// Coefficients φ_0..φ_{k_max} of F(w) + 1/w at w = 0 (zero on genus 0).
    pub fn regular_part(&self, k_max: usize) -> Result<Vec<C>> {
        if self.curve.genus() == 0 {
            return Ok(vec![C::new(0.0, 0.0); k_max + 1]);
        }
        let pm = self.curve.pm()?;
        let chi = self.chi.as_ref().expect("genus-one characteristic");
        let delta = self.curve.odd_char().expect("genus-one odd characteristic");
        let tol = self.curve.theta_tol();
        let one = [C::new(1.0, 0.0)];
        let zero = [C::new(0.0, 0.0)];
        let num = theta::theta_jet(pm, chi, &zero, &one, k_max + 2, tol)?;
        let mut den = theta::theta_jet(pm, delta, &zero, &one, k_max + 2, tol)?;
        for (k, c) in den.iter_mut().enumerate() {
            if k % 2 == 0 {
                *c = C::new(0.0, 0.0);
            }
        }
        let q = Laurent::taylor(num).div(&Laurent::new(1, den[1..].to_vec()));
        let pref = -self.curve.odd_slope() / self.theta0;
        Ok((0..=k_max as i32).map(|k| q.coeff(k) * pref).collect())
    }

    /// ∂_x^a ∂_z^b S(x, z) in the standard charts at x and z.
    pub fn s_deriv(&self, x: &SurfacePoint, z: &SurfacePoint, a: usize, b: usize) -> Result<C> {
        let sign_b = if b % 2 == 0 { 1.0 } else { -1.0 };
        match self.curve.genus() {
            0 => match (x, z) {
                (SurfacePoint::Finite(x), SurfacePoint::Finite(z)) => {
                    let d = z - x;
                    if d.norm() < POLE_TOL {
                        return Err(Error::PoleHit(d.norm()));
                    }
                    Ok(sign_b * factorial(a + b) * d.powi(-1 - (a + b) as i32))
                }
                (SurfacePoint::Infinity, SurfacePoint::Finite(z)) => {
                    if b > a {
                        return Ok(C::new(0.0, 0.0));
                    }
                    let sign_a = if a % 2 == 0 { 1.0 } else { -1.0 };
                    Ok(sign_a * factorial(a) * factorial(a) / factorial(a - b) * z.powi((a - b) as i32))
                }
                (SurfacePoint::Finite(x), SurfacePoint::Infinity) => {
                    if a > b {
                        return Ok(C::new(0.0, 0.0));
                    }
                    Ok(-sign_b * factorial(b) * factorial(b) / factorial(b - a) * x.powi((b - a) as i32))
                }
                (SurfacePoint::Infinity, SurfacePoint::Infinity) => Err(Error::PoleHit(0.0)),
            },
            1 => {
                let (xv, zv) = match (x, z) {
                    (SurfacePoint::Finite(x), SurfacePoint::Finite(z)) => (*x, *z),
                    _ => return Err(Error::InvalidArgument("point at infinity on a torus".into())),
                };
                let k = a + b;
                let f = self.f_series(xv - zv, k)?;
                Ok(sign_b * factorial(k) * f[k])
            }
            _ => Err(Error::UnsupportedBackend("kernels need genus 0 or 1".into())),
        }
    }

    pub fn s_kernel(&self, x: &SurfacePoint, z: &SurfacePoint) -> Result<C> {
        self.s_deriv(x, z, 0, 0)
    }

    /// Factor κ with S(x + m + nτ, ·) = κ·S(x, ·).
    pub fn multiplier(&self, m: i64, n: i64) -> C {
        match &self.chi {
            None => C::new(1.0, 0.0),
            Some(chi) => {
                let ph = 2.0 * PI * (m as f64 * (chi.a[0] - 0.5) - n as f64 * (chi.b[0] - 0.5));
                C::from_polar(1.0, ph)
            }
        }
    }

    /// κ with S(from, ·) = κ·S(to, ·), for two lifts of the same point.
    pub fn lift_factor(&self, from: &SurfacePoint, to: &SurfacePoint) -> Result<C> {
        if self.curve.genus() == 0 {
            return if self.curve.same_point(from, to, 1e-9) {
                Ok(C::new(1.0, 0.0))
            } else {
                Err(Error::InvalidArgument("lifts of different points".into()))
            };
        }
        let (m, n) = self
            .curve
            .lattice_offset(from, to, 1e-9)
            .ok_or_else(|| Error::InvalidArgument("lifts of different points".into()))?;
        Ok(self.multiplier(m, n))
    }

    /// K_ζ(u, v) = i·S(τv, u).
    pub fn cauchy_kernel(&self, u: &SurfacePoint, v: &SurfacePoint) -> Result<C> {
        Ok(I * self.s_deriv(&v.conj(), u, 0, 0)?)
    }

    /// ∂_u^du ∂_v̄^dv K_ζ(u, v); the v-derivative is anti-holomorphic, i.e. the
    /// derivative along real increments of v.
    pub fn cauchy_kernel_deriv(&self, u: &SurfacePoint, v: &SurfacePoint, du: usize, dv: usize) -> Result<C> {
        if du + dv > KERNEL_DERIV_CAP {
            return Err(Error::OrderTooHigh(du + dv, KERNEL_DERIV_CAP));
        }
        Ok(I * self.s_deriv(&v.conj(), u, dv, du)?)
    }

    /// G[i][j] = K_ζ(p_i, p_j) = ⟨K(·,p_j), K(·,p_i)⟩.
    pub fn gram_matrix(&self, points: &[SurfacePoint]) -> Result<DMatrix<C>> {
        let n = points.len();
        let mut g = DMatrix::from_element(n, n, C::new(0.0, 0.0));
        for i in 0..n {
            for j in 0..n {
                g[(i, j)] = self.cauchy_kernel(&points[i], &points[j])?;
            }
        }
        let scale = g.iter().map(|c| c.norm()).fold(0.0, f64::max).max(1e-300);
        let dev = (0..n)
            .flat_map(|i| (0..n).map(move |j| (i, j)))
            .map(|(i, j)| (g[(i, j)] - g[(j, i)].conj()).norm())
            .fold(0.0, f64::max);
        if dev > 1e-8 * scale {
            return Err(Error::InvalidArgument(format!("kernel is not Hermitian at these points (deviation {dev:e})")));
        }
        Ok((&g + g.adjoint()) * C::new(0.5, 0.0))
    }

    /// Boundary quadrature (points, weights) for ⟨f, g⟩ = Σ w f(p) conj(g(p)):
    /// (1/2π)∫ over X_ℝ, trapezoidal in the flat chart (genus 1) or in θ with
    /// x = tan(θ/2) (genus 0).
    pub fn boundary_quadrature(&self, m: usize) -> Result<Vec<(SurfacePoint, f64)>> {
        let comps = self.curve.real_components()?;
        let mut out = vec![];
        for comp in &comps {
            for k in 0..m {
                match comp.height {
                    Some(h) => {
                        let x = k as f64 / m as f64;
                        out.push((SurfacePoint::new(C::new(x, h)), 1.0 / (2.0 * PI * m as f64)));
                    }
                    None => {
                        let th = -PI + (k as f64 + 0.5) * 2.0 * PI / m as f64;
                        let x = (th / 2.0).tan();
                        out.push((SurfacePoint::real(x), (1.0 + x * x) / (2.0 * m as f64)));
                    }
                }
            }
        }
        Ok(out)
    }

    // ---- collection matrices ----

    fn pole_weights(&self, y: &MeromorphicFn) -> Result<Vec<(SurfacePoint, C)>> {
        if !y.has_simple_poles() {
            return Err(Error::InvalidArgument("collection matrices need simple poles".into()));
        }
        Ok(y.poles().iter().map(|p| (p.point, (-p.residue()).sqrt())).collect())
    }

    fn fiber(&self, y: &MeromorphicFn, l: C) -> Result<Fiber> {
        let f = y.solve_fiber(l)?;
        for p in &f.points {
            if y.is_pole(p, 1e-9) {
                return Err(Error::PoleCollision);
            }
        }
        Ok(f)
    }

    /// 𝕂(λ1, λ2) from the fibers of y; principal square roots throughout.
    pub fn collection_matrix(&self, y: &MeromorphicFn, lambda1: ExtC, lambda2: ExtC) -> Result<CollectionMatrix> {
        let n = y.degree();
        let same = match (lambda1, lambda2) {
            (ExtC::Infinity, ExtC::Infinity) => true,
            (ExtC::Finite(a), ExtC::Finite(b)) => (a - b).norm() <= 1e-14 * a.norm().max(1.0),
            _ => false,
        };
        let entries = if same {
            DMatrix::identity(n, n)
        } else {
            match (lambda1, lambda2) {
                (ExtC::Finite(l1), ExtC::Finite(l2)) => {
                    let fu = self.fiber(y, l1)?;
                    let fv = self.fiber(y, l2)?;
                    let mut m = DMatrix::from_element(n, n, C::new(0.0, 0.0));
                    for i in 0..n {
                        for j in 0..n {
                            let s = self.s_kernel(&fv.points[j], &fu.points[i])?;
                            m[(i, j)] = (l1 - l2) * s / (fu.dy_values[i].sqrt() * fv.dy_values[j].sqrt());
                        }
                    }
                    m
                }
                (ExtC::Finite(l1), ExtC::Infinity) => {
                    let fu = self.fiber(y, l1)?;
                    let pw = self.pole_weights(y)?;
                    let mut m = DMatrix::from_element(n, n, C::new(0.0, 0.0));
                    for i in 0..n {
                        for j in 0..n {
                            let s = self.s_kernel(&pw[j].0, &fu.points[i])?;
                            m[(i, j)] = -s * pw[j].1 / fu.dy_values[i].sqrt();
                        }
                    }
                    m
                }
                (ExtC::Infinity, ExtC::Finite(l2)) => {
                    let fv = self.fiber(y, l2)?;
                    let pw = self.pole_weights(y)?;
                    let mut m = DMatrix::from_element(n, n, C::new(0.0, 0.0));
                    for i in 0..n {
                        for j in 0..n {
                            let s = self.s_kernel(&fv.points[j], &pw[i].0)?;
                            m[(i, j)] = pw[i].1 * s / fv.dy_values[j].sqrt();
                        }
                    }
                    m
                }
                _ => unreachable!(),
            }
        };
        Ok(CollectionMatrix { entries, lambda1, lambda2 })
    }

    /// |LHS − RHS| for (y(v) − y(w))·S(v, w) =
    /// −Σ_r Σ_{γ,δ} a_{r,−(γ+δ+1)} [∂₂^γ S(v, p_r)/γ!] [∂₁^δ S(p_r, w)/δ!].
    pub fn generalized_collection_check(&self, y: &MeromorphicFn, v: &SurfacePoint, w: &SurfacePoint) -> Result<f64> {
        for p in [v, w] {
            if y.is_pole(p, 1e-9) {
                return Err(Error::PoleCollision);
            }
        }
        let lhs = if self.curve.same_point(v, w, 1e-12) {
            // (y(v) − y(w))/(w − v) → −dy(v)
            -y.deriv(v)? * self.lift_factor(v, w)?
        } else {
            (y.eval(v)? - y.eval(w)?) * self.s_kernel(v, w)?
        };
        let mut rhs = C::new(0.0, 0.0);
        for pole in y.poles() {
            let s = pole.order;
            for g in 0..s {
                let left = self.s_deriv(v, &pole.point, 0, g)? / factorial(g);
                for d in 0..s - g {
                    let a = pole.coeff(-((g + d + 1) as i32));
                    let right = self.s_deriv(&pole.point, w, d, 0)? / factorial(d);
                    rhs -= a * left * right;
                }
            }
        }
        Ok((lhs - rhs).norm())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::meromorphic::MeromorphicFn;

    fn c(re: f64, im: f64) -> C {
        C::new(re, im)
    }

    fn ctx1() -> KernelContext {
        let x = RealCurve::rectangular(0.8).unwrap();
        KernelContext::with_char(&x, 0.3, 0.0).unwrap()
    }

    #[test]
    fn genus0_classical_value() {
        let ctx = KernelContext::new(&RealCurve::genus0(), ToriiPoint::genus0()).unwrap();
        let i = SurfacePoint::new(c(0.0, 1.0));
        assert!((ctx.cauchy_kernel(&i, &i).unwrap() - 0.5).norm() < 1e-15);
    }

    #[test]
    fn genus0_derivative_symbolic() {
        let ctx = KernelContext::new(&RealCurve::genus0(), ToriiPoint::genus0()).unwrap();
        let u = SurfacePoint::new(c(0.0, 2.0));
        let v = SurfacePoint::new(c(0.0, 1.0));
        // ∂_u i/(u − v̄) = −i/(u − v̄)² with u − v̄ = 3i
        let expect = -I / (c(0.0, 3.0) * c(0.0, 3.0));
        assert!((ctx.cauchy_kernel_deriv(&u, &v, 1, 0).unwrap() - expect).norm() < 1e-14);
    }

    #[test]
    fn hermitian_and_positive_genus1() {
        let ctx = ctx1();
        let u = SurfacePoint::new(c(0.31, 0.12));
        let v = SurfacePoint::new(c(0.77, 0.29));
        let k1 = ctx.cauchy_kernel(&u, &v).unwrap();
        let k2 = ctx.cauchy_kernel(&v, &u).unwrap();
        assert!((k1 - k2.conj()).norm() < 1e-9 * k1.norm());
        let d = ctx.cauchy_kernel(&u, &u).unwrap();
        assert!(d.re > 0.0 && d.im.abs() < 1e-9 * d.re);
        let m = SurfacePoint::new(c(0.31, 0.55));
        assert!(ctx.cauchy_kernel(&m, &m).unwrap().re < 0.0);
    }

    #[test]
    fn derivative_matches_finite_differences() {
        let ctx = ctx1();
        let u = c(0.31, 0.12);
        let v = c(0.77, 0.29);
        let h = 1e-5;
        let k = |a: C, b: C| ctx.cauchy_kernel(&SurfacePoint::new(a), &SurfacePoint::new(b)).unwrap();
        let fd_u = (k(u + h, v) - k(u - h, v)) / (2.0 * h);
        let fd_v = (k(u, v + h) - k(u, v - h)) / (2.0 * h);
        let du = ctx.cauchy_kernel_deriv(&SurfacePoint::new(u), &SurfacePoint::new(v), 1, 0).unwrap();
        let dv = ctx.cauchy_kernel_deriv(&SurfacePoint::new(u), &SurfacePoint::new(v), 0, 1).unwrap();
        assert!((fd_u - du).norm() < 1e-6 * du.norm());
        assert!((fd_v - dv).norm() < 1e-6 * dv.norm());
        assert!(matches!(
            ctx.cauchy_kernel_deriv(&SurfacePoint::new(u), &SurfacePoint::new(v), 4, 3),
            Err(Error::OrderTooHigh(7, 6))
        ));
    }

    #[test]
    fn reproducing_property_by_quadrature() {
        let ctx = ctx1();
        let w1 = SurfacePoint::new(c(0.2, 0.15));
        let w2 = SurfacePoint::new(c(0.6, 0.3));
        let q = ctx.boundary_quadrature(400).unwrap();
        let mut s = c(0.0, 0.0);
        for (p, wt) in &q {
            s += wt * ctx.cauchy_kernel(p, &w2).unwrap() * ctx.cauchy_kernel(p, &w1).unwrap().conj();
        }
        let k = ctx.cauchy_kernel(&w1, &w2).unwrap();
        assert!((s - k).norm() < 1e-9 * k.norm(), "{s} {k}");
    }

    #[test]
    fn collection_identities_genus1() {
        let x = RealCurve::rectangular(0.8).unwrap();
        let ctx = KernelContext::with_char(&x, 0.3, 0.0).unwrap();
        let y = MeromorphicFn::zeta_pair(&x, &SurfacePoint::new(c(0.3, 0.4)), &SurfacePoint::real(0.6)).unwrap();
        let l1 = ExtC::Finite(c(0.4, 1.1));
        let l2 = ExtC::Finite(c(-0.7, 0.5));
        let l3 = ExtC::Finite(c(1.3, -0.2));
        let k12 = ctx.collection_matrix(&y, l1, l2).unwrap().entries;
        let k13 = ctx.collection_matrix(&y, l1, l3).unwrap().entries;
        let k32 = ctx.collection_matrix(&y, l3, l2).unwrap().entries;
        assert!((&k13 * &k32 - &k12).norm() < 1e-8);
        let k1i = ctx.collection_matrix(&y, l1, ExtC::Infinity).unwrap().entries;
        let ki2 = ctx.collection_matrix(&y, ExtC::Infinity, l2).unwrap().entries;
        assert!((&k1i * &ki2 - &k12).norm() < 1e-8);
        let id = ctx.collection_matrix(&y, l1, l1).unwrap().entries;
        assert_eq!(id, DMatrix::identity(2, 2));
    }

    #[test]
    fn generalized_collection_simple_and_double() {
        let x = RealCurve::rectangular(0.8).unwrap();
        let ctx = KernelContext::with_char(&x, 0.3, 0.0).unwrap();
        let y = MeromorphicFn::zeta_pair(&x, &SurfacePoint::new(c(0.3, 0.4)), &SurfacePoint::real(0.6)).unwrap();
        let v = SurfacePoint::new(c(0.12, 0.21));
        let w = SurfacePoint::new(c(0.83, 0.07));
        assert!(ctx.generalized_collection_check(&y, &v, &w).unwrap() < 1e-8);
        assert!(ctx.generalized_collection_check(&y, &v, &v).unwrap() < 1e-8);
        let wp = MeromorphicFn::wp_like(&x, &SurfacePoint::real(0.45)).unwrap();
        let r = ctx.generalized_collection_check(&wp, &v, &w).unwrap();
        assert!(r < 1e-7, "{r}");
    }

    #[test]
    fn genus0_collection_with_pole_at_infinity() {
        let x = RealCurve::genus0();
        let ctx = KernelContext::new(&x, ToriiPoint::genus0()).unwrap();
        // y = z − 1/z: poles at 0 and ∞
        let y = MeromorphicFn::rational(&x, vec![c(-1.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)], vec![c(0.0, 0.0), c(1.0, 0.0)]).unwrap();
        assert_eq!(y.degree(), 2);
        let l1 = ExtC::Finite(c(0.4, 1.1));
        let l2 = ExtC::Finite(c(-0.7, 0.5));
        let k12 = ctx.collection_matrix(&y, l1, l2).unwrap().entries;
        let k1i = ctx.collection_matrix(&y, l1, ExtC::Infinity).unwrap().entries;
        let ki2 = ctx.collection_matrix(&y, ExtC::Infinity, l2).unwrap().entries;
        assert!((&k1i * &ki2 - &k12).norm() < 1e-8);
        let v = SurfacePoint::new(c(0.3, 0.8));
        let w = SurfacePoint::new(c(-1.2, 0.4));
        assert!(ctx.generalized_collection_check(&y, &v, &w).unwrap() < 1e-10);
    }
}
