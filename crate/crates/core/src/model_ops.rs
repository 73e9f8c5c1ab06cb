//! Finite model spaces spanned by Cauchy kernels, the model operator M^y,
//! the resolvent R^y_α, and the identities relating them.
//!
//! A vector c ∈ ℂ^m stands for f = Σ_a c_a K(·, w_a). With
//! G[i][j] = K(w_i, w_j) the inner product is ⟨f, g⟩ = dᴴ G c and the
//! adjoint of a coefficient matrix is A* = G⁻¹ Aᴴ G.

use crate::error::{Error, Result};
use crate::kernels::KernelContext;
use crate::meromorphic::MeromorphicFn;
use crate::series::{series_inverse, Bivariate};
use crate::surface::SurfacePoint;
use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use num_complex::Complex64;

type C = Complex64;

const I: C = C::new(0.0, 1.0);

/// Gram matrices with a larger condition number are rejected.
pub const MAX_CONDITION: f64 = 1e10;
/// Highest supported pole order.
pub const MAX_POLE_ORDER: usize = 6;

fn factorial(n: usize) -> f64 {
    (1..=n).fold(1.0, |a, k| a * k as f64)
}

fn cz() -> C {
    C::new(0.0, 0.0)
}

#[derive(Debug, Clone)]
pub struct OperatorMatrix {
    pub mat: DMatrix<C>,
    pub label: String,
}

#[derive(Debug, Clone)]
pub struct ModelSpace {
    ctx: KernelContext,
    points: Vec<SurfacePoint>,
    gram: DMatrix<C>,
    gram_inv: DMatrix<C>,
    chol: Option<Cholesky<C, Dyn>>,
    condition: f64,
}

impl ModelSpace {
    pub fn new(ctx: KernelContext, points: Vec<SurfacePoint>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::InvalidArgument("empty basis".into()));
        }
        for i in 0..points.len() {
            for j in 0..i {
                if ctx.curve().same_point(&points[i], &points[j], 1e-9) {
                    return Err(Error::InvalidArgument("repeated basis point".into()));
                }
            }
        }
        let gram = ctx.gram_matrix(&points)?;
        let sv = gram.clone().singular_values();
        let smax = sv.max();
        let smin = sv.min();
        let condition = if smin > 0.0 { smax / smin } else { f64::INFINITY };
        if !(condition <= MAX_CONDITION) {
            return Err(Error::IllConditioned(condition));
        }
        let gram_inv = gram.clone().try_inverse().ok_or(Error::IllConditioned(condition))?;
        let chol = Cholesky::new(gram.clone());
        Ok(ModelSpace { ctx, points, gram, gram_inv, chol, condition })
    }

    pub fn ctx(&self) -> &KernelContext {
        &self.ctx
    }

    pub fn points(&self) -> &[SurfacePoint] {
        &self.points
    }

    pub fn dim(&self) -> usize {
        self.points.len()
    }

    pub fn gram(&self) -> &DMatrix<C> {
        &self.gram
    }

    pub fn gram_inv(&self) -> &DMatrix<C> {
        &self.gram_inv
    }

    pub fn condition(&self) -> f64 {
        self.condition
    }

    pub fn is_positive(&self) -> bool {
        self.chol.is_some()
    }

    /// ⟨f, g⟩ for coefficient vectors c (of f) and d (of g).
    pub fn inner(&self, c: &DVector<C>, d: &DVector<C>) -> C {
        (d.adjoint() * &self.gram * c)[(0, 0)]
    }

    /// A* = G⁻¹ Aᴴ G.
    pub fn adjoint(&self, a: &DMatrix<C>) -> DMatrix<C> {
        &self.gram_inv * a.adjoint() * &self.gram
    }

    /// Φ* = G⁻¹ Φᴴ for an evaluation matrix Φ (rows are functionals).
    pub fn adjoint_eval(&self, phi: &DMatrix<C>) -> DMatrix<C> {
        &self.gram_inv * phi.adjoint()
    }

    /// Operator norm in the Gram inner product; Euclidean 2-norm when the Gram
    /// matrix is not positive definite.
    pub fn op_norm(&self, a: &DMatrix<C>) -> f64 {
        match &self.chol {
            Some(ch) => {
                let l = ch.l();
                let lh = l.adjoint();
                let lh_inv = match lh.clone().try_inverse() {
                    Some(m) => m,
                    None => return a.clone().singular_values().max(),
                };
                (lh * a * lh_inv).singular_values().max()
            }
            None => a.clone().singular_values().max(),
        }
    }

    /// k_u[a] = K(u, w_a), so f(u) = k_u · c.
    pub fn eval_row(&self, u: &SurfacePoint) -> Result<DVector<C>> {
        let mut v = DVector::from_element(self.dim(), cz());
        for (a, w) in self.points.iter().enumerate() {
            v[a] = self.ctx.cauchy_kernel(u, w)?;
        }
        Ok(v)
    }

    pub fn eval(&self, c: &DVector<C>, u: &SurfacePoint) -> Result<C> {
        Ok(self.eval_row(u)?.dot(c))
    }

    /// Row of k-th chart derivatives ∂_u^k K(u, w_a) (no public cap).
    pub fn deriv_row(&self, u: &SurfacePoint, k: usize) -> Result<DVector<C>> {
        let mut v = DVector::from_element(self.dim(), cz());
        for (a, w) in self.points.iter().enumerate() {
            v[a] = I * self.ctx.s_deriv(&w.conj(), u, 0, k)?;
        }
        Ok(v)
    }

    fn check_poles(&self, y: &MeromorphicFn) -> Result<()> {
        let curve = self.ctx.curve();
        for w in &self.points {
            if y.is_pole(w, 1e-9) || y.is_pole(&curve.involution(w), 1e-9) {
                return Err(Error::PoleCollision);
            }
        }
        Ok(())
    }
}

/// M^y in the kernel basis: diag(conj(y(w_i))).
pub fn model_operator(ms: &ModelSpace, y: &MeromorphicFn) -> Result<OperatorMatrix> {
    ms.check_poles(y)?;
    let mut m = DMatrix::from_element(ms.dim(), ms.dim(), cz());
    for (i, w) in ms.points().iter().enumerate() {
        m[(i, i)] = y.eval(w)?.conj();
    }
    Ok(OperatorMatrix { mat: m, label: "M^y".into() })
}

/// (M^y f)(u) = y(u) f(u) − Σ_m Σ_l P_{m,l}(f) ∂₁^{l−1}S(p_m, u)/(l−1)!,
/// P_{m,l} = Σ_{j≥l} a_{m,−j} f^{(j−l)}(p_m)/(j−l)!.
pub fn model_operator_pointwise(ms: &ModelSpace, y: &MeromorphicFn, c: &DVector<C>, u: &SurfacePoint) -> Result<C> {
    if y.is_pole(u, 1e-9) {
        return Err(Error::PoleCollision);
    }
    let ctx = ms.ctx();
    let mut val = y.eval(u)? * ms.eval(c, u)?;
    for pole in y.poles() {
        let s = pole.order;
        if s > MAX_POLE_ORDER {
            return Err(Error::OrderTooHigh(s, MAX_POLE_ORDER));
        }
        let jets: Vec<C> = (0..s)
            .map(|k| Ok(ms.deriv_row(&pole.point, k)?.dot(c) / factorial(k)))
            .collect::<Result<_>>()?;
        for l in 1..=s {
            let mut p = cz();
            for j in l..=s {
                p += pole.coeff(-(j as i32)) * jets[j - l];
            }
            val -= p * ctx.s_deriv(&pole.point, u, l - 1, 0)? / factorial(l - 1);
        }
    }
    Ok(val)
}

/// Coefficient matrix of M^y recovered from the pointwise formula by
/// collocation at the basis points: G⁻¹ V with V[k][a] = (M^y K(·,w_a))(w_k).
pub fn model_operator_collocated(ms: &ModelSpace, y: &MeromorphicFn) -> Result<OperatorMatrix> {
    ms.check_poles(y)?;
    let m = ms.dim();
    let mut v = DMatrix::from_element(m, m, cz());
    for a in 0..m {
        let mut e = DVector::from_element(m, cz());
        e[a] = C::new(1.0, 0.0);
        for (k, wk) in ms.points().iter().enumerate() {
            v[(k, a)] = model_operator_pointwise(ms, y, &e, wk)?;
        }
    }
    Ok(OperatorMatrix { mat: ms.gram_inv() * v, label: "M^y (collocated)".into() })
}

/// R^y_α = diag(1/(conj(y(w_i)) − α)); the fiber of α is validated.
pub fn resolvent(ms: &ModelSpace, y: &MeromorphicFn, alpha: C) -> Result<OperatorMatrix> {
    ms.check_poles(y)?;
    y.solve_fiber(alpha)?;
    let mut m = DMatrix::from_element(ms.dim(), ms.dim(), cz());
    for (i, w) in ms.points().iter().enumerate() {
        let d = y.eval(w)?.conj() - alpha;
        if d.norm() < 1e-10 {
            return Err(Error::SpectrumHit(format!("{alpha}"), d.norm()));
        }
        m[(i, i)] = 1.0 / d;
    }
    Ok(OperatorMatrix { mat: m, label: "R^y_alpha".into() })
}

/// (R_α f)(u) = f(u)/(y(u) − α) − Σ_j f(u_j)/dy(u_j)·S(u_j, u).
pub fn resolvent_pointwise(ms: &ModelSpace, y: &MeromorphicFn, alpha: C, c: &DVector<C>, u: &SurfacePoint) -> Result<C> {
    let fiber = y.solve_fiber(alpha)?;
    let ctx = ms.ctx();
    let yu = y.eval(u)?;
    if (yu - alpha).norm() < 1e-10 {
        return Err(Error::SpectrumHit(format!("{alpha}"), (yu - alpha).norm()));
    }
    let mut val = ms.eval(c, u)? / (yu - alpha);
    for (p, dy) in fiber.points.iter().zip(&fiber.dy_values) {
        val -= ms.eval(c, p)? / dy * ctx.s_kernel(p, u)?;
    }
    Ok(val)
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct AlgebraReport {
    pub sum: f64,
    pub product: f64,
    pub commutator: f64,
}

/// Homomorphism residuals for collocated model operators.
pub fn algebra_check(ms: &ModelSpace, y1: &MeromorphicFn, y2: &MeromorphicFn) -> Result<AlgebraReport> {
    let m1 = model_operator_collocated(ms, y1)?.mat;
    let m2 = model_operator_collocated(ms, y2)?.mat;
    let ms_sum = model_operator_collocated(ms, &y1.add(y2)?)?.mat;
    let ms_prod = model_operator_collocated(ms, &y1.mul(y2)?)?.mat;
    Ok(AlgebraReport {
        sum: ms.op_norm(&(ms_sum - &m1 - &m2)),
        product: ms.op_norm(&(ms_prod - &m1 * &m2)),
        commutator: ms.op_norm(&(&m1 * &m2 - &m2 * &m1)),
    })
}

/// |LHS − RHS| of the structure identity for R_α, R_β and f, g given by
/// coefficient vectors. `chart_scale` rescales the chart at every fiber
/// point by a positive factor (the result must not depend on it).
pub fn structure_identity_residual(
    ms: &ModelSpace,
    y: &MeromorphicFn,
    alpha: C,
    beta: C,
    f: &DVector<C>,
    g: &DVector<C>,
    chart_scale: f64,
) -> Result<f64> {
    if !(chart_scale > 0.0) {
        return Err(Error::InvalidArgument("chart scale must be positive".into()));
    }
    let ra = resolvent(ms, y, alpha)?.mat;
    let rb = resolvent(ms, y, beta)?.mat;
    let raf = &ra * f;
    let rbg = &rb * g;
    let lhs = ms.inner(&raf, g) - ms.inner(f, &rbg) - (alpha - beta.conj()) * ms.inner(&raf, &rbg);

    let ctx = ms.ctx();
    let curve = ctx.curve();
    let nu = y.solve_fiber(alpha)?;
    let om = y.solve_fiber(beta)?;
    let r = chart_scale;
    let half = r.sqrt();
    let coincide = (alpha - beta.conj()).norm() <= 1e-14 * alpha.norm().max(1.0);
    let mut rhs = cz();
    for (p, dyp) in nu.points.iter().zip(&nu.dy_values) {
        let fv = ms.eval(f, p)? / half;
        let dyv = dyp / r;
        for (q, dyq) in om.points.iter().zip(&om.dy_values) {
            let gv = ms.eval(g, q)? / half;
            let dyw = dyq / r;
            let qbar = q.conj();
            // (α − β̄)·S(ν, τω) in the scaled chart
            let weighted = if coincide && curve.same_point(p, &qbar, 1e-7) {
                -dyv / ctx.lift_factor(&qbar, p)?
            } else {
                (alpha - beta.conj()) * ctx.s_kernel(p, &qbar)? / r
            };
            rhs += -I * fv * gv.conj() / (dyv * dyw.conj()) * weighted;
        }
    }
    Ok((lhs - rhs).norm())
}

/// Upper-skew-triangular Hankel block from a_{−1}..a_{−s}.
#[derive(Debug, Clone)]
pub struct HankelBlock {
    /// coeffs[j] = a_{−(j+1)}.
    pub coeffs: Vec<C>,
}

impl HankelBlock {
    pub fn new(coeffs: Vec<C>) -> Self {
        HankelBlock { coeffs }
    }

    pub fn size(&self) -> usize {
        self.coeffs.len()
    }

    pub fn matrix(&self) -> DMatrix<C> {
        let s = self.size();
        DMatrix::from_fn(s, s, |g, d| if g + d < s { self.coeffs[g + d] } else { cz() })
    }
}

/// Inverse of an upper-skew-triangular Hankel block: with
/// P(x) = Σ_k a_{−(s−k)} x^k and 1/P = Σ q_k x^k, H⁻¹(i, l) = q_{i+l−(s−1)}.
pub fn hankel_inverse(h: &HankelBlock) -> Result<DMatrix<C>> {
    let s = h.size();
    if s == 0 {
        return Err(Error::SingularBlock);
    }
    let scale = h.coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max);
    if h.coeffs[s - 1].norm() <= 1e-14 * scale.max(1e-300) {
        return Err(Error::SingularBlock);
    }
    let p: Vec<C> = (0..s).map(|k| h.coeffs[s - 1 - k]).collect();
    let q = series_inverse(&p, s);
    Ok(DMatrix::from_fn(s, s, |i, l| if i + l + 1 >= s { q[i + l + 1 - s] } else { cz() }))
}

/// Series evaluation of the Kronecker-delta limit: with f(x) = Σ c_q x^q and
/// N(x, y) = Σ_q c_q Σ_{t=1}^{d−q} x^{q+t−1} y^{d−t}, returns
/// Σ_{j=0}^{d−1−a} c_{d−(j+a+1)} [x^j y^b] N(x,y)/(f(x) f(y)), expected δ_{b,a}.
pub fn taylor_delta_check(d: usize, a: usize, b: usize, c: &[C]) -> Result<C> {
    if a >= d || b >= d {
        return Err(Error::InvalidArgument("need 0 ≤ a, b < d".into()));
    }
    if c.is_empty() || c[0].norm() == 0.0 {
        return Err(Error::InvalidArgument("c₀ must be nonzero".into()));
    }
    let coef = |q: usize| c.get(q).cloned().unwrap_or_default();
    let n = d + 1;
    let mut num = Bivariate::zeros(n, n);
    for q in 0..d {
        for t in 1..=(d - q) {
            let (i, j) = (q + t - 1, d - t);
            if i < n && j < n {
                num.c[i][j] += coef(q);
            }
        }
    }
    let fx: Vec<C> = (0..n).map(coef).collect();
    let inv = series_inverse(&fx, n);
    let quotient = num.mul(&Bivariate::outer(&inv, &inv));
    let mut val = cz();
    for j in 0..=(d - 1 - a) {
        val += coef(d - (j + a + 1)) * quotient.c[j][b];
    }
    Ok(val)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::surface::{RealCurve, ToriiPoint};

    fn c(re: f64, im: f64) -> C {
        C::new(re, im)
    }

    fn genus1_space() -> (RealCurve, ModelSpace) {
        let x = RealCurve::rectangular(0.8).unwrap();
        let ctx = KernelContext::with_char(&x, 0.3, 0.0).unwrap();
        let pts = vec![
            SurfacePoint::new(c(0.11, 0.13)),
            SurfacePoint::new(c(0.47, 0.22)),
            SurfacePoint::new(c(0.78, 0.31)),
            SurfacePoint::new(c(0.29, 0.33)),
        ];
        (x.clone(), ModelSpace::new(ctx, pts).unwrap())
    }

    #[test]
    fn genus0_identity_eigenvalue() {
        let x = RealCurve::genus0();
        let ctx = KernelContext::new(&x, ToriiPoint::genus0()).unwrap();
        let ms = ModelSpace::new(ctx, vec![SurfacePoint::new(c(0.0, 1.0))]).unwrap();
        let y = MeromorphicFn::identity(&x).unwrap();
        let m = model_operator(&ms, &y).unwrap();
        assert!((m.mat[(0, 0)] - c(0.0, -1.0)).norm() < 1e-14);
        let e = DVector::from_element(1, c(1.0, 0.0));
        for k in 0..10 {
            let u = SurfacePoint::new(c(-2.0 + 0.4 * k as f64, 0.3 + 0.1 * k as f64));
            let lhs = model_operator_pointwise(&ms, &y, &e, &u).unwrap();
            let rhs = c(0.0, -1.0) * ms.eval(&e, &u).unwrap();
            assert!((lhs - rhs).norm() < 1e-12);
        }
    }

    #[test]
    fn pointwise_matches_matrix_genus1() {
        let (x, ms) = genus1_space();
        let y = MeromorphicFn::zeta_pair(&x, &SurfacePoint::new(c(0.3, 0.4)), &SurfacePoint::real(0.6)).unwrap();
        let col = model_operator_collocated(&ms, &y).unwrap().mat;
        let diag = model_operator(&ms, &y).unwrap().mat;
        assert!((col - diag).norm() < 1e-8);
        let wp = MeromorphicFn::wp_like(&x, &SurfacePoint::real(0.45)).unwrap();
        let col = model_operator_collocated(&ms, &wp).unwrap().mat;
        let diag = model_operator(&ms, &wp).unwrap().mat;
        assert!((&col - &diag).norm() < 1e-7 * diag.norm());
    }

    #[test]
    fn resolvent_identities() {
        let (x, ms) = genus1_space();
        let y = MeromorphicFn::zeta_pair(&x, &SurfacePoint::new(c(0.3, 0.4)), &SurfacePoint::real(0.6)).unwrap();
        let a = c(0.3, 0.9);
        let b = c(-0.4, 1.7);
        let m = model_operator(&ms, &y).unwrap().mat;
        let ra = resolvent(&ms, &y, a).unwrap().mat;
        let rb = resolvent(&ms, &y, b).unwrap().mat;
        let id = DMatrix::<C>::identity(4, 4);
        assert!(ms.op_norm(&((&m - &id * a) * &ra - &id)) < 1e-9);
        assert!(ms.op_norm(&(&ra - &rb - (&ra * &rb) * (a - b))) < 1e-9);
        let e = DVector::from_fn(4, |i, _| c(1.0 + i as f64, -0.5 * i as f64));
        let u = SurfacePoint::new(c(0.61, 0.17));
        let pw = resolvent_pointwise(&ms, &y, a, &e, &u).unwrap();
        let mat = ms.eval(&(&ra * &e), &u).unwrap();
        assert!((pw - mat).norm() < 1e-8 * mat.norm());
    }

    #[test]
    fn structure_identity_and_chart_scaling() {
        let (x, ms) = genus1_space();
        let y = MeromorphicFn::zeta_pair(&x, &SurfacePoint::new(c(0.3, 0.4)), &SurfacePoint::real(0.6)).unwrap();
        let f = DVector::from_fn(4, |i, _| c(0.3 * i as f64 - 0.2, 1.0));
        let g = DVector::from_fn(4, |i, _| c(1.0, 0.1 * i as f64));
        let r1 = structure_identity_residual(&ms, &y, c(0.3, 0.9), c(-0.4, 1.7), &f, &g, 1.0).unwrap();
        let r2 = structure_identity_residual(&ms, &y, c(0.3, 0.9), c(-0.4, 1.7), &f, &g, 3.7).unwrap();
        assert!(r1 < 1e-8, "{r1}");
        assert!((r1 - r2).abs() < 1e-9);
        let r3 = structure_identity_residual(&ms, &y, c(0.8, 0.0), c(0.8, 0.0), &f, &g, 1.0).unwrap();
        assert!(r3 < 1e-8, "{r3}");
    }

    #[test]
    fn algebra_homomorphism() {
        let (x, ms) = genus1_space();
        let y1 = MeromorphicFn::zeta_pair(&x, &SurfacePoint::new(c(0.3, 0.4)), &SurfacePoint::real(0.6)).unwrap();
        let y2 = MeromorphicFn::zeta_pair(&x, &SurfacePoint::real(0.6), &SurfacePoint::real(0.9)).unwrap();
        let rep = algebra_check(&ms, &y1, &y2).unwrap();
        assert!(rep.sum < 1e-8 && rep.product < 1e-8 && rep.commutator < 1e-8, "{rep:?}");
    }

    #[test]
    fn hankel_inverse_sizes() {
        let h = HankelBlock::new(vec![c(2.0, 0.0)]);
        assert!((hankel_inverse(&h).unwrap()[(0, 0)] - 0.5).norm() < 1e-15);
        let h = HankelBlock::new(vec![c(0.3, 0.1), c(-1.2, 0.4), c(0.7, 0.0), c(2.1, -0.3)]);
        let prod = h.matrix() * hankel_inverse(&h).unwrap();
        assert!((prod - DMatrix::identity(4, 4)).norm() < 1e-10);
        assert!(matches!(hankel_inverse(&HankelBlock::new(vec![c(1.0, 0.0), cz()])), Err(Error::SingularBlock)));
    }

    #[test]
    fn kronecker_delta_series() {
        assert!((taylor_delta_check(1, 0, 0, &[c(1.0, 0.0), c(1.0, 0.0)]).unwrap() - 1.0).norm() < 1e-14);
        let cs = [c(1.3, 0.0), c(-0.4, 0.2), c(0.9, 0.0), c(0.2, 0.0)];
        for a in 0..3 {
            for b in 0..3 {
                let v = taylor_delta_check(3, a, b, &cs).unwrap();
                let e = if a == b { 1.0 } else { 0.0 };
                assert!((v - e).norm() < 1e-10, "a={a} b={b} v={v}");
            }
        }
    }
}
