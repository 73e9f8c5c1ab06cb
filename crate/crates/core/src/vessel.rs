//! Commutative two-operator vessels built on model spaces, their residual
//! checks, the discriminant polynomial and the characteristic functions.
//!
//! Rows of Φ are indexed by (pole, d) with d < s (the pole order) and hold
//! Taylor coefficients f^{(d)}(p)/d! in the pole chart, so σ blocks are the
//! Hankel matrices of Laurent coefficients.

use crate::error::{Error, Result};
use crate::kernels::KernelContext;
use crate::meromorphic::MeromorphicFn;
use crate::model_ops::{model_operator, ModelSpace, MAX_POLE_ORDER};
use crate::surface::SurfacePoint;
use nalgebra::{Cholesky, DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

type C = Complex64;

const I: C = C::new(0.0, 1.0);

fn cz() -> C {
    C::new(0.0, 0.0)
}

fn factorial(n: usize) -> f64 {
    (1..=n).fold(1.0, |a, k| a * k as f64)
}

fn binom(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    factorial(n) / (factorial(k) * factorial(n - k))
}

/// Union pole set of (y1, y2) in the working order: real poles first, then
/// conjugate pairs adjacent.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PoleMeta {
    pub point: SurfacePoint,
    pub order: usize,
    pub partner: usize,
    /// κ with S(τ-lift of p, ·) = κ·S(p_partner, ·).
    pub kappa: C,
    pub chart: String,
}

#[derive(Debug, Clone)]
pub struct PoleFrame {
    pub poles: Vec<PoleMeta>,
    offsets: Vec<usize>,
}

impl PoleFrame {
    pub fn new(ctx: &KernelContext, fns: &[&MeromorphicFn], mu_signs: Option<&[u8]>) -> Result<Self> {
        let curve = ctx.curve();
        let mut pts: Vec<(SurfacePoint, usize)> = vec![];
        for y in fns {
            for p in y.poles() {
                match pts.iter_mut().find(|(q, _)| curve.same_point(q, &p.point, 1e-7)) {
                    Some(e) => e.1 = e.1.max(p.order),
                    None => pts.push((p.point, p.order)),
                }
            }
        }
        if let Some(&(_, s)) = pts.iter().find(|(_, s)| *s > MAX_POLE_ORDER) {
            return Err(Error::OrderTooHigh(s, MAX_POLE_ORDER));
        }
        let is_real = |p: &SurfacePoint| curve.same_point(p, &curve.involution(p), 1e-8);
        let mut ordered: Vec<(SurfacePoint, usize)> = pts.iter().filter(|(p, _)| is_real(p)).cloned().collect();
        let n_real = ordered.len();
        let mut rest: Vec<(SurfacePoint, usize)> = pts.iter().filter(|(p, _)| !is_real(p)).cloned().collect();
        while !rest.is_empty() {
            let (p, s) = rest.remove(0);
            let target = curve.involution(&p);
            let j = rest
                .iter()
                .position(|(q, _)| curve.same_point(q, &target, 1e-7))
                .ok_or(Error::OrderingMismatch)?;
            let (q, t) = rest.remove(j);
            if s != t {
                return Err(Error::OrderingMismatch);
            }
            ordered.push((p, s));
            ordered.push((q, t));
        }
        if let Some(mu) = mu_signs {
            if mu.len() != n_real {
                return Err(Error::InvalidArgument(format!("expected {n_real} μ signs (one per real pole)")));
            }
        }
        let mut poles = vec![];
        for (i, (p, s)) in ordered.iter().enumerate() {
            let partner = if i < n_real {
                i
            } else if (i - n_real) % 2 == 0 {
                i + 1
            } else {
                i - 1
            };
            let kappa = match (mu_signs, i < n_real) {
                (Some(mu), true) => C::new(if mu[i] % 2 == 0 { 1.0 } else { -1.0 }, 0.0),
                _ => ctx.lift_factor(&p.conj(), &ordered[partner].0)?,
            };
            let chart = match (curve.genus(), p) {
                (0, SurfacePoint::Infinity) => "t=-1/z",
                (0, _) => "affine",
                _ => "flat",
            };
            poles.push(PoleMeta { point: *p, order: *s, partner, kappa, chart: chart.into() });
        }
        let mut offsets = vec![0];
        for p in &poles {
            offsets.push(offsets.last().unwrap() + p.order);
        }
        Ok(PoleFrame { poles, offsets })
    }

    pub fn dim(&self) -> usize {
        *self.offsets.last().unwrap()
    }

    pub fn index(&self, pole: usize, d: usize) -> usize {
        self.offsets[pole] + d
    }

    /// Laurent coefficients of y at frame pole b: returns (order of y there, a_k for k = −s_y..hi).
    fn laurent(&self, y: &MeromorphicFn, b: usize, hi: i32) -> Result<(usize, Vec<C>)> {
        let p = &self.poles[b].point;
        let s = y.series(p, hi + 1)?.trim_principal(1e-10);
        let sy = (-s.val).max(0) as usize;
        Ok((sy, (-(sy as i32)..=hi).map(|k| s.coeff(k)).collect()))
    }

    /// Φ with rows (b, d), d < s_b·jet_factor.
    fn phi(&self, ms: &ModelSpace, jet_factor: usize) -> Result<(DMatrix<C>, Vec<usize>)> {
        let mut offs = vec![0];
        for p in &self.poles {
            offs.push(offs.last().unwrap() + jet_factor * p.order);
        }
        let n = *offs.last().unwrap();
        let mut phi = DMatrix::from_element(n, ms.dim(), cz());
        for (b, p) in self.poles.iter().enumerate() {
            for d in 0..jet_factor * p.order {
                let row = ms.deriv_row(&p.point, d)? / C::new(factorial(d), 0.0);
                phi.set_row(offs[b] + d, &row.transpose());
            }
        }
        Ok((phi, offs))
    }

    /// σ for y: σ[(r', δ), (r, γ)] = a_{r,−(γ+δ+1)} / κ_{r'}.
    pub fn sigma(&self, y: &MeromorphicFn) -> Result<DMatrix<C>> {
        let n = self.dim();
        let mut sig = DMatrix::from_element(n, n, cz());
        for (r, pole) in self.poles.iter().enumerate() {
            let (sy, a) = self.laurent(y, r, 0)?;
            let rp = pole.partner;
            let kap = self.poles[rp].kappa;
            for g in 0..pole.order {
                for d in 0..pole.order {
                    let j = g + d + 1;
                    if j <= sy {
                        sig[(self.index(rp, d), self.index(r, g))] = a[sy - j] / kap;
                    }
                }
            }
        }
        Ok(sig)
    }

    /// Λ_y with Φ M^y = Λ_y Φ_ext, columns indexed by jets j < 2 s_m.
    fn jet_map(&self, ctx: &KernelContext, y: &MeromorphicFn, ext_offs: &[usize]) -> Result<DMatrix<C>> {
        let n = self.dim();
        let n_ext = *ext_offs.last().unwrap();
        let max_s = self.poles.iter().map(|p| p.order).max().unwrap_or(0);
        let phi_reg = ctx.regular_part(3 * max_s + 2)?;
        let mut lam = DMatrix::from_element(n, n_ext, cz());
        let laur: Vec<(usize, Vec<C>)> =
            (0..self.poles.len()).map(|b| self.laurent(y, b, self.poles[b].order as i32)).collect::<Result<_>>()?;
        for (b, pb) in self.poles.iter().enumerate() {
            for e in 0..pb.order {
                let row = self.index(b, e);
                // y·f at p_b
                let (sy, a) = &laur[b];
                for (idx, ak) in a.iter().enumerate() {
                    let k = idx as i32 - *sy as i32;
                    if k > e as i32 {
                        break;
                    }
                    let j = (e as i32 - k) as usize;
                    lam[(row, ext_offs[b] + j)] += ak;
                }
                // correction terms from the principal parts at every pole
                for (m, pm) in self.poles.iter().enumerate() {
                    let (sm, am) = &laur[m];
                    for l in 1..=*sm {
                        let t = if m == b {
                            let sign = if e % 2 == 0 { 1.0 } else { -1.0 };
                            phi_reg[e + l - 1] * binom(e + l - 1, l - 1) * sign
                        } else {
                            ctx.s_deriv(&pm.point, &pb.point, l - 1, e)? / (factorial(l - 1) * factorial(e))
                        };
                        for j in l..=*sm {
                            let a_mj = am[sm - j];
                            lam[(row, ext_offs[m] + (j - l))] -= a_mj * t;
                        }
                    }
                }
            }
        }
        Ok(lam)
    }
}

/// The collection (A₁, A₂; Φ; σ₁, σ₂, γ, γ̃) with the Gram matrix of H.
#[derive(Debug, Clone)]
pub struct Vessel {
    pub a1: DMatrix<C>,
    pub a2: DMatrix<C>,
    pub phi: DMatrix<C>,
    pub sigma1: DMatrix<C>,
    pub sigma2: DMatrix<C>,
    pub gamma: DMatrix<C>,
    pub gamma_tilde: DMatrix<C>,
    pub gram: DMatrix<C>,
    pub poles: Vec<PoleMeta>,
    pub chart: String,
    /// Largest entry of the discarded higher-jet columns of γ̃ (should vanish).
    pub jet_leak: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct VesselReport {
    pub colligation1: f64,
    pub colligation2: f64,
    pub output: f64,
    pub input: f64,
    pub linkage: f64,
    pub commutator: f64,
    pub sigma_selfadjoint: f64,
    pub gamma_selfadjoint: f64,
}

impl VesselReport {
    pub fn max(&self) -> f64 {
        [
            self.colligation1,
            self.colligation2,
            self.output,
            self.input,
            self.linkage,
            self.commutator,
            self.sigma_selfadjoint,
            self.gamma_selfadjoint,
        ]
        .into_iter()
        .fold(0.0, f64::max)
    }
}

/// Assemble the model vessel of (y1, y2) on ms. `mu_signs` overrides the
/// sign κ = (−1)^μ at each real pole; by default it comes from the kernel
/// multiplier of the conjugate lift.
pub fn build_model_vessel(ms: &ModelSpace, y1: &MeromorphicFn, y2: &MeromorphicFn, mu_signs: Option<&[u8]>) -> Result<Vessel> {
    let ctx = ms.ctx();
    let frame = PoleFrame::new(ctx, &[y1, y2], mu_signs)?;
    for w in ms.points() {
        for p in &frame.poles {
            if ctx.curve().same_point(w, &p.point, 1e-9) || ctx.curve().same_point(&ctx.curve().involution(w), &p.point, 1e-9) {
                return Err(Error::PoleCollision);
            }
        }
    }
    let a1 = model_operator(ms, y1)?.mat;
    let a2 = model_operator(ms, y2)?.mat;
    let (phi, _) = frame.phi(ms, 1)?;
    let mut ext_offs = vec![0];
    for p in &frame.poles {
        ext_offs.push(ext_offs.last().unwrap() + 2 * p.order);
    }
    let s1 = frame.sigma(y1)?;
    let s2 = frame.sigma(y2)?;
    let l1 = frame.jet_map(ctx, y1, &ext_offs)?;
    let l2 = frame.jet_map(ctx, y2, &ext_offs)?;
    let gt_ext = &s1 * &l2 - &s2 * &l1;
    let n = frame.dim();
    let mut gt = DMatrix::from_element(n, n, cz());
    let mut leak: f64 = 0.0;
    let scale = gt_ext.iter().map(|c| c.norm()).fold(0.0, f64::max).max(1.0);
    for (b, p) in frame.poles.iter().enumerate() {
        for j in 0..2 * p.order {
            for r in 0..n {
                let v = gt_ext[(r, ext_offs[b] + j)];
                if j < p.order {
                    gt[(r, frame.index(b, j))] = v;
                } else {
                    leak = leak.max(v.norm() / scale);
                }
            }
        }
    }
    let phi_star = ms.adjoint_eval(&phi);
    let p = &phi * &phi_star;
    let gamma = &gt - (&s1 * &p * &s2 - &s2 * &p * &s1) * I;
    Ok(Vessel {
        a1,
        a2,
        phi,
        sigma1: s1,
        sigma2: s2,
        gamma,
        gamma_tilde: gt,
        gram: ms.gram().clone(),
        poles: frame.poles.clone(),
        chart: ctx.chart_id().into(),
        jet_leak: leak,
    })
}

/// γ̃ from the closed simple-pole formula, used to cross-check the jet map:
/// γ̃_{a,a'} = (a₁h₂ − a₂h₁)_{a'}/κ_a and, for m ≠ a',
/// γ̃_{a,m} = (a₂,_{a'} a₁,_m − a₁,_{a'} a₂,_m)·S(p_m, τp_a).
pub fn gamma_tilde_simple(ms: &ModelSpace, y1: &MeromorphicFn, y2: &MeromorphicFn) -> Result<DMatrix<C>> {
    let ctx = ms.ctx();
    let frame = PoleFrame::new(ctx, &[y1, y2], None)?;
    if frame.poles.iter().any(|p| p.order != 1) {
        return Err(Error::InvalidArgument("closed formula needs simple poles".into()));
    }
    let n = frame.dim();
    let data = |y: &MeromorphicFn, b: usize| -> Result<(C, C)> {
        let (sy, a) = frame.laurent(y, b, 0)?;
        Ok(if sy == 0 { (cz(), a[0]) } else { (a[0], a[1]) })
    };
    let mut gt = DMatrix::from_element(n, n, cz());
    for a in 0..n {
        let ap = frame.poles[a].partner;
        let (r1p, h1p) = data(y1, ap)?;
        let (r2p, h2p) = data(y2, ap)?;
        for m in 0..n {
            if m == ap {
                gt[(a, m)] = (r1p * h2p - r2p * h1p) / frame.poles[a].kappa;
            } else {
                let (r1m, _) = data(y1, m)?;
                let (r2m, _) = data(y2, m)?;
                let s = ctx.s_kernel(&frame.poles[m].point, &frame.poles[a].point.conj())?;
                gt[(a, m)] = (r2p * r1m - r1p * r2m) * s;
            }
        }
    }
    Ok(gt)
}

fn herm_dev(m: &DMatrix<C>) -> f64 {
    (m - m.adjoint()).iter().map(|c| c.norm()).fold(0.0, f64::max)
}

impl Vessel {
    pub fn n(&self) -> usize {
        self.phi.nrows()
    }

    pub fn m(&self) -> usize {
        self.a1.nrows()
    }

    fn gram_inv(&self) -> DMatrix<C> {
        self.gram.clone().try_inverse().unwrap_or_else(|| DMatrix::identity(self.m(), self.m()))
    }

    pub fn adjoint(&self, a: &DMatrix<C>) -> DMatrix<C> {
        self.gram_inv() * a.adjoint() * &self.gram
    }

    pub fn phi_star(&self) -> DMatrix<C> {
        self.gram_inv() * self.phi.adjoint()
    }

    /// Norm of X: H → ℂ^k (k rows) with H carrying the Gram inner product.
    fn norm_from_h(&self, x: &DMatrix<C>) -> f64 {
        if x.nrows() == 0 || x.ncols() == 0 {
            return 0.0;
        }
        match Cholesky::new(self.gram.clone()) {
            Some(ch) => match ch.l().adjoint().try_inverse() {
                Some(lhi) => (x * lhi).singular_values().max(),
                None => x.clone().singular_values().max(),
            },
            None => x.clone().singular_values().max(),
        }
    }

    /// Operator norm on H.
    fn norm_hh(&self, x: &DMatrix<C>) -> f64 {
        if x.nrows() == 0 {
            return 0.0;
        }
        match Cholesky::new(self.gram.clone()) {
            Some(ch) => {
                let lh = ch.l().adjoint();
                match lh.clone().try_inverse() {
                    Some(lhi) => (lh * x * lhi).singular_values().max(),
                    None => x.clone().singular_values().max(),
                }
            }
            None => x.clone().singular_values().max(),
        }
    }

    fn norm_nn(x: &DMatrix<C>) -> f64 {
        if x.nrows() == 0 {
            return 0.0;
        }
        x.clone().singular_values().max()
    }
}

pub fn verify_vessel(v: &Vessel) -> VesselReport {
    let a1s = v.adjoint(&v.a1);
    let a2s = v.adjoint(&v.a2);
    let ps = v.phi_star();
    let mi = C::new(0.0, -1.0);
    let coll1 = (&v.a1 - &a1s) * mi - &ps * &v.sigma1 * &v.phi;
    let coll2 = (&v.a2 - &a2s) * mi - &ps * &v.sigma2 * &v.phi;
    let out = &v.sigma1 * &v.phi * &v.a2 - &v.sigma2 * &v.phi * &v.a1 - &v.gamma_tilde * &v.phi;
    let inp = &v.sigma1 * &v.phi * &a2s - &v.sigma2 * &v.phi * &a1s - &v.gamma * &v.phi;
    let p = &v.phi * &ps;
    let link = (&v.sigma1 * &p * &v.sigma2 - &v.sigma2 * &p * &v.sigma1) * I - (&v.gamma_tilde - &v.gamma);
    let comm = &v.a1 * &v.a2 - &v.a2 * &v.a1;
    VesselReport {
        colligation1: v.norm_hh(&coll1),
        colligation2: v.norm_hh(&coll2),
        output: v.norm_from_h(&out),
        input: v.norm_from_h(&inp),
        linkage: Vessel::norm_nn(&link),
        commutator: v.norm_hh(&comm),
        sigma_selfadjoint: herm_dev(&v.sigma1).max(herm_dev(&v.sigma2)),
        gamma_selfadjoint: herm_dev(&v.gamma).max(herm_dev(&v.gamma_tilde)),
    }
}

fn smallest_singular(m: &DMatrix<C>) -> f64 {
    if m.nrows() == 0 {
        return f64::INFINITY;
    }
    m.clone().singular_values().min()
}

/// W(ξ, z) = I − iΦ(ξ₁A₁ + ξ₂A₂ − z)⁻¹Φ*(ξ₁σ₁ + ξ₂σ₂).
pub fn ccf(v: &Vessel, xi1: C, xi2: C, z: C) -> Result<DMatrix<C>> {
    let m = v.m();
    let pencil = &v.a1 * xi1 + &v.a2 * xi2 - DMatrix::identity(m, m) * z;
    let smin = smallest_singular(&pencil);
    if smin <= 1e-8 {
        return Err(Error::SpectrumHit(format!("{z}"), smin));
    }
    let inv = pencil.try_inverse().ok_or(Error::SpectrumHit(format!("{z}"), 0.0))?;
    let sig = &v.sigma1 * xi1 + &v.sigma2 * xi2;
    Ok(DMatrix::identity(v.n(), v.n()) - &v.phi * inv * v.phi_star() * sig * I)
}

/// Eigenvalues of the Hermitian part of W*(ξσ)W − ξσ, ascending. Zero for
/// real z, positive semidefinite above the real axis.
pub fn ccf_metric(v: &Vessel, xi1: f64, xi2: f64, z: C) -> Result<Vec<f64>> {
    let (x1, x2) = (C::new(xi1, 0.0), C::new(xi2, 0.0));
    let w = ccf(v, x1, x2, z)?;
    let sig = &v.sigma1 * x1 + &v.sigma2 * x2;
    let d = w.adjoint() * &sig * &w - &sig;
    let h = (&d + d.adjoint()) * C::new(0.5, 0.0);
    let mut e: Vec<f64> = h.symmetric_eigenvalues().iter().cloned().collect();
    e.sort_by(|a, b| a.partial_cmp(b).unwrap());
    Ok(e)
}

/// Unit kernel vector of a (numerically) rank-deficient square matrix,
/// phase-fixed so that its largest entry is real positive.
fn kernel_vector(m: &DMatrix<C>) -> Result<DVector<C>> {
    let n = m.nrows();
    let svd = m.clone().svd(true, true);
    let sv = &svd.singular_values;
    let scale = sv.max().max(1.0);
    let small: Vec<usize> = (0..n).filter(|&i| sv[i] <= 1e-7 * scale).collect();
    if small.is_empty() {
        return Err(Error::OffCurve(sv.min()));
    }
    if small.len() != 1 {
        return Err(Error::SingularCurvePoint(small.len()));
    }
    let vt = svd.v_t.as_ref().expect("right singular vectors");
    let row = vt.row(small[0]);
    let mut k = DVector::from_iterator(n, row.iter().map(|c| c.conj()));
    let big = k.iter().cloned().fold(cz(), |a, c| if c.norm() > a.norm() { c } else { a });
    let ph = big.conj() / big.norm();
    k *= ph;
    Ok(k)
}

#[derive(Debug, Clone, Serialize)]
pub struct JcfValue {
    pub value: C,
    /// max spread of the scalar over the sampled directions.
    pub spread: f64,
    /// ‖(λ₁σ₂ − λ₂σ₁ + γ̃) W e‖ for the first direction.
    pub image_residual: f64,
}

/// Scalar joint characteristic function at a nonsingular point of the
/// discriminant curve, sampled over the given directions ξ.
pub fn jcf(v: &Vessel, l1: C, l2: C, directions: &[(f64, f64)]) -> Result<JcfValue> {
    let e_mat = &v.sigma2 * l1 - &v.sigma1 * l2 + &v.gamma;
    let et_mat = &v.sigma2 * l1 - &v.sigma1 * l2 + &v.gamma_tilde;
    let e = kernel_vector(&e_mat)?;
    let et = kernel_vector(&et_mat)?;
    let mut vals = vec![];
    let mut image_residual = 0.0;
    for (k, (x1, x2)) in directions.iter().enumerate() {
        let (x1, x2) = (C::new(*x1, 0.0), C::new(*x2, 0.0));
        let w = ccf(v, x1, x2, x1 * l1 + x2 * l2)?;
        let we = &w * &e;
        if k == 0 {
            image_residual = (&et_mat * &we).norm();
        }
        vals.push(et.dotc(&we));
    }
    let v0 = vals[0];
    let spread = vals.iter().map(|x| (x - v0).norm()).fold(0.0, f64::max);
    Ok(JcfValue { value: v0, spread, image_residual })
}

/// p(λ₁, λ₂) = Σ coeffs[i][j] λ₁^i λ₂^j.
#[derive(Debug, Clone, Serialize)]
pub struct DiscriminantPoly {
    pub coeffs: Vec<Vec<C>>,
    /// Max coefficient deviation between the γ and γ̃ versions (relative).
    pub gamma_mismatch: f64,
}

impl DiscriminantPoly {
    pub fn eval(&self, l1: C, l2: C) -> C {
        let mut s = cz();
        for (i, row) in self.coeffs.iter().enumerate() {
            for (j, c) in row.iter().enumerate() {
                s += c * l1.powu(i as u32) * l2.powu(j as u32);
            }
        }
        s
    }

    /// Σ |c_ij| |λ₁|^i |λ₂|^j, the natural scale for |p(λ)|.
    pub fn scale(&self, l1: C, l2: C) -> f64 {
        let mut s = 0.0;
        for (i, row) in self.coeffs.iter().enumerate() {
            for (j, c) in row.iter().enumerate() {
                s += c.norm() * l1.norm().powi(i as i32) * l2.norm().powi(j as i32);
            }
        }
        s
    }

    /// p(A₁, A₂) for commuting matrices.
    pub fn eval_matrices(&self, a1: &DMatrix<C>, a2: &DMatrix<C>) -> DMatrix<C> {
        let m = a1.nrows();
        let mut out = DMatrix::from_element(m, m, cz());
        let mut p1 = DMatrix::identity(m, m);
        for row in &self.coeffs {
            let mut p2 = DMatrix::identity(m, m);
            for c in row {
                out += &p1 * &p2 * *c;
                p2 = &p2 * a2;
            }
            p1 = &p1 * a1;
        }
        out
    }
}

fn interpolate_det(s2: &DMatrix<C>, s1: &DMatrix<C>, g: &DMatrix<C>, scale: f64) -> Vec<Vec<C>> {
    let n = s1.nrows();
    let k = n + 1;
    let nodes: Vec<f64> = (0..k).map(|i| scale * (std::f64::consts::PI * (i as f64 + 0.5) / k as f64).cos()).collect();
    let mut vals = DMatrix::from_element(k, k, cz());
    for (a, x) in nodes.iter().enumerate() {
        for (b, y) in nodes.iter().enumerate() {
            let m = s2 * C::new(*x, 0.0) - s1 * C::new(*y, 0.0) + g;
            vals[(a, b)] = if n == 0 { C::new(1.0, 0.0) } else { m.determinant() };
        }
    }
    // Vandermonde in scaled variables, V[a][i] = (x_a/scale)^i
    let v = DMatrix::from_fn(k, k, |a, i| C::new((nodes[a] / scale).powi(i as i32), 0.0));
    let vinv = v.try_inverse().expect("Chebyshev Vandermonde is invertible");
    let c = &vinv * vals * vinv.transpose();
    (0..k).map(|i| (0..k).map(|j| c[(i, j)] / scale.powi((i + j) as i32)).collect()).collect()
}

/// det(λ₁σ₂ − λ₂σ₁ + γ) by tensor Chebyshev interpolation, compared with the
/// γ̃ version.
pub fn discriminant(v: &Vessel) -> Result<DiscriminantPoly> {
    let scale = [&v.sigma1, &v.sigma2, &v.gamma, &v.gamma_tilde]
        .iter()
        .map(|m| m.iter().map(|c| c.norm()).fold(0.0, f64::max))
        .fold(1.0, f64::max);
    let c = interpolate_det(&v.sigma2, &v.sigma1, &v.gamma, scale);
    let ct = interpolate_det(&v.sigma2, &v.sigma1, &v.gamma_tilde, scale);
    // compare on the scaled monomials so that coefficients are commensurate
    let mut big: f64 = 0.0;
    let mut dev: f64 = 0.0;
    for i in 0..c.len() {
        for j in 0..c.len() {
            let w = scale.powi((i + j) as i32);
            big = big.max(c[i][j].norm() * w);
            dev = dev.max((c[i][j] - ct[i][j]).norm() * w);
        }
    }
    let n = v.n() as i32;
    let fro = |m: &DMatrix<C>| m.norm();
    let bound = ((fro(&v.sigma1) + fro(&v.sigma2)) * scale + fro(&v.gamma).max(fro(&v.gamma_tilde))).powi(n);
    if big <= 1e-12 * bound {
        return Err(Error::DegenerateDet);
    }
    Ok(DiscriminantPoly { coeffs: c, gamma_mismatch: dev / big })
}

/// |ũ(z)(ξσ)Φ(ξA − ξ·y(z))⁻¹h − h(z)| with ũ_(l,δ)(z) = −∂^δS(τp_l, z)/δ!.
pub fn model_map_identity_check(
    v: &Vessel,
    ms: &ModelSpace,
    y1: &MeromorphicFn,
    y2: &MeromorphicFn,
    z: &SurfacePoint,
    h: &DVector<C>,
    xi: (f64, f64),
) -> Result<f64> {
    let val = model_map(v, ms, y1, y2, z, h, xi)?;
    Ok((val - ms.eval(h, z)?).norm())
}

fn section_row(v: &Vessel, ctx: &KernelContext, z: &SurfacePoint) -> Result<DVector<C>> {
    let mut u = DVector::from_element(v.n(), cz());
    let mut idx = 0;
    for p in &v.poles {
        for d in 0..p.order {
            u[idx] = -ctx.s_deriv(&p.point.conj(), z, d, 0)? / factorial(d);
            idx += 1;
        }
    }
    Ok(u)
}

pub fn model_map(
    v: &Vessel,
    ms: &ModelSpace,
    y1: &MeromorphicFn,
    y2: &MeromorphicFn,
    z: &SurfacePoint,
    h: &DVector<C>,
    xi: (f64, f64),
) -> Result<C> {
    let (x1, x2) = (C::new(xi.0, 0.0), C::new(xi.1, 0.0));
    let lz = x1 * y1.eval(z)? + x2 * y2.eval(z)?;
    let m = v.m();
    let pencil = &v.a1 * x1 + &v.a2 * x2 - DMatrix::identity(m, m) * lz;
    let smin = smallest_singular(&pencil);
    if smin <= 1e-8 {
        return Err(Error::SpectrumHit(format!("{lz}"), smin));
    }
    let sol = pencil.lu().solve(h).ok_or(Error::SpectrumHit(format!("{lz}"), 0.0))?;
    let u = section_row(v, ms.ctx(), z)?;
    let sig = &v.sigma1 * x1 + &v.sigma2 * x2;
    Ok((u.transpose() * sig * &v.phi * sol)[(0, 0)])
}

/// Model-space reproducing kernel K_X(p, q) through the characteristic function:
/// ũ(p)[Σ − S(p)ΣS(q)*]ũ(q)* / (i(ξ·y(p) − ξ·conj(y(q)))),
/// S(z) = I − i(ξσ)Φ(ξA − ξ·y(z))⁻¹Φ*, Σ = ξσ.
pub fn kernel_via_ccf(
    v: &Vessel,
    ms: &ModelSpace,
    y1: &MeromorphicFn,
    y2: &MeromorphicFn,
    p: &SurfacePoint,
    q: &SurfacePoint,
    xi: (f64, f64),
) -> Result<C> {
    let (x1, x2) = (C::new(xi.0, 0.0), C::new(xi.1, 0.0));
    let sig = &v.sigma1 * x1 + &v.sigma2 * x2;
    let m = v.m();
    let n = v.n();
    let s_of = |z: &SurfacePoint| -> Result<(DMatrix<C>, C)> {
        let lz = x1 * y1.eval(z)? + x2 * y2.eval(z)?;
        let pencil = &v.a1 * x1 + &v.a2 * x2 - DMatrix::identity(m, m) * lz;
        let smin = smallest_singular(&pencil);
        if smin <= 1e-8 {
            return Err(Error::SpectrumHit(format!("{lz}"), smin));
        }
        let inv = pencil.try_inverse().ok_or(Error::SpectrumHit(format!("{lz}"), 0.0))?;
        Ok((DMatrix::identity(n, n) - &sig * &v.phi * inv * v.phi_star() * I, lz))
    };
    let (sp, lp) = s_of(p)?;
    let (sq, lq) = s_of(q)?;
    let up = section_row(v, ms.ctx(), p)?;
    let uq = section_row(v, ms.ctx(), q)?;
    let mid = &sig - &sp * &sig * sq.adjoint();
    let num = (up.transpose() * mid * uq.map(|c| c.conj()))[(0, 0)];
    Ok(num / (I * (lp - lq.conj())))
}

/// Direct model-space kernel k_pᵀ G⁻¹ κ_q with k_p[a] = K(p, w_a), κ_q[b] = K(w_b, q).
pub fn model_kernel(ms: &ModelSpace, p: &SurfacePoint, q: &SurfacePoint) -> Result<C> {
    let kp = ms.eval_row(p)?;
    let mut kq = DVector::from_element(ms.dim(), cz());
    for (b, w) in ms.points().iter().enumerate() {
        kq[b] = ms.ctx().cauchy_kernel(w, q)?;
    }
    Ok((kp.transpose() * ms.gram_inv() * kq)[(0, 0)])
}

// ---- JSON export ----

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct MatrixJson {
    pub rows: usize,
    pub cols: usize,
    /// Row-major [re, im] pairs.
    pub data: Vec<[f64; 2]>,
}

impl MatrixJson {
    pub fn from_matrix(m: &DMatrix<C>) -> Self {
        let mut data = Vec::with_capacity(m.len());
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                data.push([m[(i, j)].re, m[(i, j)].im]);
            }
        }
        MatrixJson { rows: m.nrows(), cols: m.ncols(), data }
    }

    pub fn to_matrix(&self) -> Result<DMatrix<C>> {
        if self.data.len() != self.rows * self.cols {
            return Err(Error::InvalidArgument("matrix data length mismatch".into()));
        }
        Ok(DMatrix::from_fn(self.rows, self.cols, |i, j| {
            let [re, im] = self.data[i * self.cols + j];
            C::new(re, im)
        }))
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VesselJson {
    pub schema: u32,
    pub chart: String,
    pub poles: Vec<PoleMeta>,
    pub a1: MatrixJson,
    pub a2: MatrixJson,
    pub phi: MatrixJson,
    pub sigma1: MatrixJson,
    pub sigma2: MatrixJson,
    pub gamma: MatrixJson,
    pub gamma_tilde: MatrixJson,
    pub gram: MatrixJson,
}

impl Vessel {
    pub fn to_json(&self) -> VesselJson {
        VesselJson {
            schema: 1,
            chart: self.chart.clone(),
            poles: self.poles.clone(),
            a1: MatrixJson::from_matrix(&self.a1),
            a2: MatrixJson::from_matrix(&self.a2),
            phi: MatrixJson::from_matrix(&self.phi),
            sigma1: MatrixJson::from_matrix(&self.sigma1),
            sigma2: MatrixJson::from_matrix(&self.sigma2),
            gamma: MatrixJson::from_matrix(&self.gamma),
            gamma_tilde: MatrixJson::from_matrix(&self.gamma_tilde),
            gram: MatrixJson::from_matrix(&self.gram),
        }
    }

    pub fn from_json(j: &VesselJson) -> Result<Self> {
        Ok(Vessel {
            a1: j.a1.to_matrix()?,
            a2: j.a2.to_matrix()?,
            phi: j.phi.to_matrix()?,
            sigma1: j.sigma1.to_matrix()?,
            sigma2: j.sigma2.to_matrix()?,
            gamma: j.gamma.to_matrix()?,
            gamma_tilde: j.gamma_tilde.to_matrix()?,
            gram: j.gram.to_matrix()?,
            poles: j.poles.clone(),
            chart: j.chart.clone(),
            jet_leak: 0.0,
        })
    }
}
