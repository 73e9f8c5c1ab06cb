//! Theta-Blaschke factors and finite products, the kernel K_T, contractivity
//! and desk-scale Beurling checks by boundary quadrature.

use crate::error::{Error, Result};
use crate::kernels::KernelContext;
use crate::meromorphic::MeromorphicFn;
use crate::model_ops::{resolvent_pointwise, ModelSpace};
use crate::surface::{RealCurve, Side, SurfacePoint, ToriiPoint};
use crate::vessel::{kernel_via_ccf, Vessel};
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use std::f64::consts::PI;

type C = Complex64;

/// Real part of ζ modulo 1 must match the T_ν offset to this tolerance.
const TORUS_TOL: f64 = 1e-9;

/// b_a(u) = E(u, a)/E(u, τa)·exp(−2π(a − τa)Y u); (u − a)/(u − ā) on genus 0.
pub fn blaschke_factor(curve: &RealCurve, a: &SurfacePoint, u: &SurfacePoint) -> Result<C> {
    let ab = a.conj();
    match curve.genus() {
        0 => {
            let (a, ab) = (a.finite().unwrap(), ab.finite().unwrap());
            match u {
                SurfacePoint::Infinity => Ok(C::new(1.0, 0.0)),
                SurfacePoint::Finite(z) => {
                    let d = z - ab;
                    if d.norm() < 1e-14 {
                        return Err(Error::PoleHit(d.norm()));
                    }
                    Ok((z - a) / d)
                }
            }
        }
        1 => {
            let den = curve.prime_form(u, &ab)?;
            if den.norm() < 1e-13 {
                return Err(Error::PoleHit(den.norm()));
            }
            let y = curve.y_matrix()?[(0, 0)];
            let (a, ab, z) = (a.finite().unwrap(), ab.finite().unwrap(), u.finite().unwrap());
            Ok(curve.prime_form(u, &SurfacePoint::Finite(a))? / den * (-2.0 * PI * (a - ab) * y * z).exp())
        }
        _ => Err(Error::UnsupportedBackend("Blaschke factors need genus 0 or 1".into())),
    }
}

/// Index ν of the real torus containing ζ (genus 1), if any.
pub fn torus_index(curve: &RealCurve, zeta: &ToriiPoint) -> Option<u8> {
    let pm = curve.period_matrix()?;
    let hdiag = match pm.h() {
        Some(h) => h[(0, 0)] as f64,
        None => 2.0 * pm.gamma()[(0, 0)].re,
    };
    let comps = curve.real_components().ok()?.len();
    let r = zeta.zeta[0].re - hdiag / 4.0;
    let offsets: &[f64] = if comps == 2 { &[0.0, 0.5] } else { &[0.0] };
    offsets.iter().position(|o| {
        let d = (r - o).rem_euclid(1.0);
        d.min(1.0 - d) <= TORUS_TOL
    }).map(|i| i as u8)
}

/// T = gain·Π b_{a_i}, mapping sections for ζ_in to sections for ζ_out.
#[derive(Debug, Clone)]
pub struct BlaschkeProduct {
    pub zeros: Vec<SurfacePoint>,
    pub gain: f64,
    ctx_in: KernelContext,
    ctx_out: KernelContext,
}

impl BlaschkeProduct {
    /// ζ_out = ζ_in + Σ(a_i − τa_i); both must lie in T₀.
    pub fn new(ctx_in: &KernelContext, zeros: Vec<SurfacePoint>) -> Result<Self> {
        let curve = ctx_in.curve();
        for a in &zeros {
            if curve.side(a)? != Side::Plus {
                return Err(Error::InvalidArgument("Blaschke zeros must lie in X_+".into()));
            }
        }
        let ctx_out = match curve.genus() {
            0 => ctx_in.clone(),
            _ => {
                if torus_index(curve, ctx_in.zeta()) != Some(0) {
                    return Err(Error::InvalidArgument("ζ_in is not in T₀".into()));
                }
                let shift: C = zeros.iter().map(|a| a.finite().unwrap() - a.conj().finite().unwrap()).sum();
                let z = ctx_in.zeta().zeta[0] + shift;
                let tp = ToriiPoint::from_zeta(curve.pm()?, vec![z]);
                if torus_index(curve, &tp) != Some(0) {
                    return Err(Error::InvalidArgument("ζ_out left T₀".into()));
                }
                KernelContext::new(curve, tp)?
            }
        };
        Ok(BlaschkeProduct { zeros, gain: 1.0, ctx_in: ctx_in.clone(), ctx_out })
    }

    pub fn scaled(&self, gain: f64) -> Self {
        BlaschkeProduct { gain, ..self.clone() }
    }

    pub fn ctx_in(&self) -> &KernelContext {
        &self.ctx_in
    }

    pub fn ctx_out(&self) -> &KernelContext {
        &self.ctx_out
    }

    pub fn curve(&self) -> &RealCurve {
        self.ctx_in.curve()
    }

    pub fn eval(&self, u: &SurfacePoint) -> Result<C> {
        let mut t = C::new(self.gain, 0.0);
        for a in &self.zeros {
            t *= blaschke_factor(self.curve(), a, u)?;
        }
        Ok(t)
    }
}

/// K_T(p, q) = K_ζ̃(p, q) − T(p)K_ζ(p, q)conj(T(q)).
pub fn kernel_kt(t: &BlaschkeProduct, p: &SurfacePoint, q: &SurfacePoint) -> Result<C> {
    let ko = t.ctx_out.cauchy_kernel(p, q)?;
    let ki = t.ctx_in.cauchy_kernel(p, q)?;
    Ok(ko - t.eval(p)? * ki * t.eval(q)?.conj())
}

#[derive(Debug, Clone, Serialize)]
pub struct GridSample {
    pub point: C,
    pub abs_t: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ContractivityReport {
    pub max_abs_t: f64,
    pub max_point: C,
    /// Smallest Gram eigenvalue over all batches, relative to that batch's ‖G‖.
    pub min_eig_rel: f64,
    pub min_batch: usize,
    pub min_batch_points: Vec<C>,
    pub batch_min_eigs: Vec<f64>,
    pub contractive: bool,
    pub psd: bool,
    /// Both hold or both fail.
    pub consistent: bool,
    #[serde(skip)]
    pub grid: Vec<GridSample>,
}

fn hermitian_min_eig(g: &DMatrix<C>) -> f64 {
    let h = (g + g.adjoint()) * C::new(0.5, 0.0);
    h.symmetric_eigenvalues().min()
}

/// Max |T| on a grid×grid X₊ sample and the smallest K_T Gram eigenvalue over
/// `batches` random batches of `batch_size` points.
pub fn contractivity_report(t: &BlaschkeProduct, grid: usize, batches: usize, batch_size: usize, seed: u64) -> Result<ContractivityReport> {
    let curve = t.curve();
    let margin = 1e-3;
    let cells: Vec<(usize, usize)> = (0..grid).flat_map(|i| (0..grid).map(move |j| (i, j))).collect();
    let samples: Vec<GridSample> = cells
        .par_iter()
        .map(|&(i, j)| {
            let s = (i as f64 + 0.5) / grid as f64;
            let r = (j as f64 + 0.5) / grid as f64;
            let p = curve.plus_point(s, r, margin)?;
            Ok(GridSample { point: p.finite().unwrap(), abs_t: t.eval(&p)?.norm() })
        })
        .collect::<Result<_>>()?;
    let (max_abs_t, max_point) = samples
        .iter()
        .fold((0.0, C::new(0.0, 0.0)), |acc, s| if s.abs_t > acc.0 { (s.abs_t, s.point) } else { acc });
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let batch_pts: Vec<Vec<SurfacePoint>> = (0..batches)
        .map(|_| {
            (0..batch_size)
                .map(|_| curve.plus_point(rng.gen::<f64>(), rng.gen::<f64>(), margin))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;
    let eigs: Vec<f64> = batch_pts
        .par_iter()
        .map(|pts| {
            let n = pts.len();
            let mut g = DMatrix::from_element(n, n, C::new(0.0, 0.0));
            for i in 0..n {
                for j in 0..n {
                    g[(i, j)] = kernel_kt(t, &pts[i], &pts[j])?;
                }
            }
            let norm = g.norm();
            let e = hermitian_min_eig(&g);
            Ok(if norm > 0.0 { e / norm } else { 0.0 })
        })
        .collect::<Result<_>>()?;
    let (min_batch, min_eig_rel) =
        eigs.iter().enumerate().fold((0, f64::INFINITY), |acc, (i, &e)| if e < acc.1 { (i, e) } else { acc });
    let contractive = max_abs_t <= 1.0 + 1e-8;
    let psd = eigs.is_empty() || min_eig_rel >= -1e-8;
    Ok(ContractivityReport {
        max_abs_t,
        max_point,
        min_eig_rel: if eigs.is_empty() { 0.0 } else { min_eig_rel },
        min_batch,
        min_batch_points: batch_pts.get(min_batch).map(|b| b.iter().map(|p| p.finite().unwrap()).collect()).unwrap_or_default(),
        batch_min_eigs: eigs,
        contractive,
        psd,
        consistent: contractive == psd,
        grid: samples,
    })
}

/// H(T) as a model space: span{K_ζ̃(·, a_i)} over the zeros of T.
pub fn transfer_model_space(t: &BlaschkeProduct) -> Result<ModelSpace> {
    ModelSpace::new(t.ctx_out.clone(), t.zeros.clone())
}

/// Max over samples of |K_X(p, q) via the vessel's characteristic function −
/// K_T(p, q)|, the vessel living on `transfer_model_space(t)`.
pub fn njcf_consistency(
    v: &Vessel,
    ms: &ModelSpace,
    y1: &MeromorphicFn,
    y2: &MeromorphicFn,
    t: &BlaschkeProduct,
    samples: &[(SurfacePoint, SurfacePoint)],
    xi: (f64, f64),
) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for (p, q) in samples {
        let direct = kernel_kt(t, p, q)?;
        let via = if ms.dim() == 0 { C::new(0.0, 0.0) } else { kernel_via_ccf(v, ms, y1, y2, p, q, xi)? };
        worst = worst.max((via - direct).norm());
    }
    Ok(worst)
}

fn quadrature(ctx: &KernelContext, nodes: usize) -> Result<Vec<(SurfacePoint, f64)>> {
    ctx.boundary_quadrature(nodes)
}

fn boundary_inner<F, G>(ctx: &KernelContext, nodes: usize, f: F, g: G) -> Result<C>
where
    F: Fn(&SurfacePoint) -> Result<C> + Sync,
    G: Fn(&SurfacePoint) -> Result<C> + Sync,
{
    let q = quadrature(ctx, nodes)?;
    let terms: Vec<C> = q
        .par_iter()
        .map(|(p, w)| {
            let fv = f(p).map_err(|_| Error::QuadratureDivergence)?;
            let gv = g(p).map_err(|_| Error::QuadratureDivergence)?;
            let v = fv * gv.conj() * *w;
            if v.is_finite() {
                Ok(v)
            } else {
                Err(Error::QuadratureDivergence)
            }
        })
        .collect::<Result<_>>()?;
    // fixed summation order keeps the result deterministic
    Ok(terms.iter().sum())
}

/// |⟨f, T·K_ζ(·, v)⟩| in H²_ζ̃, f = Σ c_i K_ζ̃(·, a_i) ∈ H(T); zero up to quadrature error.
pub fn beurling_orthogonality(t: &BlaschkeProduct, f_coeffs: &DVector<C>, v: &SurfacePoint, nodes: usize) -> Result<f64> {
    if f_coeffs.len() != t.zeros.len() {
        return Err(Error::InvalidArgument("one coefficient per zero".into()));
    }
    let ctx = &t.ctx_out;
    let f = |u: &SurfacePoint| -> Result<C> {
        let mut s = C::new(0.0, 0.0);
        for (c, a) in f_coeffs.iter().zip(&t.zeros) {
            s += c * ctx.cauchy_kernel(u, a)?;
        }
        Ok(s)
    };
    let g = |u: &SurfacePoint| -> Result<C> { Ok(t.eval(u)? * t.ctx_in.cauchy_kernel(u, v)?) };
    Ok(boundary_inner(ctx, nodes, f, g)?.norm())
}

/// |⟨R^y_α f, g⟩ − ⟨f, g/(y − ᾱ)⟩| by boundary quadrature, f from ms and
/// g = K(·, v) in the same Hardy space.
pub fn mm_duality(ms: &ModelSpace, y: &MeromorphicFn, alpha: C, c: &DVector<C>, v: &SurfacePoint, nodes: usize) -> Result<f64> {
    let ctx = ms.ctx();
    let lhs = boundary_inner(ctx, nodes, |u| resolvent_pointwise(ms, y, alpha, c, u), |u| ctx.cauchy_kernel(u, v))?;
    let rhs = boundary_inner(ctx, nodes, |u| ms.eval(c, u), |u| Ok(ctx.cauchy_kernel(u, v)? / (y.eval(u)? - alpha.conj())))?;
    Ok((lhs - rhs).norm())
}
