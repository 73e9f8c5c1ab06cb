//! Riemann theta functions with characteristics and their derivatives.
//!
//! The lattice sum is truncated to a Euclidean ball around the dominant term;
//! the radius comes from the Gaussian tail bound in the smallest eigenvalue
//! of Im Γ. Errors are absolute relative to the largest possible term
//! magnitude (which is 1 when Im λ = 0).

use crate::error::{Error, Result};
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

pub const DEFAULT_TOL: f64 = 1e-12;
pub const RADIUS_CAP: usize = 200;
pub const MAX_DERIV_ORDER: usize = 6;

/// Symmetric g×g period matrix with positive definite imaginary part.
#[derive(Debug, Clone)]
pub struct PeriodMatrix {
    gamma: DMatrix<Complex64>,
    h: Option<DMatrix<i64>>,
    im_inv: DMatrix<f64>,
    lambda_min: f64,
}

impl PeriodMatrix {
    pub fn new(gamma: DMatrix<Complex64>, h: Option<DMatrix<i64>>) -> Result<Self> {
        let g = gamma.nrows();
        if g == 0 || gamma.ncols() != g {
            return Err(Error::InvalidPeriodMatrix("must be square and nonempty".into()));
        }
        for i in 0..g {
            for j in 0..g {
                if (gamma[(i, j)] - gamma[(j, i)]).norm() > 1e-12 {
                    return Err(Error::InvalidPeriodMatrix("not symmetric".into()));
                }
            }
        }
        let im = gamma.map(|z| z.im);
        let eig = nalgebra::SymmetricEigen::new(im.clone());
        let lambda_min = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
        if !(lambda_min > 0.0) {
            return Err(Error::NonPositiveImGamma);
        }
        if let Some(hm) = &h {
            if hm.nrows() != g || hm.ncols() != g {
                return Err(Error::InvalidPeriodMatrix("H has the wrong shape".into()));
            }
            for i in 0..g {
                for j in 0..g {
                    if (gamma[(i, j)].re - 0.5 * hm[(i, j)] as f64).abs() > 1e-12 {
                        return Err(Error::InvalidPeriodMatrix("Re Γ differs from H/2".into()));
                    }
                }
            }
        }
        let im_inv = im.try_inverse().ok_or(Error::NonPositiveImGamma)?;
        Ok(PeriodMatrix { gamma, h, im_inv, lambda_min })
    }

    /// Genus-one period matrix [tau]; H is inferred when Re tau is 0 or 1/2.
    pub fn genus1(tau: Complex64) -> Result<Self> {
        let h = if tau.re.abs() < 1e-12 {
            Some(DMatrix::from_element(1, 1, 0))
        } else if (tau.re - 0.5).abs() < 1e-12 {
            Some(DMatrix::from_element(1, 1, 1))
        } else {
            None
        };
        PeriodMatrix::new(DMatrix::from_element(1, 1, tau), h)
    }

    pub fn g(&self) -> usize {
        self.gamma.nrows()
    }

    pub fn gamma(&self) -> &DMatrix<Complex64> {
        &self.gamma
    }

    pub fn h(&self) -> Option<&DMatrix<i64>> {
        self.h.as_ref()
    }

    /// Y with Im Γ = Y⁻¹.
    pub fn y(&self) -> &DMatrix<f64> {
        &self.im_inv
    }

    pub fn lambda_min(&self) -> f64 {
        self.lambda_min
    }
}

/// Characteristic (a, b) of a theta function.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThetaChar {
    pub a: Vec<f64>,
    pub b: Vec<f64>,
}

impl ThetaChar {
    pub fn zero(g: usize) -> Self {
        ThetaChar { a: vec![0.0; g], b: vec![0.0; g] }
    }

    pub fn new(a: Vec<f64>, b: Vec<f64>) -> Self {
        ThetaChar { a, b }
    }

    /// The genus-one odd characteristic (1/2, 1/2).
    pub fn odd_genus1() -> Self {
        ThetaChar { a: vec![0.5], b: vec![0.5] }
    }

    /// Characteristic (a, b) with b + Γa = ζ.
    pub fn from_point(pm: &PeriodMatrix, zeta: &[Complex64]) -> Self {
        let (s, t) = lattice_coords(pm, zeta);
        ThetaChar { a: t, b: s }
    }
}

/// Real coordinates (s, t) with z = s + Γ t.
pub fn lattice_coords(pm: &PeriodMatrix, z: &[Complex64]) -> (Vec<f64>, Vec<f64>) {
    let g = pm.g();
    let im = DVector::from_iterator(g, z.iter().map(|c| c.im));
    let t = &pm.im_inv * im;
    let re_gamma = pm.gamma.map(|c| c.re);
    let re = DVector::from_iterator(g, z.iter().map(|c| c.re));
    let s = re - re_gamma * &t;
    (s.iter().cloned().collect(), t.iter().cloned().collect())
}

fn floor_snap(x: f64) -> (i64, f64) {
    let mut n = x.floor();
    let mut f = x - n;
    if f > 1.0 - 1e-13 {
        n += 1.0;
        f = 0.0;
    }
    (n as i64, f)
}

/// Fundamental-domain representative z' = z − m − Γn with lattice
/// coordinates in [0, 1).
pub fn lattice_reduce(pm: &PeriodMatrix, z: &[Complex64]) -> (Vec<Complex64>, Vec<i64>, Vec<i64>) {
    let g = pm.g();
    let (s, t) = lattice_coords(pm, z);
    let mut m = vec![0i64; g];
    let mut n = vec![0i64; g];
    for j in 0..g {
        m[j] = floor_snap(s[j]).0;
        n[j] = floor_snap(t[j]).0;
    }
    let zr = lattice_shift(pm, z, &m, &n, -1.0);
    (zr, m, n)
}

/// z + sign·(m + Γn).
pub fn lattice_shift(pm: &PeriodMatrix, z: &[Complex64], m: &[i64], n: &[i64], sign: f64) -> Vec<Complex64> {
    let g = pm.g();
    (0..g)
        .map(|i| {
            let mut w = z[i] + sign * m[i] as f64;
            for j in 0..g {
                w += sign * pm.gamma[(i, j)] * n[j] as f64;
            }
            w
        })
        .collect()
}

/// Lattice vector (m, n) with z1 − z2 = m + Γn, if it exists within `tol`.
pub fn lattice_difference(pm: &PeriodMatrix, z1: &[Complex64], z2: &[Complex64], tol: f64) -> Option<(Vec<i64>, Vec<i64>)> {
    let d: Vec<Complex64> = z1.iter().zip(z2).map(|(a, b)| a - b).collect();
    let (s, t) = lattice_coords(pm, &d);
    let m: Vec<i64> = s.iter().map(|x| x.round() as i64).collect();
    let n: Vec<i64> = t.iter().map(|x| x.round() as i64).collect();
    let rest = lattice_shift(pm, &d, &m, &n, -1.0);
    if rest.iter().all(|c| c.norm() <= tol) {
        Some((m, n))
    } else {
        None
    }
}

struct Summation {
    center: Vec<f64>,
    radius: f64,
}

fn plan(pm: &PeriodMatrix, chi: &ThetaChar, lambda: &[Complex64], order: usize, tol: f64) -> Result<Summation> {
    let g = pm.g();
    if lambda.len() != g || chi.a.len() != g || chi.b.len() != g {
        return Err(Error::InvalidArgument("dimension mismatch".into()));
    }
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument("tolerance must be positive".into()));
    }
    let iml = DVector::from_iterator(g, lambda.iter().map(|c| c.im));
    let xc = -(&pm.im_inv * &iml);
    let center: Vec<f64> = xc.iter().zip(&chi.a).map(|(x, a)| x - a).collect();
    let lmin = pm.lambda_min;
    let r0 = (g as f64).sqrt();
    let cnorm = xc.norm();
    let mut r = r0 + 1.0;
    loop {
        let shell = (2.0 * r + 3.0).powi(g as i32);
        let poly = (2.0 * PI * (r + cnorm + 1.0)).powi(order as i32);
        let bound = shell * poly * (-PI * lmin * (r - r0).powi(2)).exp() / (1.0 - (-PI * lmin).exp()).max(1e-3);
        if bound < tol {
            break;
        }
        r += 0.5;
        if r > RADIUS_CAP as f64 {
            return Err(Error::TruncationOverflow(r.ceil() as usize, RADIUS_CAP));
        }
    }
    Ok(Summation { center, radius: r })
}

fn for_each_lattice_point(s: &Summation, mut f: impl FnMut(&[f64])) {
    let g = s.center.len();
    let lo: Vec<i64> = s.center.iter().map(|c| (c - s.radius).floor() as i64).collect();
    let hi: Vec<i64> = s.center.iter().map(|c| (c + s.radius).ceil() as i64).collect();
    let mut n = lo.clone();
    let mut buf = vec![0.0; g];
    loop {
        let mut d2 = 0.0;
        for j in 0..g {
            buf[j] = n[j] as f64;
            d2 += (buf[j] - s.center[j]).powi(2);
        }
        if d2 <= s.radius * s.radius {
            f(&buf);
        }
        let mut j = 0;
        loop {
            if j == g {
                return;
            }
            n[j] += 1;
            if n[j] <= hi[j] {
                break;
            }
            n[j] = lo[j];
            j += 1;
        }
    }
}

fn exponent(pm: &PeriodMatrix, x: &[f64], w: &[Complex64]) -> Complex64 {
    let g = x.len();
    let i = Complex64::i();
    let mut quad = Complex64::new(0.0, 0.0);
    for r in 0..g {
        for c in 0..g {
            quad += pm.gamma[(r, c)] * x[r] * x[c];
        }
    }
    let lin: Complex64 = (0..g).map(|j| w[j] * x[j]).sum();
    i * PI * quad + 2.0 * i * PI * lin
}

/// θ(λ) = Σ exp(iπ nᵀΓn + 2iπ nᵀλ).
pub fn theta(pm: &PeriodMatrix, lambda: &[Complex64], tol: f64) -> Result<Complex64> {
    theta_char(pm, &ThetaChar::zero(pm.g()), lambda, tol)
}

/// θ[a;b](λ) = Σ exp(iπ(n+a)ᵀΓ(n+a) + 2iπ(n+a)ᵀ(λ+b)).
pub fn theta_char(pm: &PeriodMatrix, chi: &ThetaChar, lambda: &[Complex64], tol: f64) -> Result<Complex64> {
    theta_deriv(pm, chi, lambda, &vec![0; pm.g()], tol)
}

/// Partial derivative of θ[a;b] of multi-index `order` (|order| ≤ 6).
pub fn theta_deriv(pm: &PeriodMatrix, chi: &ThetaChar, lambda: &[Complex64], order: &[usize], tol: f64) -> Result<Complex64> {
    let total: usize = order.iter().sum();
    if total > MAX_DERIV_ORDER {
        return Err(Error::OrderTooHigh(total, MAX_DERIV_ORDER));
    }
    if order.len() != pm.g() {
        return Err(Error::InvalidArgument("order length differs from genus".into()));
    }
    let s = plan(pm, chi, lambda, total, tol)?;
    let w: Vec<Complex64> = lambda.iter().zip(&chi.b).map(|(l, b)| l + b).collect();
    let two_pi_i = Complex64::new(0.0, 2.0 * PI);
    let mut sum = Complex64::new(0.0, 0.0);
    let mut x = vec![0.0; pm.g()];
    for_each_lattice_point(&s, |n| {
        for j in 0..n.len() {
            x[j] = n[j] + chi.a[j];
        }
        let mut term = exponent(pm, &x, &w).exp();
        for (j, &o) in order.iter().enumerate() {
            if o > 0 {
                term *= (two_pi_i * x[j]).powi(o as i32);
            }
        }
        sum += term;
    });
    Ok(sum)
}

/// Taylor coefficients θ[a;b](λ + t·dir) = Σ_k c_k t^k for k = 0..=k_max.
/// Not subject to the public derivative cap; used for series manipulation.
pub fn theta_jet(pm: &PeriodMatrix, chi: &ThetaChar, lambda: &[Complex64], dir: &[Complex64], k_max: usize, tol: f64) -> Result<Vec<Complex64>> {
    let s = plan(pm, chi, lambda, k_max, tol)?;
    let w: Vec<Complex64> = lambda.iter().zip(&chi.b).map(|(l, b)| l + b).collect();
    let two_pi_i = Complex64::new(0.0, 2.0 * PI);
    let mut out = vec![Complex64::new(0.0, 0.0); k_max + 1];
    let mut x = vec![0.0; pm.g()];
    for_each_lattice_point(&s, |n| {
        for j in 0..n.len() {
            x[j] = n[j] + chi.a[j];
        }
        let term = exponent(pm, &x, &w).exp();
        let f: Complex64 = two_pi_i * x.iter().zip(dir).map(|(xj, d)| d * xj).sum::<Complex64>();
        let mut p = term;
        for (k, o) in out.iter_mut().enumerate() {
            *o += p;
            p = p * f / (k as f64 + 1.0);
        }
    });
    Ok(out)
}
