//! Real curve backends: the Riemann sphere with z ↦ z̄, real elliptic curves
//! ℂ/(ℤ + τℤ) with Re τ ∈ {0, 1/2}, and a data-only generic backend.
//!
//! On genus one every point is carried as a lift in the flat chart; half-order
//! differentials are plain functions of that coordinate.

use crate::error::{Error, Result};
use crate::theta::{self, PeriodMatrix, ThetaChar, DEFAULT_TOL};
use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

/// Tolerance for equality of points modulo the lattice.
pub const POINT_TOL: f64 = 1e-9;

/// A point of X. Genus 0 allows the point at infinity, whose chart is t = −1/z.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum SurfacePoint {
    Finite(Complex64),
    Infinity,
}

impl SurfacePoint {
    pub fn new(z: Complex64) -> Self {
        SurfacePoint::Finite(z)
    }

    pub fn real(x: f64) -> Self {
        SurfacePoint::Finite(Complex64::new(x, 0.0))
    }

    pub fn finite(&self) -> Option<Complex64> {
        match self {
            SurfacePoint::Finite(z) => Some(*z),
            SurfacePoint::Infinity => None,
        }
    }

    pub fn is_infinite(&self) -> bool {
        matches!(self, SurfacePoint::Infinity)
    }

    /// Literal complex conjugate of the lift (no lattice reduction).
    pub fn conj(&self) -> SurfacePoint {
        match self {
            SurfacePoint::Finite(z) => SurfacePoint::Finite(z.conj()),
            SurfacePoint::Infinity => SurfacePoint::Infinity,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Side {
    Plus,
    Minus,
    Real,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RealComponent {
    pub index: usize,
    /// "line" for ℝ ∪ {∞}, "circle" for a horizontal circle of the torus.
    pub kind: &'static str,
    /// Height Im u of the circle in the flat chart (genus 1).
    pub height: Option<f64>,
}

#[derive(Debug, Clone)]
pub enum Backend {
    Genus0,
    Genus1 { tau: Complex64 },
    Generic { components: Option<usize>, dividing: bool },
}

#[derive(Debug, Clone)]
pub struct RealCurve {
    backend: Backend,
    pm: Option<PeriodMatrix>,
    basepoint: SurfacePoint,
    odd_char: Option<ThetaChar>,
    odd_slope: Complex64,
    tol: f64,
}

/// A point ζ of a real torus T_ν together with its characteristic.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ToriiPoint {
    pub zeta: Vec<Complex64>,
    pub nu: Vec<u8>,
    pub a: Vec<f64>,
    pub chi: ThetaChar,
}

impl ToriiPoint {
    /// The (empty) torus point used on genus 0.
    pub fn genus0() -> Self {
        ToriiPoint { zeta: vec![], nu: vec![], a: vec![], chi: ThetaChar::zero(0) }
    }

    /// A torus point from a raw Jacobian point (no T_ν membership asserted).
    pub fn from_zeta(pm: &PeriodMatrix, zeta: Vec<Complex64>) -> Self {
        let chi = ThetaChar::from_point(pm, &zeta);
        ToriiPoint { zeta, nu: vec![], a: vec![], chi }
    }
}

impl RealCurve {
    pub fn genus0() -> Self {
        RealCurve {
            backend: Backend::Genus0,
            pm: None,
            basepoint: SurfacePoint::real(0.0),
            odd_char: None,
            odd_slope: Complex64::new(1.0, 0.0),
            tol: DEFAULT_TOL,
        }
    }

    /// Real elliptic curve ℂ/(ℤ + τℤ); Re τ must be 0 (dividing) or 1/2.
    pub fn genus1(tau: Complex64) -> Result<Self> {
        if !(tau.re.abs() < 1e-12 || (tau.re - 0.5).abs() < 1e-12) {
            return Err(Error::InvalidPeriodMatrix("real genus-1 curves need Re τ ∈ {0, 1/2}".into()));
        }
        let pm = PeriodMatrix::genus1(tau)?;
        let delta = ThetaChar::odd_genus1();
        let slope = theta::theta_deriv(&pm, &delta, &[Complex64::new(0.0, 0.0)], &[1], DEFAULT_TOL)?;
        Ok(RealCurve {
            backend: Backend::Genus1 { tau },
            pm: Some(pm),
            basepoint: SurfacePoint::real(0.0),
            odd_char: Some(delta),
            odd_slope: slope,
            tol: DEFAULT_TOL,
        })
    }

    /// Rectangular curve with τ = i·t0.
    pub fn rectangular(t0: f64) -> Result<Self> {
        RealCurve::genus1(Complex64::new(0.0, t0))
    }

    /// User-supplied period matrix; theta evaluation everywhere, kernels only for g = 1.
    pub fn generic(pm: PeriodMatrix, components: Option<usize>, dividing: bool) -> Result<Self> {
        let g = pm.g();
        let (odd_char, odd_slope) = if g == 1 {
            let d = ThetaChar::odd_genus1();
            let s = theta::theta_deriv(&pm, &d, &[Complex64::new(0.0, 0.0)], &[1], DEFAULT_TOL)?;
            (Some(d), s)
        } else {
            (None, Complex64::new(0.0, 0.0))
        };
        Ok(RealCurve {
            backend: Backend::Generic { components, dividing },
            pm: Some(pm),
            basepoint: SurfacePoint::real(0.0),
            odd_char,
            odd_slope,
            tol: DEFAULT_TOL,
        })
    }

    pub fn backend(&self) -> &Backend {
        &self.backend
    }

    pub fn genus(&self) -> usize {
        self.pm.as_ref().map_or(0, |p| p.g())
    }

    pub fn period_matrix(&self) -> Option<&PeriodMatrix> {
        self.pm.as_ref()
    }

    pub fn pm(&self) -> Result<&PeriodMatrix> {
        self.pm.as_ref().ok_or_else(|| Error::UnsupportedBackend("genus 0 has no period matrix".into()))
    }

    pub fn theta_tol(&self) -> f64 {
        self.tol
    }

    pub fn basepoint(&self) -> SurfacePoint {
        self.basepoint
    }

    pub fn odd_char(&self) -> Option<&ThetaChar> {
        self.odd_char.as_ref()
    }

    /// θ[δ]'(0), the normalization of the genus-one prime form.
    pub fn odd_slope(&self) -> Complex64 {
        self.odd_slope
    }

    /// τ modulus for genus-one curves (generic backend with g = 1 included).
    pub fn tau(&self) -> Option<Complex64> {
        match (&self.backend, &self.pm) {
            (Backend::Genus1 { tau }, _) => Some(*tau),
            (Backend::Generic { .. }, Some(pm)) if pm.g() == 1 => Some(pm.gamma()[(0, 0)]),
            _ => None,
        }
    }

    pub fn require_genus1(&self) -> Result<Complex64> {
        self.tau().ok_or_else(|| Error::UnsupportedBackend("operation needs a genus-one flat chart".into()))
    }

    /// Orientation of the standard chart at a real point: +1 when the chart
    /// direction agrees with the boundary orientation of X_+, −1 otherwise.
    pub fn chart_orientation(&self, p: &SurfacePoint) -> Option<f64> {
        match (&self.backend, p) {
            (Backend::Genus0, _) => Some(1.0),
            (Backend::Genus1 { tau }, SurfacePoint::Finite(z)) if tau.re.abs() < 1e-12 => {
                let t0 = tau.im;
                let y = z.im.rem_euclid(t0);
                if y <= POINT_TOL || t0 - y <= POINT_TOL {
                    Some(1.0)
                } else if (y - t0 / 2.0).abs() <= POINT_TOL {
                    Some(-1.0)
                } else {
                    None
                }
            }
            _ => None,
        }
    }

    pub fn is_dividing(&self) -> bool {
        match &self.backend {
            Backend::Genus0 => true,
            Backend::Genus1 { tau } => tau.re.abs() < 1e-12,
            Backend::Generic { dividing, .. } => *dividing,
        }
    }

    /// Reduce a point to its fundamental-domain representative.
    pub fn reduce(&self, p: &SurfacePoint) -> SurfacePoint {
        match (p, &self.pm) {
            (SurfacePoint::Finite(z), Some(pm)) if pm.g() == 1 => {
                SurfacePoint::Finite(theta::lattice_reduce(pm, &[*z]).0[0])
            }
            _ => *p,
        }
    }

    /// Equality modulo the lattice (genus 1) with tolerance `tol`.
    pub fn same_point(&self, p: &SurfacePoint, q: &SurfacePoint, tol: f64) -> bool {
        match (p, q) {
            (SurfacePoint::Infinity, SurfacePoint::Infinity) => true,
            (SurfacePoint::Finite(a), SurfacePoint::Finite(b)) => match &self.pm {
                Some(pm) if pm.g() == 1 => theta::lattice_difference(pm, &[*a], &[*b], tol).is_some(),
                _ => (a - b).norm() <= tol,
            },
            _ => false,
        }
    }

    /// Lattice vector (m, n) with p − q = m + nτ (genus 1), if p ≡ q.
    pub fn lattice_offset(&self, p: &SurfacePoint, q: &SurfacePoint, tol: f64) -> Option<(i64, i64)> {
        match (p, q, &self.pm) {
            (SurfacePoint::Finite(a), SurfacePoint::Finite(b), Some(pm)) if pm.g() == 1 => {
                theta::lattice_difference(pm, &[*a], &[*b], tol).map(|(m, n)| (m[0], n[0]))
            }
            (SurfacePoint::Infinity, SurfacePoint::Infinity, _) => Some((0, 0)),
            (SurfacePoint::Finite(a), SurfacePoint::Finite(b), None) if (a - b).norm() <= tol => Some((0, 0)),
            _ => None,
        }
    }

    /// The anti-holomorphic involution, lattice-reduced on genus 1.
    pub fn involution(&self, p: &SurfacePoint) -> SurfacePoint {
        self.reduce(&p.conj())
    }

    pub fn real_components(&self) -> Result<Vec<RealComponent>> {
        match &self.backend {
            Backend::Genus0 => Ok(vec![RealComponent { index: 0, kind: "line", height: None }]),
            Backend::Genus1 { tau } => {
                if tau.re.abs() < 1e-12 {
                    Ok(vec![
                        RealComponent { index: 0, kind: "circle", height: Some(0.0) },
                        RealComponent { index: 1, kind: "circle", height: Some(tau.im / 2.0) },
                    ])
                } else {
                    Ok(vec![RealComponent { index: 0, kind: "circle", height: Some(0.0) }])
                }
            }
            Backend::Generic { components: Some(k), .. } => {
                Ok((0..*k).map(|i| RealComponent { index: i, kind: "abstract", height: None }).collect())
            }
            Backend::Generic { components: None, .. } => {
                Err(Error::UnsupportedBackend("generic curve without component data".into()))
            }
        }
    }

    /// Which side of X_ℝ a point lies on (dividing curves only).
    pub fn side(&self, p: &SurfacePoint) -> Result<Side> {
        match (&self.backend, p) {
            (_, SurfacePoint::Infinity) => Ok(Side::Real),
            (Backend::Genus0, SurfacePoint::Finite(z)) => Ok(if z.im.abs() <= POINT_TOL {
                Side::Real
            } else if z.im > 0.0 {
                Side::Plus
            } else {
                Side::Minus
            }),
            (Backend::Genus1 { tau }, SurfacePoint::Finite(z)) if tau.re.abs() < 1e-12 => {
                let t0 = tau.im;
                let y = z.im.rem_euclid(t0);
                let half = t0 / 2.0;
                if y <= POINT_TOL || (t0 - y) <= POINT_TOL || (y - half).abs() <= POINT_TOL {
                    Ok(Side::Real)
                } else if y < half {
                    Ok(Side::Plus)
                } else {
                    Ok(Side::Minus)
                }
            }
            _ => Err(Error::UnsupportedBackend("side classification needs a dividing genus-0/1 curve".into())),
        }
    }

    /// Point on a real component at parameter s ∈ [0,1) (genus 1) or x ∈ ℝ (genus 0).
    pub fn boundary_point(&self, component: &RealComponent, s: f64) -> SurfacePoint {
        match component.height {
            Some(h) => SurfacePoint::Finite(Complex64::new(s, h)),
            None => SurfacePoint::real(s),
        }
    }

    /// Map (s, t) ∈ [0,1)² into X_+ away from X_ℝ by `margin` (relative).
    pub fn plus_point(&self, s: f64, t: f64, margin: f64) -> Result<SurfacePoint> {
        match &self.backend {
            Backend::Genus0 => {
                let x = 4.0 * (s - 0.5);
                let y = margin + (1.0 - margin) * 2.0 * t + margin;
                Ok(SurfacePoint::Finite(Complex64::new(x, y)))
            }
            Backend::Genus1 { tau } if tau.re.abs() < 1e-12 => {
                let half = tau.im / 2.0;
                let y = half * (margin + (1.0 - 2.0 * margin) * t);
                Ok(SurfacePoint::Finite(Complex64::new(s, y)))
            }
            _ => Err(Error::UnsupportedBackend("X_+ sampling needs a dividing genus-0/1 curve".into())),
        }
    }

    /// Prime form in the fixed chart: v − u on genus 0, θ[δ](v−u)/θ[δ]'(0) on genus 1.
    pub fn prime_form(&self, u: &SurfacePoint, v: &SurfacePoint) -> Result<Complex64> {
        let (a, b) = match (u, v) {
            (SurfacePoint::Finite(a), SurfacePoint::Finite(b)) => (*a, *b),
            _ => return Err(Error::UnsupportedBackend("prime form at infinity".into())),
        };
        match &self.pm {
            None => Ok(b - a),
            Some(pm) if pm.g() == 1 => {
                let delta = self.odd_char.as_ref().expect("genus-one odd characteristic");
                let th = theta::theta_char(pm, delta, &[b - a], self.tol)?;
                Ok(th / self.odd_slope)
            }
            Some(_) => Err(Error::UnsupportedBackend("prime form needs the genus-one flat chart".into())),
        }
    }

    /// ζ = ¼diag(H) + Σ ν_j/2·e_{g−k+1+j} + i Σ a_j Im Γ_j, with θ(ζ) ≠ 0 enforced.
    pub fn torii_point(&self, nu: &[u8], a: &[f64]) -> Result<ToriiPoint> {
        let pm = match &self.pm {
            None => {
                if !nu.is_empty() || !a.is_empty() {
                    return Err(Error::InvalidArgument("genus 0 has no torus parameters".into()));
                }
                return Ok(ToriiPoint::genus0());
            }
            Some(pm) => pm,
        };
        let g = pm.g();
        let k = self.real_components()?.len();
        if nu.len() + 1 != k {
            return Err(Error::InvalidArgument(format!("expected {} ν bits, got {}", k - 1, nu.len())));
        }
        if a.len() != g {
            return Err(Error::InvalidArgument(format!("expected {g} torus parameters")));
        }
        let hdiag: Vec<f64> = match pm.h() {
            Some(h) => (0..g).map(|i| h[(i, i)] as f64).collect(),
            None => (0..g).map(|i| 2.0 * pm.gamma()[(i, i)].re).collect(),
        };
        let mut zeta: Vec<Complex64> = hdiag.iter().map(|h| Complex64::new(h / 4.0, 0.0)).collect();
        for (j, &bit) in nu.iter().enumerate() {
            if bit > 1 {
                return Err(Error::InvalidArgument("ν entries are bits".into()));
            }
            let idx = g + j + 1 - k;
            zeta[idx] += 0.5 * bit as f64;
        }
        for i in 0..g {
            for (j, aj) in a.iter().enumerate() {
                zeta[i] += Complex64::new(0.0, aj * pm.gamma()[(i, j)].im);
            }
        }
        let th = theta::theta(pm, &zeta, self.tol)?;
        if th.norm() <= 1e-8 {
            return Err(Error::ThetaVanishes(th.norm()));
        }
        let chi = ThetaChar::from_point(pm, &zeta);
        Ok(ToriiPoint { zeta, nu: nu.to_vec(), a: a.to_vec(), chi })
    }

    /// Abel–Jacobi image μ(p) = p − p0 in the flat chart (genus 1); empty on genus 0.
    pub fn abel_jacobi(&self, p: &SurfacePoint) -> Result<Vec<Complex64>> {
        match &self.backend {
            Backend::Genus0 => Ok(vec![]),
            Backend::Genus1 { .. } => {
                let z = p.finite().ok_or(Error::InvalidArgument("point at infinity".into()))?;
                let z0 = self.basepoint.finite().unwrap_or_default();
                Ok(vec![z - z0])
            }
            Backend::Generic { .. } => Err(Error::UnsupportedBackend("Abel–Jacobi map for generic curves".into())),
        }
    }

    /// Im Γ column-scaled matrix Y with Im Γ = Y⁻¹ (genus ≥ 1).
    pub fn y_matrix(&self) -> Result<DMatrix<f64>> {
        Ok(self.pm()?.y().clone())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn genus0_involution_is_conjugation() {
        let x = RealCurve::genus0();
        assert_eq!(x.involution(&SurfacePoint::new(c(0.0, 1.0))), SurfacePoint::new(c(0.0, -1.0)));
        assert_eq!(x.real_components().unwrap().len(), 1);
    }

    #[test]
    fn genus1_components() {
        let sq = RealCurve::rectangular(1.0).unwrap();
        let comps = sq.real_components().unwrap();
        assert_eq!(comps.len(), 2);
        assert_eq!(comps[1].height, Some(0.5));
        let tw = RealCurve::genus1(c(0.5, 1.0)).unwrap();
        assert_eq!(tw.real_components().unwrap().len(), 1);
        assert!(!tw.is_dividing());
    }

    #[test]
    fn real_points_are_fixed() {
        let sq = RealCurve::rectangular(0.8).unwrap();
        for p in [SurfacePoint::real(0.37), SurfacePoint::new(c(0.61, 0.4))] {
            assert!(sq.same_point(&sq.involution(&p), &p, 1e-12));
        }
    }

    #[test]
    fn prime_form_basic_properties() {
        let sq = RealCurve::rectangular(1.0).unwrap();
        let u = SurfacePoint::new(c(0.2, 0.1));
        let v = SurfacePoint::new(c(0.45, 0.3));
        assert!(sq.prime_form(&u, &u).unwrap().norm() < 1e-10);
        let e1 = sq.prime_form(&u, &v).unwrap();
        let e2 = sq.prime_form(&v, &u).unwrap();
        assert!((e1 + e2).norm() < 1e-10);
        let h = 1e-4;
        let w = SurfacePoint::new(c(0.2 + h, 0.1));
        let r = sq.prime_form(&u, &w).unwrap() / h;
        assert!((r - 1.0).norm() < 1e-3);
    }

    #[test]
    fn torii_point_rectangular() {
        let sq = RealCurve::rectangular(1.0).unwrap();
        let z = sq.torii_point(&[0], &[0.0]).unwrap();
        assert!(z.zeta[0].norm() < 1e-15);
        let z1 = sq.torii_point(&[0], &[1.0]).unwrap();
        let z3 = sq.torii_point(&[0], &[3.0]).unwrap();
        let pm = sq.pm().unwrap();
        assert!(theta::lattice_difference(pm, &z1.zeta, &z3.zeta, 1e-10).is_some());
        // T_1 at a = 1/2 is the odd half period where θ vanishes.
        assert!(matches!(sq.torii_point(&[1], &[0.5]), Err(Error::ThetaVanishes(_))));
    }

    #[test]
    fn abel_jacobi_translation() {
        let sq = RealCurve::rectangular(1.0).unwrap();
        let mu = sq.abel_jacobi(&SurfacePoint::real(0.25)).unwrap();
        assert!((mu[0] - 0.25).norm() < 1e-15);
        assert!(sq.abel_jacobi(&sq.basepoint()).unwrap()[0].norm() < 1e-15);
    }

    #[test]
    fn sides_swap_under_involution() {
        let sq = RealCurve::rectangular(0.8).unwrap();
        let p = SurfacePoint::new(c(0.3, 0.1));
        assert_eq!(sq.side(&p).unwrap(), Side::Plus);
        assert_eq!(sq.side(&sq.involution(&p)).unwrap(), Side::Minus);
    }
}
