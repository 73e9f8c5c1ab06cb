//! Truncated Laurent series in one variable with complex coefficients.
//!
//! A series stores `coeffs[k]` as the coefficient of `t^(val + k)`; every
//! coefficient of index `val + len` and above is unknown (truncated).

use num_complex::Complex64;

#[derive(Debug, Clone, PartialEq)]
pub struct Laurent {
    pub val: i32,
    pub coeffs: Vec<Complex64>,
}

fn zero() -> Complex64 {
    Complex64::new(0.0, 0.0)
}

impl Laurent {
    pub fn new(val: i32, coeffs: Vec<Complex64>) -> Self {
        Laurent { val, coeffs }
    }

    /// Taylor series from coefficients c_0, c_1, ...
    pub fn taylor(coeffs: Vec<Complex64>) -> Self {
        Laurent { val: 0, coeffs }
    }

    pub fn constant(c: Complex64, len: usize) -> Self {
        let mut coeffs = vec![zero(); len.max(1)];
        coeffs[0] = c;
        Laurent { val: 0, coeffs }
    }

    /// Exclusive upper bound of known exponents.
    pub fn order(&self) -> i32 {
        self.val + self.coeffs.len() as i32
    }

    /// Coefficient of t^k (zero below the valuation; panics above truncation).
    pub fn coeff(&self, k: i32) -> Complex64 {
        if k < self.val {
            return zero();
        }
        let idx = (k - self.val) as usize;
        assert!(idx < self.coeffs.len(), "coefficient t^{k} beyond truncation");
        self.coeffs[idx]
    }

    /// Drop leading coefficients with modulus <= `tol * scale`.
    pub fn normalize(mut self, tol: f64) -> Self {
        let scale = self.coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max);
        let mut lead = 0;
        while lead < self.coeffs.len() && self.coeffs[lead].norm() <= tol * scale.max(1e-300) {
            lead += 1;
        }
        if lead == self.coeffs.len() {
            return self;
        }
        self.coeffs.drain(..lead);
        self.val += lead as i32;
        self
    }

    /// Drop leading coefficients of exponent ≤ 0 that are negligible against
    /// the largest of those; higher Taylor coefficients do not enter the scale.
    pub fn trim_principal(mut self, tol: f64) -> Self {
        let scale = (self.val..=0).filter(|&k| k < self.order()).map(|k| self.coeff(k).norm()).fold(0.0, f64::max);
        while self.val <= 0 && !self.coeffs.is_empty() && self.coeffs[0].norm() <= tol * scale.max(1e-300) {
            self.coeffs.remove(0);
            self.val += 1;
        }
        self
    }

    pub fn truncate_order(mut self, order: i32) -> Self {
        let keep = (order - self.val).max(0) as usize;
        self.coeffs.truncate(keep);
        self
    }

    pub fn add(&self, o: &Laurent) -> Laurent {
        let v = self.val.min(o.val);
        let ord = self.order().min(o.order());
        let n = (ord - v).max(0) as usize;
        let mut c = vec![zero(); n];
        for (k, ck) in c.iter_mut().enumerate() {
            let e = v + k as i32;
            if e >= self.val {
                *ck += self.coeff(e);
            }
            if e >= o.val {
                *ck += o.coeff(e);
            }
        }
        Laurent::new(v, c)
    }

    pub fn scale(&self, s: Complex64) -> Laurent {
        Laurent::new(self.val, self.coeffs.iter().map(|c| c * s).collect())
    }

    pub fn neg(&self) -> Laurent {
        self.scale(Complex64::new(-1.0, 0.0))
    }

    pub fn sub(&self, o: &Laurent) -> Laurent {
        self.add(&o.neg())
    }

    pub fn mul(&self, o: &Laurent) -> Laurent {
        let n = self.coeffs.len().min(o.coeffs.len());
        let mut c = vec![zero(); n];
        for (i, ci) in c.iter_mut().enumerate() {
            for j in 0..=i {
                *ci += self.coeffs[j] * o.coeffs[i - j];
            }
        }
        Laurent::new(self.val + o.val, c)
    }

    /// Multiplicative inverse; the leading coefficient must be nonzero.
    pub fn inv(&self) -> Laurent {
        let n = self.coeffs.len();
        let a0 = self.coeffs[0];
        let mut c = vec![zero(); n];
        c[0] = 1.0 / a0;
        for k in 1..n {
            let mut s = zero();
            for j in 1..=k {
                s += self.coeffs[j] * c[k - j];
            }
            c[k] = -s / a0;
        }
        Laurent::new(-self.val, c)
    }

    pub fn div(&self, o: &Laurent) -> Laurent {
        self.mul(&o.inv())
    }

    pub fn deriv(&self) -> Laurent {
        let c: Vec<Complex64> = self
            .coeffs
            .iter()
            .enumerate()
            .map(|(k, c)| c * (self.val + k as i32) as f64)
            .collect();
        Laurent::new(self.val - 1, c)
    }

    /// Evaluate the known part at t.
    pub fn eval(&self, t: Complex64) -> Complex64 {
        let mut s = zero();
        for (k, c) in self.coeffs.iter().enumerate() {
            s += c * t.powi(self.val + k as i32);
        }
        s
    }

    /// Principal-part coefficients a_{-s}..a_{-1} as a vector indexed by j-1 for a_{-j}.
    pub fn principal(&self) -> Vec<Complex64> {
        if self.val >= 0 {
            return Vec::new();
        }
        let s = (-self.val) as usize;
        (1..=s).map(|j| self.coeff(-(j as i32))).collect()
    }
}

/// Coefficients of 1/p(x) up to x^(n-1) for a power series p with p(0) != 0.
pub fn series_inverse(p: &[Complex64], n: usize) -> Vec<Complex64> {
    let mut padded = p.to_vec();
    padded.resize(n.max(1), zero());
    Laurent::taylor(padded).inv().coeffs
}

/// Dense bivariate truncated Taylor series: `c[i][j]` multiplies x^i y^j.
#[derive(Debug, Clone)]
pub struct Bivariate {
    pub c: Vec<Vec<Complex64>>,
}

impl Bivariate {
    pub fn zeros(nx: usize, ny: usize) -> Self {
        Bivariate { c: vec![vec![zero(); ny]; nx] }
    }

    pub fn mul(&self, o: &Bivariate) -> Bivariate {
        let nx = self.c.len().min(o.c.len());
        let ny = self.c[0].len().min(o.c[0].len());
        let mut r = Bivariate::zeros(nx, ny);
        for i1 in 0..nx {
            for j1 in 0..ny {
                let a = self.c[i1][j1];
                if a == zero() {
                    continue;
                }
                for i2 in 0..nx - i1 {
                    for j2 in 0..ny - j1 {
                        r.c[i1 + i2][j1 + j2] += a * o.c[i2][j2];
                    }
                }
            }
        }
        r
    }

    /// Outer product p(x)·q(y).
    pub fn outer(p: &[Complex64], q: &[Complex64]) -> Bivariate {
        Bivariate { c: p.iter().map(|a| q.iter().map(|b| a * b).collect()).collect() }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn geometric_inverse() {
        let s = Laurent::taylor(vec![c(1.0), c(-1.0), c(0.0), c(0.0)]);
        let inv = s.inv();
        for k in 0..4 {
            assert!((inv.coeffs[k] - c(1.0)).norm() < 1e-15);
        }
    }

    #[test]
    fn laurent_division_shifts_valuation() {
        // sin-like t - t^3/6 over t
        let num = Laurent::taylor(vec![c(0.0), c(1.0), c(0.0), c(-1.0 / 6.0), c(0.0)]).normalize(0.0);
        assert_eq!(num.val, 1);
        let q = Laurent::taylor(vec![c(1.0), c(0.0), c(0.0), c(0.0)]).div(&num);
        assert_eq!(q.val, -1);
        assert!((q.coeff(-1) - c(1.0)).norm() < 1e-15);
        assert!((q.coeff(1) - c(1.0 / 6.0)).norm() < 1e-15);
    }

    #[test]
    fn deriv_of_inverse_power() {
        let s = Laurent::new(-2, vec![c(1.0), c(0.0), c(3.0)]);
        let d = s.deriv();
        assert_eq!(d.val, -3);
        assert_eq!(d.coeff(-3), c(-2.0));
        assert_eq!(d.coeff(-1), c(0.0));
    }

    #[test]
    fn add_respects_truncation() {
        let a = Laurent::new(-1, vec![c(1.0), c(2.0), c(3.0)]);
        let b = Laurent::new(0, vec![c(1.0)]);
        let s = a.add(&b);
        assert_eq!(s.order(), 1);
        assert_eq!(s.coeff(0), c(3.0));
    }
}
