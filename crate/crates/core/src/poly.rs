//! Dense complex polynomials (ascending coefficients) and an Aberth root finder.

use num_complex::Complex64;

pub fn trim(p: &[Complex64]) -> Vec<Complex64> {
    let scale = p.iter().map(|c| c.norm()).fold(0.0, f64::max);
    let mut v = p.to_vec();
    while v.len() > 1 && v.last().unwrap().norm() <= 1e-14 * scale.max(1e-300) {
        v.pop();
    }
    if v.is_empty() {
        v.push(Complex64::new(0.0, 0.0));
    }
    v
}

pub fn degree(p: &[Complex64]) -> usize {
    trim(p).len() - 1
}

pub fn eval(p: &[Complex64], z: Complex64) -> Complex64 {
    p.iter().rev().fold(Complex64::new(0.0, 0.0), |acc, c| acc * z + c)
}

pub fn deriv(p: &[Complex64]) -> Vec<Complex64> {
    if p.len() <= 1 {
        return vec![Complex64::new(0.0, 0.0)];
    }
    p.iter().enumerate().skip(1).map(|(k, c)| c * k as f64).collect()
}

pub fn add(p: &[Complex64], q: &[Complex64]) -> Vec<Complex64> {
    let n = p.len().max(q.len());
    (0..n)
        .map(|k| p.get(k).cloned().unwrap_or_default() + q.get(k).cloned().unwrap_or_default())
        .collect()
}

pub fn scale(p: &[Complex64], s: Complex64) -> Vec<Complex64> {
    p.iter().map(|c| c * s).collect()
}

pub fn mul(p: &[Complex64], q: &[Complex64]) -> Vec<Complex64> {
    let mut r = vec![Complex64::new(0.0, 0.0); p.len() + q.len() - 1];
    for (i, a) in p.iter().enumerate() {
        for (j, b) in q.iter().enumerate() {
            r[i + j] += a * b;
        }
    }
    r
}

/// Taylor coefficients of p(z0 + t).
pub fn shift(p: &[Complex64], z0: Complex64) -> Vec<Complex64> {
    let mut out = p.to_vec();
    let n = out.len();
    // repeated synthetic division
    for k in 0..n {
        for j in (k..n - 1).rev() {
            let v = out[j + 1] * z0;
            out[j] += v;
        }
    }
    out
}

/// All roots of p via the Aberth–Ehrlich iteration, polished by Newton.
pub fn roots(p: &[Complex64]) -> Vec<Complex64> {
    let p = trim(p);
    let n = p.len() - 1;
    if n == 0 {
        return vec![];
    }
    let lead = p[n];
    let monic: Vec<Complex64> = p.iter().map(|c| c / lead).collect();
    let radius = 1.0 + monic[..n].iter().map(|c| c.norm()).fold(0.0, f64::max);
    let dp = deriv(&monic);
    let mut z: Vec<Complex64> = (0..n)
        .map(|k| Complex64::from_polar(0.5 * radius, 2.0 * std::f64::consts::PI * (k as f64 + 0.25) / n as f64 + 0.4))
        .collect();
    for _ in 0..500 {
        let mut max_step: f64 = 0.0;
        for i in 0..n {
            let f = eval(&monic, z[i]);
            let d = eval(&dp, z[i]);
            if f.norm() == 0.0 {
                continue;
            }
            let ratio = f / d;
            let mut s = Complex64::new(0.0, 0.0);
            for j in 0..n {
                if j != i {
                    s += 1.0 / (z[i] - z[j]);
                }
            }
            let w = ratio / (1.0 - ratio * s);
            if w.is_finite() {
                z[i] -= w;
                max_step = max_step.max(w.norm() / z[i].norm().max(1.0));
            }
        }
        if max_step < 1e-15 {
            break;
        }
    }
    for zi in z.iter_mut() {
        for _ in 0..3 {
            let f = eval(&monic, *zi);
            let d = eval(&dp, *zi);
            if d.norm() > 0.0 {
                let step = f / d;
                if step.is_finite() {
                    *zi -= step;
                }
            }
        }
    }
    z
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn roots_of_cubic() {
        // (z-1)(z+2)(z-i)
        let p = mul(&mul(&[c(-1.0, 0.0), c(1.0, 0.0)], &[c(2.0, 0.0), c(1.0, 0.0)]), &[c(0.0, -1.0), c(1.0, 0.0)]);
        let mut r = roots(&p);
        r.sort_by(|a, b| a.re.partial_cmp(&b.re).unwrap());
        assert!((r[0] - c(-2.0, 0.0)).norm() < 1e-12);
        assert!((r[1] - c(0.0, 1.0)).norm() < 1e-12);
        assert!((r[2] - c(1.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn shift_matches_taylor() {
        let p = [c(1.0, 0.0), c(2.0, 0.0), c(3.0, 0.0)];
        let s = shift(&p, c(1.0, 0.0));
        assert_eq!(s, vec![c(6.0, 0.0), c(8.0, 0.0), c(3.0, 0.0)]);
    }
}
