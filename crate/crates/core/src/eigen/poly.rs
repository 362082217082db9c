//! Characteristic polynomial and simultaneous polynomial root finding.

use nalgebra::DMatrix;
use num_complex::Complex64;

/// Coefficients of det(zI - A), ascending, monic (`c[n] = 1`), by the
/// Faddeev-LeVerrier recursion. Intended for small n only.
pub fn characteristic_polynomial(a: &DMatrix<Complex64>) -> Vec<Complex64> {
    let n = a.nrows();
    let mut coeffs = vec![Complex64::new(0.0, 0.0); n + 1];
    coeffs[n] = Complex64::new(1.0, 0.0);
    let identity = DMatrix::<Complex64>::identity(n, n);
    let mut m = DMatrix::<Complex64>::zeros(n, n);
    for k in 1..=n {
        m = a * &m + &identity * coeffs[n - k + 1];
        let am = a * &m;
        coeffs[n - k] = -am.trace() / k as f64;
    }
    coeffs
}

/// Horner evaluation of p and p', coefficients ascending.
pub fn eval_with_derivative(coeffs: &[Complex64], z: Complex64) -> (Complex64, Complex64) {
    let mut p = Complex64::new(0.0, 0.0);
    let mut dp = Complex64::new(0.0, 0.0);
    for c in coeffs.iter().rev() {
        dp = dp * z + p;
        p = p * z + c;
    }
    (p, dp)
}

fn horner_abs(abs_coeffs: &[f64], r: f64) -> f64 {
    abs_coeffs.iter().rev().fold(0.0, |acc, c| acc * r + c)
}

/// All roots of a monic polynomial (ascending coefficients) by Aberth-Ehrlich
/// iteration. Returns `None` when the iteration fails to settle.
pub fn polynomial_roots(coeffs: &[Complex64]) -> Option<Vec<Complex64>> {
    let n = coeffs.len() - 1;
    let lead = coeffs[n];
    let monic: Vec<Complex64> = coeffs.iter().map(|c| c / lead).collect();
    if n == 1 {
        return Some(vec![-monic[0]]);
    }
    // Cauchy bound on the root moduli.
    let bound = 1.0 + monic[..n].iter().map(|c| c.norm()).fold(0.0, f64::max);
    let radius = 0.5 * bound;
    let mut z: Vec<Complex64> = (0..n)
        .map(|k| {
            let theta = 2.0 * std::f64::consts::PI * k as f64 / n as f64 + 0.4;
            Complex64::from_polar(radius, theta) - monic[n - 1] / n as f64
        })
        .collect();

    let abs_coeffs: Vec<f64> = monic.iter().map(|c| c.norm()).collect();
    let mut settled = vec![false; n];
    let mut converged = false;
    for _ in 0..500 {
        let mut max_rel = 0.0_f64;
        for i in 0..n {
            if settled[i] {
                continue;
            }
            let (p, dp) = eval_with_derivative(&monic, z[i]);
            // residual at the rounding level of Horner's scheme: no further progress possible
            let floor = 4.0 * n as f64 * f64::EPSILON * horner_abs(&abs_coeffs, z[i].norm());
            if p.norm() <= floor {
                settled[i] = true;
                continue;
            }
            let ratio = p / dp;
            let repulsion: Complex64 = (0..n)
                .filter(|&j| j != i)
                .map(|j| {
                    let d = z[i] - z[j];
                    if d == Complex64::new(0.0, 0.0) {
                        Complex64::new(0.0, 0.0)
                    } else {
                        d.inv()
                    }
                })
                .sum();
            let denom = Complex64::new(1.0, 0.0) - ratio * repulsion;
            let step = if denom.norm() > 0.0 && dp.norm() > 0.0 {
                ratio / denom
            } else {
                Complex64::new(1e-8 * (1.0 + z[i].norm()), 0.0)
            };
            if !(step.re.is_finite() && step.im.is_finite()) {
                return None;
            }
            z[i] -= step;
            max_rel = max_rel.max(step.norm() / (1.0 + z[i].norm()));
        }
        if max_rel < 1e-15 || settled.iter().all(|s| *s) {
            converged = true;
            break;
        }
    }
    if !converged {
        // Multiple roots converge linearly; accept if the residuals are small.
        let scale: f64 = monic.iter().map(|c| c.norm()).sum();
        let ok = z.iter().all(|&zi| {
            let (p, _) = eval_with_derivative(&monic, zi);
            p.norm() <= 1e-10 * scale * (1.0 + zi.norm()).powi(n as i32)
        });
        if !ok {
            return None;
        }
    }
    Some(z)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn char_poly_of_2x2() {
        let a = DMatrix::from_row_slice(2, 2, &[c(1.0, 0.0), c(2.0, 0.0), c(2.0, 0.0), c(3.0, 0.0)]);
        let p = characteristic_polynomial(&a);
        // z^2 - 4 z - 1
        assert!((p[0] - c(-1.0, 0.0)).norm() < 1e-14);
        assert!((p[1] - c(-4.0, 0.0)).norm() < 1e-14);
        assert_eq!(p[2], c(1.0, 0.0));
    }

    #[test]
    fn roots_of_known_quartic() {
        let roots = [c(1.0, 0.5), c(-0.3, 0.0), c(0.2, -1.1), c(2.0, 2.0)];
        // expand prod (z - r)
        let mut p = vec![c(1.0, 0.0)];
        for r in roots {
            let mut q = vec![c(0.0, 0.0); p.len() + 1];
            for (k, pk) in p.iter().enumerate() {
                q[k + 1] += pk;
                q[k] -= pk * r;
            }
            p = q;
        }
        let found = polynomial_roots(&p).unwrap();
        for r in roots {
            let best = found.iter().map(|z| (z - r).norm()).fold(f64::INFINITY, f64::min);
            assert!(best < 1e-12, "{r} missing: {found:?}");
        }
    }

    #[test]
    fn double_root_is_accepted() {
        // (z - 1)^2 (z + 2)
        let p = vec![c(2.0, 0.0), c(-3.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)];
        let found = polynomial_roots(&p).unwrap();
        let near_one = found.iter().filter(|z| (*z - c(1.0, 0.0)).norm() < 1e-6).count();
        assert_eq!(near_one, 2);
    }
}
