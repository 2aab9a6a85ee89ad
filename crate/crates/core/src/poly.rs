//! Real polynomials and their roots.

use nalgebra::DMatrix;
use num_complex::Complex64;

/// Evaluate a real polynomial (ascending coefficients) with Horner's rule.
pub fn eval(coeffs: &[f64], x: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, &c| acc * x + c)
}

/// Evaluate a complex polynomial (ascending coefficients) at a complex point.
pub fn eval_complex(coeffs: &[Complex64], z: Complex64) -> Complex64 {
    coeffs
        .iter()
        .rev()
        .fold(Complex64::new(0.0, 0.0), |acc, &c| acc * z + c)
}

/// Drop trailing (highest-order) zero coefficients.
pub fn trim(coeffs: &[f64]) -> Vec<f64> {
    let mut v = coeffs.to_vec();
    while v.len() > 1 && v.last() == Some(&0.0) {
        v.pop();
    }
    v
}

/// Degree of a trimmed coefficient list; the zero polynomial has degree 0.
pub fn degree(coeffs: &[f64]) -> usize {
    trim(coeffs).len().saturating_sub(1)
}

/// Roots of a real polynomial from the eigenvalues of its companion matrix.
///
/// Leading zeros must already be trimmed. Roots at the origin are returned
/// exactly (factored out before the eigenproblem).
pub fn roots(coeffs: &[f64]) -> Vec<Complex64> {
    let c = trim(coeffs);
    let n = c.len() - 1;
    if n == 0 {
        return Vec::new();
    }
    let zeros_at_origin = c.iter().take_while(|&&x| x == 0.0).count();
    let mut out = vec![Complex64::new(0.0, 0.0); zeros_at_origin];
    let c = &c[zeros_at_origin..];
    let m = c.len() - 1;
    if m == 0 {
        return out;
    }
    let lead = c[m];
    if m == 1 {
        out.push(Complex64::new(-c[0] / lead, 0.0));
        return out;
    }
    let mut comp = DMatrix::<f64>::zeros(m, m);
    for i in 1..m {
        comp[(i, i - 1)] = 1.0;
    }
    for i in 0..m {
        comp[(i, m - 1)] = -c[i] / lead;
    }
    out.extend(comp.complex_eigenvalues().iter().copied());
    out
}

/// Multiply two complex polynomials (ascending coefficients).
pub fn mul_complex(a: &[Complex64], b: &[Complex64]) -> Vec<Complex64> {
    let mut out = vec![Complex64::new(0.0, 0.0); a.len() + b.len() - 1];
    for (i, &x) in a.iter().enumerate() {
        for (j, &y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

/// Build the monic real polynomial with the given roots (ascending coefficients).
///
/// Roots must be closed under conjugation; the tiny imaginary residue left by
/// rounding is discarded.
pub fn from_roots(roots: &[Complex64]) -> Vec<f64> {
    let mut p = vec![Complex64::new(1.0, 0.0)];
    for &r in roots {
        p = mul_complex(&p, &[-r, Complex64::new(1.0, 0.0)]);
    }
    p.iter().map(|c| c.re).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sorted_re(mut r: Vec<Complex64>) -> Vec<f64> {
        r.sort_by(|a, b| a.re.partial_cmp(&b.re).unwrap());
        r.iter().map(|c| c.re).collect()
    }

    #[test]
    fn horner_matches_direct() {
        let c = [1.0, -2.0, 0.5, 3.0];
        let x = 1.7_f64;
        let direct = 1.0 - 2.0 * x + 0.5 * x * x + 3.0 * x.powi(3);
        assert!((eval(&c, x) - direct).abs() < 1e-12);
    }

    #[test]
    fn roots_of_quadratic_and_cubic() {
        // (x-1)(x-2)(x+3) = x^3 - 7x + 6
        let r = sorted_re(roots(&[6.0, -7.0, 0.0, 1.0]));
        for (got, want) in r.iter().zip([-3.0, 1.0, 2.0]) {
            assert!((got - want).abs() < 1e-10);
        }
        // x^2 + 1
        let r = roots(&[1.0, 0.0, 1.0]);
        assert!(r.iter().all(|z| z.re.abs() < 1e-12 && (z.im.abs() - 1.0).abs() < 1e-12));
    }

    #[test]
    fn origin_roots_are_exact() {
        // x^2 (x + 4)
        let r = roots(&[0.0, 0.0, 4.0, 1.0]);
        assert_eq!(r.iter().filter(|z| z.norm() == 0.0).count(), 2);
        assert!(r.iter().any(|z| (z.re + 4.0).abs() < 1e-12));
    }

    #[test]
    fn from_roots_round_trip() {
        let p = [2.0, 3.0, 1.0];
        let r = roots(&p);
        let q = from_roots(&r);
        for (a, b) in p.iter().zip(q.iter()) {
            assert!((a - b).abs() < 1e-12);
        }
        assert_eq!(degree(&[1.0, 2.0, 0.0, 0.0]), 1);
    }
}
