//! Closed-form cubic solvers with Newton polishing.

use std::f64::consts::PI;

use num_complex::Complex64;

/// Evaluates `Σ coeffs[k] x^k` (ascending order) by Horner's rule.
pub fn eval_complex(coeffs: &[Complex64], x: Complex64) -> Complex64 {
    coeffs
        .iter()
        .rev()
        .fold(Complex64::new(0.0, 0.0), |acc, &c| acc * x + c)
}

fn polish_complex(coeffs: &[Complex64; 4], mut x: Complex64) -> Complex64 {
    let deriv = [coeffs[1], coeffs[2] * 2.0, coeffs[3] * 3.0];
    let mut res = eval_complex(coeffs, x).norm();
    for _ in 0..4 {
        let d = eval_complex(&deriv, x);
        if d.norm() == 0.0 {
            break;
        }
        let next = x - eval_complex(coeffs, x) / d;
        let r = eval_complex(coeffs, next).norm();
        if !(r < res) {
            break;
        }
        x = next;
        res = r;
    }
    x
}

/// Roots of `c3·x³ + c2·x² + c1·x + c0`, with multiplicity.
///
/// Falls back to the quadratic (or linear) formula when `c3` vanishes, so the
/// result can hold fewer than three roots.
pub fn complex_cubic_roots(
    c3: Complex64,
    c2: Complex64,
    c1: Complex64,
    c0: Complex64,
) -> Vec<Complex64> {
    let zero = Complex64::new(0.0, 0.0);
    if c3 == zero {
        return complex_quadratic_roots(c2, c1, c0);
    }
    let b = c2 / c3;
    let c = c1 / c3;
    let d = c0 / c3;
    let p = c - b * b / 3.0;
    let q = b * b * b * (2.0 / 27.0) - b * c / 3.0 + d;
    let shift = -b / 3.0;
    let t: [Complex64; 3] = if p == zero && q == zero {
        [zero; 3]
    } else {
        let disc = (q * 0.5) * (q * 0.5) + (p / 3.0) * (p / 3.0) * (p / 3.0);
        let sq = disc.sqrt();
        let a1 = -q * 0.5 + sq;
        let a2 = -q * 0.5 - sq;
        let big = if a1.norm() >= a2.norm() { a1 } else { a2 };
        let u = big.powf(1.0 / 3.0);
        let omega = Complex64::from_polar(1.0, 2.0 * PI / 3.0);
        let mut out = [zero; 3];
        let mut uk = u;
        for slot in out.iter_mut() {
            *slot = if uk == zero {
                zero
            } else {
                uk - p / (uk * 3.0)
            };
            uk *= omega;
        }
        out
    };
    let coeffs = [c0, c1, c2, c3];
    t.iter()
        .map(|&ti| polish_complex(&coeffs, ti + shift))
        .collect()
}

pub fn complex_quadratic_roots(a: Complex64, b: Complex64, c: Complex64) -> Vec<Complex64> {
    let zero = Complex64::new(0.0, 0.0);
    if a == zero {
        if b == zero {
            return Vec::new();
        }
        return vec![-c / b];
    }
    let disc = (b * b - a * c * 4.0).sqrt();
    // Pick the sign that avoids cancellation.
    let s = if (b.conj() * disc).re >= 0.0 {
        b + disc
    } else {
        b - disc
    };
    if s == zero {
        return vec![zero, zero];
    }
    let r1 = -s / (a * 2.0);
    let r2 = -(c * 2.0) / s;
    vec![r1, r2]
}

/// Discriminant of `c3·x³ + c2·x² + c1·x + c0`.
pub fn cubic_discriminant(c3: Complex64, c2: Complex64, c1: Complex64, c0: Complex64) -> Complex64 {
    c2 * c2 * c1 * c1 - c3 * c1 * c1 * c1 * 4.0 - c2 * c2 * c2 * c0 * 4.0 - c3 * c3 * c0 * c0 * 27.0
        + c3 * c2 * c1 * c0 * 18.0
}

fn eval_real(c: &[f64; 4], x: f64) -> f64 {
    ((c[3] * x + c[2]) * x + c[1]) * x + c[0]
}

fn polish_real(c: &[f64; 4], mut x: f64) -> f64 {
    let mut res = eval_real(c, x).abs();
    for _ in 0..4 {
        let d = (3.0 * c[3] * x + 2.0 * c[2]) * x + c[1];
        if d == 0.0 {
            break;
        }
        let next = x - eval_real(c, x) / d;
        let r = eval_real(c, next).abs();
        if !(r < res) {
            break;
        }
        x = next;
        res = r;
    }
    x
}

/// Real roots of a real cubic `a·x³ + b·x² + c·x + d` (`a ≠ 0`), sorted
/// ascending, repeated according to multiplicity when three are real.
///
/// Trigonometric form when all roots are real, Cardano otherwise.
pub fn real_cubic_roots(a: f64, b: f64, c: f64, d: f64) -> Vec<f64> {
    assert!(a != 0.0, "leading coefficient must be non-zero");
    let (b0, c0, d0) = (b / a, c / a, d / a);
    let p = c0 - b0 * b0 / 3.0;
    let q = 2.0 * b0 * b0 * b0 / 27.0 - b0 * c0 / 3.0 + d0;
    let shift = -b0 / 3.0;
    let disc = (q / 2.0).powi(2) + (p / 3.0).powi(3);
    let mut roots = if p == 0.0 {
        vec![(-q).cbrt()]
    } else if disc <= 0.0 {
        let m = 2.0 * (-p / 3.0).sqrt();
        let arg = (3.0 * q / (2.0 * p) * (-3.0 / p).sqrt()).clamp(-1.0, 1.0);
        let theta = arg.acos() / 3.0;
        (0..3)
            .map(|k| m * (theta - 2.0 * PI * k as f64 / 3.0).cos())
            .collect()
    } else {
        let s = disc.sqrt();
        vec![(-q / 2.0 + s).cbrt() + (-q / 2.0 - s).cbrt()]
    };
    let coeffs = [d, c, b, a];
    for r in roots.iter_mut() {
        *r = polish_real(&coeffs, *r + shift);
    }
    roots.sort_by(f64::total_cmp);
    roots
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn complex_roots_of_known_product() {
        let r = [c(1.0, 2.0), c(-0.5, 0.1), c(3.0, -1.0)];
        // expand (x-r0)(x-r1)(x-r2)
        let e1 = r[0] + r[1] + r[2];
        let e2 = r[0] * r[1] + r[0] * r[2] + r[1] * r[2];
        let e3 = r[0] * r[1] * r[2];
        let got = complex_cubic_roots(c(2.0, 0.0), -e1 * 2.0, e2 * 2.0, -e3 * 2.0);
        for want in r {
            assert!(
                got.iter().any(|g| (g - want).norm() < 1e-12),
                "{want} not in {got:?}"
            );
        }
    }

    #[test]
    fn triple_root_is_exact() {
        let got = complex_cubic_roots(c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(0.0, 0.0));
        assert!(got.iter().all(|g| g.norm() == 0.0));
    }

    #[test]
    fn degenerate_leading_coefficient() {
        let got = complex_cubic_roots(c(0.0, 0.0), c(1.0, 0.0), c(-3.0, 0.0), c(2.0, 0.0));
        assert_eq!(got.len(), 2);
        assert!(got.iter().any(|g| (g - c(1.0, 0.0)).norm() < 1e-14));
        assert!(got.iter().any(|g| (g - c(2.0, 0.0)).norm() < 1e-14));
    }

    #[test]
    fn real_trig_branch_with_double_root() {
        // x³ − 3x − 2 = (x−2)(x+1)²
        let r = real_cubic_roots(1.0, 0.0, -3.0, -2.0);
        assert_eq!(r.len(), 3);
        assert!((r[0] + 1.0).abs() < 1e-7 && (r[1] + 1.0).abs() < 1e-7);
        assert!((r[2] - 2.0).abs() < 1e-14);
        for x in r {
            assert!(eval_real(&[-2.0, -3.0, 0.0, 1.0], x).abs() < 1e-10);
        }
    }

    #[test]
    fn real_single_root_branch() {
        // x³ + x + 1 has one real root ≈ −0.6823278038
        let r = real_cubic_roots(1.0, 0.0, 1.0, 1.0);
        assert_eq!(r.len(), 1);
        assert!((r[0] + 0.682_327_803_828_019_3).abs() < 1e-14);
    }

    #[test]
    fn discriminant_vanishes_on_repeated_roots() {
        let d = cubic_discriminant(c(1.0, 0.0), c(0.0, 0.0), c(-3.0, 0.0), c(-2.0, 0.0));
        assert!(d.norm() < 1e-12);
        let d = cubic_discriminant(c(1.0, 0.0), c(0.0, 0.0), c(1.0, 0.0), c(1.0, 0.0));
        assert!(d.norm() > 1.0);
    }
}
