use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::shock_positions;
use crate::error::{Error, Result};

/// A characteristic launched from `z₀ = x + iy` and its image `λ + iη` at
/// time `τ` (unit initial eigenvalue, square case).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CharacteristicPoint {
    pub x: f64,
    pub y: f64,
    pub tau: f64,
    pub lambda: f64,
    pub eta: f64,
}

fn lambda_of(x: f64, y: f64, t: f64) -> f64 {
    let q = x * x + y * y;
    2.0 * t * t * x * x / (q * q) + t * (t * (x - 1.0) + 2.0 * x) / q + 2.0 * t + x + 1.0
}

/// `η = y·Y(x, y)`.
fn y_factor(x: f64, y: f64, t: f64) -> f64 {
    let q = x * x + y * y;
    1.0 - 2.0 * t * t * x / (q * q) - (t + 2.0) * t / q
}

/// Real and imaginary parts of the image of `x + iy`.
pub fn characteristic_real_parts(x: f64, y: f64, tau: f64) -> CharacteristicPoint {
    CharacteristicPoint {
        x,
        y,
        tau,
        lambda: lambda_of(x, y, tau),
        eta: y * y_factor(x, y, tau),
    }
}

/// Jacobian of `(λ, Y)` with respect to `(x, y)`.
fn jacobian(x: f64, y: f64, t: f64) -> [[f64; 2]; 2] {
    let q = x * x + y * y;
    let (q2, q3) = (q * q, q * q * q);
    let t2 = t * t;
    let lin = t * (t * (x - 1.0) + 2.0 * x);
    let dl_dx = 4.0 * t2 * x / q2 - 8.0 * t2 * x * x * x / q3 + t * (t + 2.0) / q
        - 2.0 * x * lin / q2
        + 1.0;
    let dl_dy = -8.0 * t2 * x * x * y / q3 - 2.0 * y * lin / q2;
    let dy_dx = -2.0 * t2 / q2 + 8.0 * t2 * x * x / q3 + 2.0 * (t + 2.0) * t * x / q2;
    let dy_dy = 8.0 * t2 * x * y / q3 + 2.0 * (t + 2.0) * t * y / q2;
    [[dl_dx, dl_dy], [dy_dx, dy_dy]]
}

fn newton(lambda: f64, t: f64, mut x: f64, mut y: f64) -> Option<(f64, f64)> {
    let resid = |x: f64, y: f64| {
        let f1 = lambda_of(x, y, t) - lambda;
        let f2 = y_factor(x, y, t);
        (f1, f2, f1.hypot(f2))
    };
    let (mut f1, mut f2, mut norm) = resid(x, y);
    let tol = 1e-14 * (1.0 + lambda.abs() + t);
    for _ in 0..100 {
        if norm <= tol {
            return Some((x, y));
        }
        let j = jacobian(x, y, t);
        let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
        if det == 0.0 || !det.is_finite() {
            return None;
        }
        let dx = (f1 * j[1][1] - f2 * j[0][1]) / det;
        let dy = (j[0][0] * f2 - j[1][0] * f1) / det;
        let mut step = 1.0;
        let mut improved = false;
        for _ in 0..40 {
            let nx = x - step * dx;
            let mut ny = y - step * dy;
            if ny <= 0.0 {
                ny = 0.5 * y;
            }
            let (g1, g2, gn) = resid(nx, ny);
            if gn.is_finite() && gn < norm {
                x = nx;
                y = ny;
                f1 = g1;
                f2 = g2;
                norm = gn;
                improved = true;
                break;
            }
            step *= 0.5;
        }
        if !improved {
            // Stalled at the rounding floor: accept if already small.
            return (norm <= 1e3 * tol).then_some((x, y));
        }
    }
    (norm <= 1e3 * tol).then_some((x, y))
}

/// Density from the complex characteristic landing on `λ + i0⁺`.
///
/// Solves `λ(x, y) = λ`, `Y(x, y) = 0` for `y > 0` by damped Newton from a
/// grid of starts and returns `y / (π[(τ + x)² + y²])`. Points outside the
/// support from the edge solver have only real characteristics and give 0.
/// General `a` is reduced to `a = 1` via `(λ, τ) → (λ/a², τ/a²)`.
pub fn characteristics_density(tau: f64, a: f64, lambda: f64) -> Result<f64> {
    if !(a > 0.0) || !a.is_finite() {
        return Err(Error::Domain(format!(
            "characteristics density needs a > 0 for the rescaling, got {a}"
        )));
    }
    if !(tau > 0.0) || !tau.is_finite() {
        return Err(Error::InvalidParams(format!(
            "tau must be positive, got {tau}"
        )));
    }
    let a2 = a * a;
    let (t, l) = (tau / a2, lambda / a2);
    let front = shock_positions(t, 1.0)?;
    if !(l > front.lower && l < front.upper) {
        return Ok(0.0);
    }
    let s = 1.0 + t;
    let xs = [-1.5, -1.0, -0.6, -0.3, -0.1, 0.1, 0.3, 0.6, 1.0, 1.5];
    let ys = [0.05, 0.3, 1.0, 2.0];
    for &y0 in &ys {
        for &x0 in &xs {
            if let Some((x, y)) = newton(l, t, s * x0, s * y0) {
                if y > 0.0 {
                    let rho = y / (PI * ((t + x) * (t + x) + y * y));
                    return Ok(rho / a2);
                }
            }
        }
    }
    Err(Error::Numerical(format!(
        "no complex characteristic found for λ = {lambda} inside the support"
    )))
}
