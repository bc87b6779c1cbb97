use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::poly::real_cubic_roots;

/// `z(z₀)` along the characteristic launched from `z₀`; `G = 1/(rτ + z₀)`
/// is constant on it.
pub fn characteristic_map(z0: Complex64, tau: f64, r: f64, a: f64) -> Result<Complex64> {
    if z0 == Complex64::new(0.0, 0.0) {
        return Err(Error::Singular("characteristic map at z0 = 0".to_string()));
    }
    let u = z0 + r * tau;
    Ok(u * (1.0 + tau / z0 + u * (a * a) / (z0 * z0)))
}

/// The value of `G` carried by the characteristic from `z₀`.
pub fn characteristic_resolvent(z0: Complex64, tau: f64, r: f64) -> Complex64 {
    1.0 / (z0 + r * tau)
}

/// Critical points of the characteristic map and the spectral edges they
/// produce.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShockFront {
    pub tau: f64,
    pub a: f64,
    pub r: f64,
    /// Real roots of `z₀³ − rτ(τ + 2a²)z₀ − 2a²r²τ² = 0`, ascending, with multiplicity.
    pub z0c_roots: Vec<f64>,
    /// Image of each non-zero root under the characteristic map.
    pub edges: Vec<f64>,
    /// Support of the density: `[lower, upper]`.
    pub lower: f64,
    pub upper: f64,
    /// The lower edge has reached the origin (`τ = a²` at `r = 1`).
    pub critical: bool,
}

impl ShockFront {
    pub fn contains(&self, lambda: f64) -> bool {
        lambda >= self.lower && lambda <= self.upper
    }
}

/// Residual of the shock cubic at `w`.
pub fn shock_residual(w: f64, tau: f64, a: f64, r: f64) -> f64 {
    w * w * w - r * tau * (tau + 2.0 * a * a) * w - 2.0 * a * a * r * r * tau * tau
}

/// Edges at `r = 1`.
pub fn shock_positions(tau: f64, a: f64) -> Result<ShockFront> {
    shock_positions_general(tau, a, 1.0)
}

pub fn shock_positions_general(tau: f64, a: f64, r: f64) -> Result<ShockFront> {
    if !(tau > 0.0) || !tau.is_finite() || !(a >= 0.0) || !(r > 0.0 && r <= 1.0) {
        return Err(Error::InvalidParams(format!(
            "shock front needs tau > 0, a ≥ 0, r in (0, 1]; got tau={tau} a={a} r={r}"
        )));
    }
    let roots = real_cubic_roots(
        1.0,
        0.0,
        -r * tau * (tau + 2.0 * a * a),
        -2.0 * a * a * r * r * tau * tau,
    );
    let scale = tau + a * a;
    let mut edges = Vec::new();
    for &w in &roots {
        if w.abs() > 1e-12 * scale {
            edges.push(characteristic_map(Complex64::new(w, 0.0), tau, r, a)?.re);
        }
    }
    let mut sorted = edges.clone();
    sorted.sort_by(f64::total_cmp);
    let upper = *sorted.last().unwrap_or(&0.0);
    let inner = if r == 1.0 {
        // The cubic factors as (w + τ)(w² − τw − 2a²τ); w = −τ maps to 0 and
        // is a pole of G, so the inner edge comes from the quadratic factor.
        let w_minus = 0.5 * (tau - (tau * tau + 8.0 * a * a * tau).sqrt());
        if w_minus.abs() > 1e-12 * scale {
            characteristic_map(Complex64::new(w_minus, 0.0), tau, r, a)?.re
        } else {
            0.0
        }
    } else if sorted.len() >= 2 {
        sorted[sorted.len() - 2]
    } else {
        0.0
    };
    let tol = 1e-7 * scale;
    Ok(ShockFront {
        tau,
        a,
        r,
        z0c_roots: roots,
        edges,
        lower: inner.max(0.0),
        upper,
        critical: a > 0.0 && r == 1.0 && inner.abs() <= tol,
    })
}
