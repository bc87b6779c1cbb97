//! The hard-wall critical point `(z, τ) = (0, a²)`.
//!
//! Near it the averaged characteristic polynomial, rescaled as
//! `τ = a² + N^{−1/2}a²t`, `z = N^{−3/2}a²s`, `y = N^{−1/4}a u`, tends to
//!
//! ```text
//! Q_N ≈ 2 i^{−ν} (−a²)^N N^{(ν+1)/2} · s^{−ν/2} ∫₀^∞ u^{ν+1} e^{−u⁴/2 + u²t} I_ν(2iu√s) du
//! ```
//!
//! where the second factor is [`bessoid`]. All square roots and fractional
//! powers of `s` use the principal branch.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::charpoly::{q_integral_scaled, ACPContext, InitialPolynomial, Kernel};
use crate::error::{Error, Result};
use crate::poly::{complex_cubic_roots, cubic_discriminant, eval_complex};
use crate::specfun::{bessel_i, integrate_semiinfinite, QuadratureReport, QuadratureSpec};

/// Microscopic coordinates around the critical point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MicroCoordinates {
    pub s: Complex64,
    pub t: f64,
    pub nu: f64,
}

impl MicroCoordinates {
    pub fn new(s: Complex64, t: f64, nu: f64) -> Self {
        MicroCoordinates { s, t, nu }
    }

    fn validate(&self) -> Result<()> {
        if !(self.nu > -1.0) || !self.nu.is_finite() {
            return Err(Error::InvalidParams(format!(
                "nu must exceed −1, got {}",
                self.nu
            )));
        }
        if !(self.s.re.is_finite() && self.s.im.is_finite()) || !self.t.is_finite() {
            return Err(Error::InvalidParams(format!(
                "s and t must be finite: {self:?}"
            )));
        }
        Ok(())
    }

    /// Comparisons against finite `N` need `s` off the positive real axis.
    fn require_off_axis(&self) -> Result<()> {
        if self.s.im == 0.0 && self.s.re >= 0.0 {
            return Err(Error::Domain(format!(
                "arg s must be non-zero, got s = {}",
                self.s
            )));
        }
        Ok(())
    }
}

/// The three saddle points of the `y` integral.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SaddleSet {
    pub roots: [Complex64; 3],
    /// All pairwise distances are at most `1e−6`.
    pub merged: bool,
    /// Discriminant of the cubic.
    pub discriminant: Complex64,
}

impl SaddleSet {
    pub fn max_pairwise_distance(&self) -> f64 {
        let r = &self.roots;
        (r[0] - r[1])
            .norm()
            .max((r[0] - r[2]).norm())
            .max((r[1] - r[2]).norm())
    }
}

/// Coefficients (ascending) of `y(a² + y²) − i√z(a² + y²) − τy`.
pub fn saddle_cubic(z: Complex64, tau: f64, a: f64) -> [Complex64; 4] {
    let iz = Complex64::i() * z.sqrt();
    let a2 = a * a;
    [
        -iz * a2,
        Complex64::new(a2 - tau, 0.0),
        -iz,
        Complex64::new(1.0, 0.0),
    ]
}

/// Solutions of `y − i√z − τy/(a² + y²) = 0`.
pub fn saddle_points(z: Complex64, tau: f64, a: f64) -> Result<SaddleSet> {
    if !(a > 0.0) || !a.is_finite() || !tau.is_finite() {
        return Err(Error::InvalidParams(format!(
            "saddle points need a > 0, got a={a} tau={tau}"
        )));
    }
    let c = saddle_cubic(z, tau, a);
    let found = complex_cubic_roots(c[3], c[2], c[1], c[0]);
    let roots = [found[0], found[1], found[2]];
    let mut set = SaddleSet {
        roots,
        merged: false,
        discriminant: cubic_discriminant(c[3], c[2], c[1], c[0]),
    };
    set.merged = set.max_pairwise_distance() <= 1e-6;
    Ok(set)
}

/// `|cubic(y)|` at a claimed saddle point.
pub fn saddle_residual(y: Complex64, z: Complex64, tau: f64, a: f64) -> f64 {
    eval_complex(&saddle_cubic(z, tau, a), y).norm()
}

fn bessoid_spec() -> QuadratureSpec {
    QuadratureSpec {
        rel_tol: 1e-12,
        abs_tol: 1e-15,
        max_panels: 4000,
        decay_hint: 0.5,
    }
}

/// `∫₀^∞ u^{ν+1} e^{−u⁴/2 + u²t} I_ν(2iu√s) du` with its quadrature report,
/// using `spec`.
pub fn bessoid_integral_with(
    mc: &MicroCoordinates,
    spec: &QuadratureSpec,
) -> Result<QuadratureReport> {
    mc.validate()?;
    let x_unit = Complex64::i() * 2.0 * mc.s.sqrt();
    let nu = mc.nu;
    let t = mc.t;
    let f = |u: f64| {
        if u == 0.0 {
            // u^{ν+1} I_ν(·) ∝ u^{2ν+1} → 0 for ν > −1/2; the endpoint is never sampled by Kronrod.
            return Complex64::new(0.0, 0.0);
        }
        match bessel_i(nu, x_unit * u) {
            Ok(b) => {
                let lw = (nu + 1.0) * u.ln() - 0.5 * u.powi(4) + u * u * t + b.log_scale;
                b.mantissa * lw.exp()
            }
            Err(_) => Complex64::new(f64::NAN, f64::NAN),
        }
    };
    integrate_semiinfinite(f, spec)
}

/// The integral factor of [`bessoid`], without `s^{−ν/2}`.
pub fn bessoid_integral(mc: &MicroCoordinates) -> Result<Complex64> {
    Ok(bessoid_integral_with(mc, &bessoid_spec())?.value)
}

/// `s^{−ν/2} ∫₀^∞ u^{ν+1} e^{−u⁴/2 + u²t} I_ν(2iu√s) du`.
pub fn bessoid(mc: &MicroCoordinates) -> Result<Complex64> {
    Ok(bessoid_prefactor(mc) * bessoid_integral(mc)?)
}

/// Same as [`bessoid`], also returning the absolute error bound.
pub fn bessoid_with_error(
    mc: &MicroCoordinates,
    spec: &QuadratureSpec,
) -> Result<(Complex64, f64)> {
    let rep = bessoid_integral_with(mc, spec)?;
    let p = bessoid_prefactor(mc);
    Ok((p * rep.value, p.norm() * rep.error_bound))
}

fn bessoid_prefactor(mc: &MicroCoordinates) -> Complex64 {
    if mc.nu == 0.0 {
        Complex64::new(1.0, 0.0)
    } else {
        mc.s.powf(-0.5 * mc.nu)
    }
}

/// `(iπ)^{−1/2} s^{−1/4} ∫₀^∞ e^{−u⁴/2 + u²t} cos(2u√s) du`.
///
/// Equals [`bessoid_integral`] at `ν = −1/2`, i.e. `s^{−1/4}` times
/// [`bessoid`] there.
pub fn symmetric_pearcey(s: Complex64, t: f64) -> Result<Complex64> {
    if s == Complex64::new(0.0, 0.0) {
        return Err(Error::Singular(
            "symmetric Pearcey prefactor at s = 0".to_string(),
        ));
    }
    let k = 2.0 * s.sqrt();
    let f = |u: f64| (k * u).cos() * (-0.5 * u.powi(4) + u * u * t).exp();
    let rep = integrate_semiinfinite(f, &bessoid_spec())?;
    let pref = (Complex64::i() * PI).powf(-0.5) * s.powf(-0.25);
    Ok(pref * rep.value)
}

/// Optical Bessoid of order zero, `∫₀^∞ u e^{iu⁴ + iu²y} I₀(iux) du`, on the
/// rotated contour `u = r e^{iπ/8}`, along which `iu⁴ = −r⁴`.
pub fn optical_bessoid(x: f64, y: f64) -> Result<Complex64> {
    let rot = Complex64::from_polar(1.0, PI / 8.0);
    let f = |r: f64| {
        let u = rot * r;
        match bessel_i(0.0, Complex64::i() * x * u) {
            Ok(b) => {
                let e = Complex64::i() * y * u * u - r.powi(4) + b.log_scale;
                b.mantissa * e.exp() * u * rot
            }
            Err(_) => Complex64::new(f64::NAN, f64::NAN),
        }
    };
    let spec = QuadratureSpec {
        decay_hint: 1.0,
        ..bessoid_spec()
    };
    Ok(integrate_semiinfinite(f, &spec)?.value)
}

/// `(z, τ) = (N^{−3/2}a²s, a² + N^{−1/2}a²t)`.
pub fn scaling_map(n: usize, a: f64, mc: &MicroCoordinates) -> Result<(Complex64, f64)> {
    if n < 1 {
        return Err(Error::InvalidParams("N must be at least 1".to_string()));
    }
    let nf = n as f64;
    let a2 = a * a;
    Ok((mc.s * (a2 * nf.powf(-1.5)), a2 + a2 * mc.t / nf.sqrt()))
}

/// How the finite-N value is compared with the limit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ComparatorMode {
    /// `Q_N / (2i^{−ν}(−a²)^N N^{(ν+1)/2})` against `bessoid(s)`.
    Absolute,
    /// `Q_N(s)/Q_N(s_ref)` against `bessoid(s)/bessoid(s_ref)`.
    Ratio { s_ref: Complex64 },
}

/// `ln` of `Q_N` at the rescaled point, returned as a complex logarithm.
fn ln_q_rescaled(
    n: usize,
    a: f64,
    s: Complex64,
    mc: &MicroCoordinates,
    ctx: &ACPContext,
) -> Result<Complex64> {
    let at = MicroCoordinates { s, ..*mc };
    let (z, tau) = scaling_map(n, a, &at)?;
    let ctx_n = ACPContext {
        n,
        nu: mc.nu,
        init: InitialPolynomial::power(a, n),
        quad: ctx.quad,
    };
    Ok(q_integral_scaled(&ctx_n, z, tau, Kernel::Complex)?
        .value
        .ln())
}

/// Relative deviation of the rescaled finite-N polynomial from the Bessoid
/// limit, for each `N` in `n_list`. `ν` is taken from `ctx`.
pub fn convergence_comparator(
    n_list: &[usize],
    a: f64,
    mc: &MicroCoordinates,
    ctx: &ACPContext,
    mode: ComparatorMode,
) -> Result<Vec<(usize, f64)>> {
    if mc.nu != ctx.nu {
        return Err(Error::InvalidParams(format!(
            "micro coordinates carry nu = {}, context has {}",
            mc.nu, ctx.nu
        )));
    }
    if !(a > 0.0) {
        return Err(Error::InvalidParams(format!("a must be positive, got {a}")));
    }
    mc.validate()?;
    mc.require_off_axis()?;
    let limit = bessoid(mc)?;
    let nu = mc.nu;
    match mode {
        ComparatorMode::Absolute => n_list
            .par_iter()
            .map(|&n| {
                let lq = ln_q_rescaled(n, a, mc.s, mc, ctx)?;
                // ln(2 i^{−ν} (−a²)^N N^{(ν+1)/2}); the sign (−1)^N is exact for integer N.
                let nf = n as f64;
                let ln_pref = Complex64::new(
                    2f64.ln() + nf * (a * a).ln() + 0.5 * (nu + 1.0) * nf.ln(),
                    -0.5 * PI * nu + if n % 2 == 1 { PI } else { 0.0 },
                );
                let rescaled = (lq - ln_pref).exp();
                Ok((n, (rescaled - limit).norm() / limit.norm()))
            })
            .collect(),
        ComparatorMode::Ratio { s_ref } => {
            let ref_mc = MicroCoordinates { s: s_ref, ..*mc };
            ref_mc.require_off_axis()?;
            let want = limit / bessoid(&ref_mc)?;
            n_list
                .par_iter()
                .map(|&n| {
                    let lq = ln_q_rescaled(n, a, mc.s, mc, ctx)?;
                    let lr = ln_q_rescaled(n, a, s_ref, mc, ctx)?;
                    let got = (lq - lr).exp();
                    Ok((n, (got - want).norm() / want.norm()))
                })
                .collect()
        }
    }
}

/// Strictly decreasing deviations with the last at most `tol`.
pub fn check_convergence(deviations: &[(usize, f64)], tol: f64) -> Result<()> {
    for w in deviations.windows(2) {
        if !(w[1].1 < w[0].1) {
            return Err(Error::ScalingViolation(format!(
                "deviation does not decrease from N={} ({:.3e}) to N={} ({:.3e})",
                w[0].0, w[0].1, w[1].0, w[1].1
            )));
        }
    }
    match deviations.last() {
        Some(&(_, d)) if d <= tol => Ok(()),
        Some(&(n, d)) => Err(Error::ScalingViolation(format!(
            "deviation {d:.3e} at N={n} exceeds {tol}"
        ))),
        None => Err(Error::InvalidParams("empty N list".to_string())),
    }
}
