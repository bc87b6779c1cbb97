//! Averaged characteristic polynomial `Q(z, τ) = ⟨det(z − L)⟩` at finite `N`.
//!
//! `Q` solves `∂τQ = −(1/M) z ∂²zQ − ((ν+1)/M) ∂zQ` and has the integral form
//!
//! ```text
//! Q = i^{−ν} 2M τ^{−1} z^{−ν/2} ∫₀^∞ y^{ν+1} e^{M(z−y²)/τ} I_ν(2iMy√z/τ) Q₀(−y²) dy
//! ```
//!
//! For real `z` the kernel is rewritten with the entire real function
//! `Σ w^k/(k!Γ(k+ν+1))`, which makes the integrand manifestly real. Both
//! paths combine every exponential in log space before exponentiating.
//!
//! Since the PDE maps polynomials of degree `N` to themselves, the solution
//! can also be obtained exactly by evolving coefficients; that is the
//! independent oracle used in tests (Laguerre polynomials when `a = 0`).

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::diffusion::EnsembleParams;
use crate::error::{Error, Result};
use crate::specfun::{
    bessel_i_reduced_real, bessel_i_scaled, integrate_interval, QuadratureSpec, ScaledComplex,
};

/// Monic initial polynomial `Π (z − root)^mult`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InitialPolynomial {
    pub roots: Vec<(Complex64, usize)>,
}

impl InitialPolynomial {
    /// `(z − a²)^n`, the ensemble started at `L = a²·Id`.
    pub fn power(a: f64, n: usize) -> Self {
        InitialPolynomial {
            roots: vec![(Complex64::new(a * a, 0.0), n)],
        }
    }

    pub fn new(roots: Vec<(Complex64, usize)>) -> Result<Self> {
        let p = InitialPolynomial { roots };
        p.validate()?;
        Ok(p)
    }

    pub fn degree(&self) -> usize {
        self.roots.iter().map(|r| r.1).sum()
    }

    /// Roots must come in conjugate pairs with equal multiplicity.
    pub fn validate(&self) -> Result<()> {
        for &(r, m) in &self.roots {
            if !(r.re.is_finite() && r.im.is_finite()) {
                return Err(Error::InvalidParams(format!("non-finite root {r}")));
            }
            if r.im != 0.0 {
                let partner: usize = self
                    .roots
                    .iter()
                    .filter(|(s, _)| (*s - r.conj()).norm() <= 1e-14 * (1.0 + r.norm()))
                    .map(|s| s.1)
                    .sum();
                if partner != m {
                    return Err(Error::InvalidParams(format!(
                        "root {r} has no conjugate partner of multiplicity {m}"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn eval(&self, z: Complex64) -> Complex64 {
        self.roots
            .iter()
            .fold(Complex64::new(1.0, 0.0), |acc, &(r, m)| {
                acc * (z - r).powu(m as u32)
            })
    }

    /// `ln Q₀(z)` on any branch; only its exponential is used.
    pub fn ln_eval(&self, z: Complex64) -> Complex64 {
        self.roots
            .iter()
            .map(|&(r, m)| (z - r).ln() * m as f64)
            .sum()
    }

    /// Monomial coefficients `c₀ … c_N`.
    pub fn coefficients(&self) -> Vec<Complex64> {
        let mut c = vec![Complex64::new(1.0, 0.0)];
        for &(r, m) in &self.roots {
            for _ in 0..m {
                let mut next = vec![Complex64::new(0.0, 0.0); c.len() + 1];
                for (k, &ck) in c.iter().enumerate() {
                    next[k + 1] += ck;
                    next[k] -= ck * r;
                }
                c = next;
            }
        }
        c
    }

    /// Evaluation on the negative real axis never hits a root, which keeps
    /// the integrand's logarithm finite.
    fn avoids_negative_axis(&self) -> bool {
        self.roots.iter().all(|(r, _)| !(r.im == 0.0 && r.re < 0.0))
    }
}

/// Everything `q_integral` needs besides the evaluation point.
#[derive(Debug, Clone, PartialEq)]
pub struct ACPContext {
    pub n: usize,
    /// `ν = M − N`; the integral accepts any real `ν > −1`.
    pub nu: f64,
    pub init: InitialPolynomial,
    pub quad: QuadratureSpec,
}

impl ACPContext {
    pub fn new(n: usize, nu: f64, init: InitialPolynomial, quad: QuadratureSpec) -> Result<Self> {
        let ctx = ACPContext { n, nu, init, quad };
        ctx.validate()?;
        Ok(ctx)
    }

    /// Context for `Q₀ = (z − a²)^N` with the ensemble's `N` and `ν`.
    pub fn from_params(params: &EnsembleParams) -> Self {
        ACPContext {
            n: params.n,
            nu: params.nu() as f64,
            init: InitialPolynomial::power(params.a, params.n),
            quad: QuadratureSpec::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.nu > -1.0) || !self.nu.is_finite() {
            return Err(Error::InvalidParams(format!(
                "nu must exceed −1, got {}",
                self.nu
            )));
        }
        if self.init.degree() != self.n {
            return Err(Error::InvalidParams(format!(
                "initial polynomial has degree {}, expected N = {}",
                self.init.degree(),
                self.n
            )));
        }
        self.init.validate()?;
        self.quad.validate()
    }

    /// `M = N + ν`.
    pub fn m(&self) -> f64 {
        self.n as f64 + self.nu
    }
}

/// `Q` together with the diagnostics of its quadrature.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QEvaluation {
    pub value: ScaledComplex,
    /// Error bound relative to `|value|`.
    pub rel_error: f64,
    /// `log10(∫|f| / |∫f|)`: decimal digits lost to cancellation.
    pub digits_lost: f64,
}

/// Give up once rounding noise exceeds this fraction of the result.
const MAX_NOISE: f64 = 1e-6;

/// Kernel choice for [`q_integral_scaled`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kernel {
    /// `i^{−ν} z^{−ν/2} I_ν(2iMy√z/τ)` at complex argument.
    Complex,
    /// `(My/τ)^ν Σ (−M²y²z/τ²)^k/(k!Γ(k+ν+1))`; requires real `z`.
    Real,
}

/// `ln` of the integrand without its constant prefactor.
fn log_integrand(
    ctx: &ACPContext,
    z: Complex64,
    tau: f64,
    y: f64,
    kernel: Kernel,
) -> Result<Complex64> {
    let m = ctx.m();
    let nu = ctx.nu;
    let gauss = (z - y * y) * (m / tau);
    let init = ctx.init.ln_eval(Complex64::new(-y * y, 0.0));
    let kern = match kernel {
        Kernel::Complex => {
            let x = Complex64::new(0.0, 2.0 * m * y / tau) * z.sqrt();
            let b = bessel_i_scaled(nu, x)?;
            b.mantissa.ln() + b.log_scale + (nu + 1.0) * y.ln()
        }
        Kernel::Real => {
            let w = -(m * y / tau).powi(2) * z.re;
            let b = bessel_i_reduced_real(nu, w)?;
            b.mantissa.ln() + b.log_scale + (2.0 * nu + 1.0) * y.ln()
        }
    };
    Ok(gauss + init + kern)
}

fn log_prefactor(ctx: &ACPContext, z: Complex64, tau: f64, kernel: Kernel) -> Complex64 {
    let m = ctx.m();
    let nu = ctx.nu;
    let base = Complex64::new((2.0 * m / tau).ln(), 0.0);
    match kernel {
        Kernel::Complex => base + Complex64::new(0.0, -0.5 * PI * nu) - z.ln() * (0.5 * nu),
        Kernel::Real => base + nu * (m / tau).ln(),
    }
}

/// `Q(z, τ)` as a scaled value, with quadrature diagnostics.
///
/// The integrand is first probed on a grid of spacing `√(τ/M)/2` to locate
/// its peak and the range where it lies within `e^{−60}` of it; those probe
/// intervals become the initial panels. Results whose rounding noise would
/// exceed `1e−6` of the value are refused with `IllConditioned` (this is the
/// case for real `z > 0` once `Mz/τ` is large).
pub fn q_integral_scaled(
    ctx: &ACPContext,
    z: Complex64,
    tau: f64,
    kernel: Kernel,
) -> Result<QEvaluation> {
    ctx.validate()?;
    if !(tau > 0.0) || !tau.is_finite() {
        return Err(Error::InvalidParams(format!(
            "tau must be positive, got {tau}"
        )));
    }
    if !(z.re.is_finite() && z.im.is_finite()) {
        return Err(Error::InvalidParams(format!("z must be finite, got {z}")));
    }
    if kernel == Kernel::Real && z.im != 0.0 {
        return Err(Error::Domain(format!("real kernel needs real z, got {z}")));
    }
    if !ctx.init.avoids_negative_axis() {
        return Err(Error::Domain(
            "initial roots on the negative real axis make the integrand vanish".to_string(),
        ));
    }
    let m = ctx.m();
    let h = 0.5 * (tau / m).sqrt();
    let reach = 2.0 * z.norm().sqrt() + 10.0 * (tau * (ctx.m() + ctx.n as f64 + 1.0) / m).sqrt();
    let mut probes: Vec<(f64, f64)> = Vec::new();
    let mut peak = f64::NEG_INFINITY;
    let mut k = 1usize;
    loop {
        let y = h * k as f64;
        let l = log_integrand(ctx, z, tau, y, kernel)?.re;
        if l.is_finite() {
            peak = peak.max(l);
        }
        probes.push((y, l));
        if (y > reach && l < peak - 60.0) || k > 200_000 {
            break;
        }
        k += 1;
    }
    if !peak.is_finite() {
        return Err(Error::Numerical(
            "integrand vanishes on the probe grid".to_string(),
        ));
    }
    let cut = peak - 60.0;
    let first = probes.iter().position(|p| p.1 >= cut).unwrap();
    let last = probes.iter().rposition(|p| p.1 >= cut).unwrap();
    let mut breaks = vec![if first <= 1 { 0.0 } else { probes[first - 1].0 }];
    for p in &probes[first..=last] {
        if p.0 > breaks[breaks.len() - 1] {
            breaks.push(p.0);
        }
    }
    let end = probes
        .get(last + 1)
        .map(|p| p.0)
        .unwrap_or(probes[last].0 + h);
    breaks.push(end);

    let f = |y: f64| match log_integrand(ctx, z, tau, y, kernel) {
        Ok(l) => {
            let s = l - peak;
            if s.re < -745.0 {
                Complex64::new(0.0, 0.0)
            } else {
                Complex64::from_polar(s.re.exp(), s.im)
            }
        }
        Err(_) => Complex64::new(f64::NAN, f64::NAN),
    };
    // Large exponents cancel inside the log integrand; its relative noise is
    // about ε times their size, and no tolerance below that is reachable.
    let y_peak = probes
        .iter()
        .max_by(|p, q| p.1.total_cmp(&q.1))
        .map(|p| p.0)
        .unwrap();
    let exponent_noise = 20.0 * f64::EPSILON * 2.0 * (m / tau) * (z.norm() + y_peak * y_peak);
    let spec = QuadratureSpec {
        max_panels: ctx.quad.max_panels.max(4 * breaks.len()),
        rel_tol: ctx.quad.rel_tol.max(exponent_noise),
        ..ctx.quad
    };
    let rep = match integrate_interval(f, &breaks, &spec) {
        Ok(rep) => rep,
        Err(err) => {
            // Pure rounding noise never converges; report it as such.
            if let Error::Convergence { estimate, .. } = &err {
                let abs_probe: f64 = probes.iter().map(|p| (p.1 - peak).exp()).sum::<f64>() * h;
                let ratio = abs_probe / estimate.norm();
                if !(f64::EPSILON * ratio <= MAX_NOISE) {
                    return Err(Error::IllConditioned {
                        digits_lost: ratio.log10(),
                    });
                }
            }
            return Err(err);
        }
    };
    let size = rep.value.norm();
    let ratio = rep.abs_integral / size;
    if !(size > 0.0) || f64::EPSILON * ratio > MAX_NOISE {
        return Err(Error::IllConditioned {
            digits_lost: ratio.log10(),
        });
    }
    let mut value =
        ScaledComplex::from_log(log_prefactor(ctx, z, tau, kernel) + peak).scale(rep.value);
    if kernel == Kernel::Real && ctx.init.roots.iter().all(|r| r.0.im == 0.0) {
        value.mantissa.im = 0.0;
    }
    Ok(QEvaluation {
        value: value.normalized(),
        rel_error: rep.error_bound / size + f64::EPSILON * ratio + exponent_noise,
        digits_lost: ratio.log10().max(0.0),
    })
}

/// `Q(z, τ)`: the real kernel on the real axis, the complex one elsewhere.
pub fn q_integral(ctx: &ACPContext, z: Complex64, tau: f64) -> Result<Complex64> {
    let kernel = if z.im == 0.0 {
        Kernel::Real
    } else {
        Kernel::Complex
    };
    let v = q_integral_scaled(ctx, z, tau, kernel)?.value;
    let out = v.to_complex();
    if !(out.re.is_finite() && out.im.is_finite()) {
        return Err(Error::Numerical(format!(
            "Q overflows f64 (ln|Q| = {}); use q_integral_scaled",
            v.ln_abs()
        )));
    }
    Ok(out)
}

/// `|Q_complex − Q_real|` at real `z > 0`.
pub fn real_kernel_identity_check(ctx: &ACPContext, z: f64, tau: f64) -> Result<f64> {
    if !(z > 0.0) {
        return Err(Error::InvalidParams(format!("z must be positive, got {z}")));
    }
    let zc = Complex64::new(z, 0.0);
    let a = q_integral_scaled(ctx, zc, tau, Kernel::Complex)?
        .value
        .to_complex();
    let b = q_integral_scaled(ctx, zc, tau, Kernel::Real)?
        .value
        .to_complex();
    Ok((a - b).norm())
}

/// Coefficients of the solution at time `τ`, from those at time 0.
///
/// The PDE acts on `Σ c_k z^k` as `dc_{k−1}/dτ = −k(k+ν)c_k / M`, a nilpotent
/// map, so `exp(τA)` is a finite sum.
pub fn evolve_coefficients(c0: &[Complex64], nu: f64, m: f64, tau: f64) -> Vec<Complex64> {
    let mut out = c0.to_vec();
    let mut term = c0.to_vec();
    for j in 1..c0.len() {
        let mut next = vec![Complex64::new(0.0, 0.0); c0.len()];
        for k in 1..term.len() {
            let kf = k as f64;
            next[k - 1] = term[k] * (-kf * (kf + nu) / m * tau / j as f64);
        }
        term = next;
        for (o, t) in out.iter_mut().zip(&term) {
            *o += t;
        }
    }
    out
}

fn horner(c: &[Complex64], z: Complex64) -> Complex64 {
    c.iter()
        .rev()
        .fold(Complex64::new(0.0, 0.0), |acc, &ck| acc * z + ck)
}

/// Exact polynomial solution for the context's initial condition.
pub fn polynomial_reference(ctx: &ACPContext, z: Complex64, tau: f64) -> Complex64 {
    let c = evolve_coefficients(&ctx.init.coefficients(), ctx.nu, ctx.m(), tau);
    horner(&c, z)
}

/// Time-dependent monic Laguerre polynomial: the solution from `Q₀ = z^N`.
pub fn laguerre_reference(n: usize, nu: usize, z: Complex64, tau: f64) -> Complex64 {
    let mut c = vec![Complex64::new(0.0, 0.0); n + 1];
    c[n] = Complex64::new(1.0, 0.0);
    let c = evolve_coefficients(&c, nu as f64, (n + nu) as f64, tau);
    horner(&c, z)
}

/// [`laguerre_reference`] for a context, which must start from `z^N`.
pub fn laguerre_reference_for(ctx: &ACPContext, z: Complex64, tau: f64) -> Result<Complex64> {
    let zero_start = ctx
        .init
        .roots
        .iter()
        .all(|(r, _)| *r == Complex64::new(0.0, 0.0));
    if !zero_start || ctx.nu.fract() != 0.0 {
        return Err(Error::InvalidParams(
            "the Laguerre reference needs a = 0 and integer ν".to_string(),
        ));
    }
    Ok(laguerre_reference(ctx.n, ctx.nu as usize, z, tau))
}

/// `Q̃(w) = w^ν Q(w², τ)`, the chiral counterpart of `Q`.
pub fn chiral_lift(w: Complex64, tau: f64, ctx: &ACPContext) -> Result<Complex64> {
    if ctx.nu.fract() != 0.0 || ctx.nu < 0.0 {
        return Err(Error::InvalidParams(format!(
            "chiral lift needs integer ν ≥ 0, got {}",
            ctx.nu
        )));
    }
    let q = if tau == 0.0 {
        ctx.init.eval(w * w)
    } else {
        q_integral(ctx, w * w, tau)?
    };
    Ok(w.powu(ctx.nu as u32) * q)
}

/// Residual of the PDE for an arbitrary evaluator, normalised by `1 + |Q|`,
/// with fourth-order central differences of steps `hz` (along real `z`) and
/// `ht`.
pub fn pde_residual_with<F>(
    f: F,
    nu: f64,
    m: f64,
    z_grid: &[Complex64],
    tau_grid: &[f64],
    hz: f64,
    ht: f64,
) -> Result<f64>
where
    F: Fn(Complex64, f64) -> Result<Complex64>,
{
    let mut worst = 0.0f64;
    for &tau in tau_grid {
        if !(tau - 2.0 * ht > 0.0) {
            return Err(Error::InvalidParams(format!(
                "tau grid point {tau} too close to 0 for step {ht}"
            )));
        }
        for &z in z_grid {
            let q0 = f(z, tau)?;
            let zp1 = f(z + hz, tau)?;
            let zm1 = f(z - hz, tau)?;
            let zp2 = f(z + 2.0 * hz, tau)?;
            let zm2 = f(z - 2.0 * hz, tau)?;
            let tp1 = f(z, tau + ht)?;
            let tm1 = f(z, tau - ht)?;
            let tp2 = f(z, tau + 2.0 * ht)?;
            let tm2 = f(z, tau - 2.0 * ht)?;
            let dz = (zm2 - zp2 + (zp1 - zm1) * 8.0) / (12.0 * hz);
            let dzz = (-(zp2 + zm2) + (zp1 + zm1) * 16.0 - q0 * 30.0) / (12.0 * hz * hz);
            let dt = (tm2 - tp2 + (tp1 - tm1) * 8.0) / (12.0 * ht);
            let r = dt + z * dzz / m + dz * ((nu + 1.0) / m);
            worst = worst.max(r.norm() / (1.0 + q0.norm()));
        }
    }
    Ok(worst)
}

/// [`pde_residual_with`] applied to [`q_integral`].
pub fn pde_residual(ctx: &ACPContext, z_grid: &[Complex64], tau_grid: &[f64]) -> Result<f64> {
    let ht = tau_grid
        .iter()
        .fold(f64::INFINITY, |a, &t| a.min(t))
        .min(1.0)
        * 0.1;
    pde_residual_with(
        |z, t| q_integral(ctx, z, t),
        ctx.nu,
        ctx.m(),
        z_grid,
        tau_grid,
        0.05,
        ht,
    )
}

/// Degree-`N` fit through `N + 1` samples of `Q(·, τ)`, checked at extra points.
#[derive(Debug, Clone, PartialEq)]
pub struct MonicFit {
    pub coefficients: Vec<Complex64>,
    pub leading: Complex64,
    /// Largest misfit at the held-out points, relative to `1 + |Q|`.
    pub residual: f64,
}

/// Fits `Q(·, τ)` at `N + 1` points of `zs` and tests the rest.
pub fn monic_fit(ctx: &ACPContext, zs: &[Complex64], tau: f64) -> Result<MonicFit> {
    let n = ctx.n;
    if zs.len() < n + 2 {
        return Err(Error::InvalidParams(format!(
            "need at least N + 2 = {} sample points",
            n + 2
        )));
    }
    let values: Vec<Complex64> = zs
        .iter()
        .map(|&z| q_integral(ctx, z, tau))
        .collect::<Result<_>>()?;
    let vander = DMatrix::from_fn(n + 1, n + 1, |i, j| zs[i].powu(j as u32));
    let rhs = DVector::from_iterator(n + 1, values[..=n].iter().copied());
    let sol = vander
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::Singular("Vandermonde system is singular".to_string()))?;
    let coefficients: Vec<Complex64> = sol.iter().copied().collect();
    let residual = zs[n + 1..]
        .iter()
        .zip(&values[n + 1..])
        .map(|(&z, &v)| (horner(&coefficients, z) - v).norm() / (1.0 + v.norm()))
        .fold(0.0, f64::max);
    Ok(MonicFit {
        leading: coefficients[n],
        coefficients,
        residual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn ctx(n: usize, nu: f64, a: f64) -> ACPContext {
        ACPContext::new(
            n,
            nu,
            InitialPolynomial::power(a, n),
            QuadratureSpec::default(),
        )
        .unwrap()
    }

    #[test]
    fn coefficients_expand_roots() {
        let p = InitialPolynomial::new(vec![(c(1.0, 2.0), 1), (c(1.0, -2.0), 1), (c(3.0, 0.0), 2)])
            .unwrap();
        let z = c(0.7, -0.4);
        assert!((horner(&p.coefficients(), z) - p.eval(z)).norm() < 1e-12);
        assert_eq!(p.degree(), 4);
        assert!(InitialPolynomial::new(vec![(c(1.0, 2.0), 1)]).is_err());
    }

    #[test]
    fn single_eigenvalue_closed_form() {
        for &nu in &[0.0, 1.0, 2.0, 0.5] {
            let cx = ctx(1, nu, 1.0);
            for &(z, t) in &[(c(-0.7, 0.0), 0.5), (c(0.5, 0.8), 1.3), (c(2.0, 0.0), 0.3)] {
                let q = q_integral(&cx, z, t).unwrap();
                let want = polynomial_reference(&cx, z, t);
                assert!(
                    (q - want).norm() < 1e-9 * (1.0 + want.norm()),
                    "ν={nu} z={z}: {q} vs {want}"
                );
            }
        }
        let cx = ctx(1, 0.0, 1.0);
        let want = c(2.0 - 1.0 - 0.3, 0.0);
        assert!((polynomial_reference(&cx, c(2.0, 0.0), 0.3) - want).norm() < 1e-15);
    }

    #[test]
    fn laguerre_small_cases() {
        assert_eq!(
            laguerre_reference(3, 2, c(1.5, 0.2), 0.0),
            c(1.5, 0.2).powu(3)
        );
        assert!((laguerre_reference(1, 0, c(1.5, 0.0), 0.4) - c(1.1, 0.0)).norm() < 1e-15);
        let cx = ctx(2, 0.0, 0.0);
        let want = laguerre_reference(2, 0, c(0.0, 0.0), 1.0);
        // c₁ = −2τ, c₀ = τ²/2
        assert!((want - c(0.5, 0.0)).norm() < 1e-15);
        assert!(laguerre_reference_for(&ctx(2, 0.0, 1.0), c(1.0, 0.0), 1.0).is_err());
        assert!(laguerre_reference_for(&cx, c(1.0, 0.0), 1.0).is_ok());
    }

    #[test]
    fn large_positive_z_is_refused_at_short_times() {
        let cx = ctx(2, 1.0, 1.0);
        match q_integral(&cx, c(3.0, 0.0), 1e-6) {
            Err(Error::IllConditioned { digits_lost }) => assert!(digits_lost > 10.0),
            other => panic!("expected IllConditioned, got {other:?}"),
        }
    }
}
