use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{shock_positions_general, solve_g, ResolventQuery, ShockFront};
use crate::diffusion::EmpiricalDensity;
use crate::error::{Error, Result};
use crate::specfun::{integrate_interval, QuadratureSpec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityCurve {
    pub lambdas: Vec<f64>,
    pub rho: Vec<f64>,
    pub tau: f64,
    pub a: f64,
    pub r: f64,
    pub eps: f64,
    /// `|∫ρ dλ − 1|` over the whole support.
    pub normalization_defect: f64,
    /// `∫λρ dλ`.
    pub first_moment: f64,
    /// Grid points where the extrapolated value was negative and set to 0.
    pub clipped: usize,
    pub support: (f64, f64),
}

fn g_at(lambda: f64, eps: f64, tau: f64, a: f64, r: f64) -> Result<Complex64> {
    let q = ResolventQuery::new(Complex64::new(lambda, eps), tau, r, a)?;
    Ok(solve_g(&q)?.0)
}

/// `G(λ + i0⁺)` by two-point Richardson extrapolation over `ε` and `ε/2`.
pub fn boundary_g(lambda: f64, tau: f64, a: f64, r: f64, eps: f64) -> Result<Complex64> {
    let g1 = g_at(lambda, eps, tau, a, r)?;
    let g2 = g_at(lambda, 0.5 * eps, tau, a, r)?;
    Ok(g2 * 2.0 - g1)
}

/// Extrapolated `−Im G(λ + i0⁺)/π`, not clipped.
pub fn density_at(lambda: f64, tau: f64, a: f64, r: f64, eps: f64) -> Result<f64> {
    Ok(-boundary_g(lambda, tau, a, r, eps)?.im / PI)
}

fn check_eps(eps: f64) -> Result<()> {
    if !(1e-10..=1e-6).contains(&eps) {
        return Err(Error::InvalidParams(format!(
            "eps must lie in [1e-10, 1e-6], got {eps}"
        )));
    }
    Ok(())
}

/// Density on `lambda_grid`, plus the normalisation and first moment over
/// the support from the edge solver.
pub fn density(tau: f64, a: f64, r: f64, lambda_grid: &[f64], eps: f64) -> Result<DensityCurve> {
    check_eps(eps)?;
    ResolventQuery::new(Complex64::new(0.0, 1.0), tau, r, a)?;
    if lambda_grid.windows(2).any(|w| !(w[1] >= w[0])) {
        return Err(Error::InvalidParams(
            "lambda grid must be sorted".to_string(),
        ));
    }
    let raw: Vec<f64> = lambda_grid
        .par_iter()
        .map(|&l| density_at(l, tau, a, r, eps))
        .collect::<Result<Vec<f64>>>()?;
    let clipped = raw.iter().filter(|&&x| x < 0.0).count();
    let rho = raw.iter().map(|&x| x.max(0.0)).collect();
    let front = shock_positions_general(tau, a, r)?;
    let (mass, first_moment) = support_moments(&front, eps)?;
    Ok(DensityCurve {
        lambdas: lambda_grid.to_vec(),
        rho,
        tau,
        a,
        r,
        eps,
        normalization_defect: (mass - 1.0).abs(),
        first_moment,
        clipped,
        support: (front.lower, front.upper),
    })
}

/// `(∫ρ, ∫λρ)` over the support. Each piece between breakpoints is mapped
/// through a smoothstep so that the endpoint singularities become integrable
/// zeros, and `ε` is shrunk near breakpoints so the regularisation stays
/// well below the local scale.
pub fn support_moments(front: &ShockFront, eps: f64) -> Result<(f64, f64)> {
    let (lo, hi) = (front.lower, front.upper);
    let mut cuts: Vec<f64> = vec![lo, hi];
    for &e in front.edges.iter().chain(std::iter::once(&0.0)) {
        if e > lo && e < hi {
            cuts.push(e);
        }
    }
    cuts.sort_by(f64::total_cmp);
    cuts.dedup_by(|x, y| (*x - *y).abs() <= 1e-12 * hi);
    let spec = QuadratureSpec {
        rel_tol: 1e-10,
        abs_tol: 1e-12,
        max_panels: 3000,
        ..Default::default()
    };
    let mut mass = 0.0;
    let mut moment = 0.0;
    for w in cuts.windows(2) {
        let v = piece_moments(front, w[0], w[1], &cuts, eps, &spec)?;
        mass += v.re;
        moment += v.im;
    }
    Ok((mass, moment))
}

/// `∫ρ + i∫λρ` over `[p, q]`, which must not contain a point of `cuts` in
/// its interior.
fn piece_moments(
    front: &ShockFront,
    p: f64,
    q: f64,
    cuts: &[f64],
    eps: f64,
    spec: &QuadratureSpec,
) -> Result<Complex64> {
    let scale = 1.0 + front.tau + front.a * front.a;
    let width = q - p;
    let f = |v: f64| {
        let lambda = p + width * v * v * (3.0 - 2.0 * v);
        let jac = width * 6.0 * v * (1.0 - v);
        let d = cuts
            .iter()
            .map(|c| (lambda - c).abs())
            .fold(f64::INFINITY, f64::min);
        let e = eps.min((1e-4 * d).max(1e-14 * scale));
        match density_at(lambda, front.tau, front.a, front.r, e) {
            Ok(rho) => {
                let rho = rho.max(0.0);
                Complex64::new(rho * jac, lambda * rho * jac)
            }
            Err(_) => Complex64::new(f64::NAN, f64::NAN),
        }
    };
    match integrate_interval(f, &[0.0, 0.5, 1.0], spec) {
        Ok(rep) => Ok(rep.value),
        Err(Error::Convergence { estimate, .. }) => Ok(estimate),
        Err(e) => Err(e),
    }
}

/// Large-N probability mass in each bin `[edges[i], edges[i+1]]`.
pub fn bin_masses(tau: f64, a: f64, r: f64, edges: &[f64], eps: f64) -> Result<Vec<f64>> {
    check_eps(eps)?;
    let front = shock_positions_general(tau, a, r)?;
    let mut cuts: Vec<f64> = vec![front.lower, front.upper, 0.0];
    cuts.extend(front.edges.iter().copied());
    let spec = QuadratureSpec {
        rel_tol: 1e-8,
        abs_tol: 1e-12,
        max_panels: 400,
        ..Default::default()
    };
    edges
        .par_windows(2)
        .map(|w| {
            let lo = w[0].max(front.lower);
            let hi = w[1].min(front.upper);
            if !(hi > lo) {
                return Ok(0.0);
            }
            let mut pts = vec![lo, hi];
            pts.extend(cuts.iter().copied().filter(|&c| c > lo && c < hi));
            pts.sort_by(f64::total_cmp);
            let mut m = 0.0;
            for piece in pts.windows(2) {
                m += piece_moments(&front, piece[0], piece[1], &cuts, eps, &spec)?.re;
            }
            Ok(m)
        })
        .collect()
}

/// `∫|ρ_hist − ρ|` for a histogram whose range covers the support.
pub fn histogram_l1(hist: &EmpiricalDensity, tau: f64, a: f64, r: f64, eps: f64) -> Result<f64> {
    let theory = bin_masses(tau, a, r, &hist.edges, eps)?;
    let w = hist.bin_width();
    let inside: f64 = hist
        .heights
        .iter()
        .zip(&theory)
        .map(|(h, t)| (h * w - t).abs())
        .sum();
    let covered: f64 = theory.iter().sum();
    Ok(inside + hist.mass_below + hist.mass_above + (1.0 - covered).abs())
}

/// Near-origin behaviour at the critical time `τ = a²`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriticalProbe {
    pub a: f64,
    pub lambdas: Vec<f64>,
    pub rho: Vec<f64>,
    /// Least-squares slope of `ln ρ` against `ln λ`.
    pub slope: f64,
    pub max_fit_residual: f64,
    /// Finite part of `G` once the `λ^{−1/3}` divergence is removed.
    pub regular_part: Complex64,
}

/// Fits `ρ ∝ λ^p` on `λ ∈ [1e−6, 1e−2]·a²` at `τ = a²`, and separates
/// `G(λ + i0⁺) = c·λ^{−1/3} + B + …` at `λ = 1e−6·a²` and `λ/8`.
pub fn critical_exponent_probe(a: f64, n_points: usize) -> Result<CriticalProbe> {
    if n_points < 8 {
        return Err(Error::InvalidParams(format!(
            "need at least 8 points, got {n_points}"
        )));
    }
    if !(a > 0.0) || !a.is_finite() {
        return Err(Error::InvalidParams(format!("a must be positive, got {a}")));
    }
    let a2 = a * a;
    let tau = a2;
    let lambdas: Vec<f64> = (0..n_points)
        .map(|i| a2 * 10f64.powf(-6.0 + 4.0 * i as f64 / (n_points - 1) as f64))
        .collect();
    let eps_for = |l: f64| (1e-4 * l).clamp(1e-16, 1e-6);
    let rho: Vec<f64> = lambdas
        .iter()
        .map(|&l| density_at(l, tau, a, 1.0, eps_for(l)))
        .collect::<Result<Vec<f64>>>()?;
    if let Some(bad) = rho.iter().find(|&&x| !(x > 0.0)) {
        return Err(Error::ScalingViolation(format!(
            "density {bad} is not positive near the origin"
        )));
    }
    let xs: Vec<f64> = lambdas.iter().map(|l| l.ln()).collect();
    let ys: Vec<f64> = rho.iter().map(|r| r.ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let slope = sxy / sxx;
    let max_fit_residual = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (y - (my + slope * (x - mx))).abs())
        .fold(0.0, f64::max);
    if max_fit_residual > 0.05 {
        return Err(Error::ScalingViolation(format!(
            "log-log fit residual {max_fit_residual} too large (slope {slope})"
        )));
    }

    let l1 = 1e-6 * a2;
    let l2 = l1 / 8.0;
    let g1 = boundary_g(l1, tau, a, 1.0, 1e-6 * l1)?;
    let g2 = boundary_g(l2, tau, a, 1.0, 1e-6 * l2)?;
    let (x1, x2) = (l1.powf(-1.0 / 3.0), l2.powf(-1.0 / 3.0));
    let regular_part = (g2 * x1 - g1 * x2) / (x1 - x2);

    Ok(CriticalProbe {
        a,
        lambdas,
        rho,
        slope,
        max_fit_residual,
        regular_part,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mp(l: f64) -> f64 {
        (4.0 - l).sqrt() / (2.0 * PI * l.sqrt())
    }

    #[test]
    fn marchenko_pastur_pointwise() {
        let grid: Vec<f64> = (0..=38).map(|i| 0.1 + 0.1 * i as f64).collect();
        let d = density(1.0, 0.0, 1.0, &grid, 1e-8).unwrap();
        for (l, r) in grid.iter().zip(&d.rho) {
            assert!((r - mp(*l)).abs() < 1e-8, "λ={l}: {r} vs {}", mp(*l));
        }
        assert!(d.normalization_defect < 1e-6, "{}", d.normalization_defect);
        assert!((d.first_moment - 1.0).abs() < 1e-6);
    }

    #[test]
    fn critical_time_normalises() {
        let d = density(1.0, 1.0, 1.0, &[1.0, 3.0], 1e-8).unwrap();
        assert!(d.normalization_defect < 1e-6, "{}", d.normalization_defect);
        assert!((d.first_moment - 2.0).abs() < 1e-6, "{}", d.first_moment);
        assert!((d.support.1 - 6.75).abs() < 1e-12);
    }

    #[test]
    fn gap_before_critical_time() {
        let d = density(0.1, 1.0, 1.0, &[0.2, 0.5], 1e-8).unwrap();
        assert!(d.rho[0].abs() < 1e-8);
        assert!(d.rho[1] > 0.1);
        assert!((d.support.0 - 0.3375).abs() < 1e-12);
        assert!(d.normalization_defect < 1e-6, "{}", d.normalization_defect);
    }

    #[test]
    fn rejects_eps_outside_range() {
        assert!(density(1.0, 1.0, 1.0, &[1.0], 1e-3).is_err());
        assert!(density(1.0, 1.0, 1.0, &[1.0], 1e-12).is_err());
    }

    #[test]
    fn critical_probe() {
        let p = critical_exponent_probe(1.0, 12).unwrap();
        assert!((p.slope + 1.0 / 3.0).abs() < 0.02, "{}", p.slope);
        assert!(
            (p.regular_part.re - 2.0 / 3.0).abs() < 0.01 * 2.0 / 3.0,
            "{}",
            p.regular_part
        );
    }
}
