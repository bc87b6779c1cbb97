//! Monte Carlo simulation of the Wishart matrix Brownian motion.
//!
//! `K(τ)` is an `M×N` complex matrix whose entries perform independent
//! complex Brownian motions with `⟨|dK_ij|²⟩ = dτ_raw`; `L = K†K`. All public
//! entry points take macroscopic time `τ` and convert to raw time
//! `τ_raw = τ/M` internally.
//!
//! Increments are exact Gaussians, so a trial jumps straight from `τ = 0` to
//! its target time. Each trial owns a ChaCha stream selected by its index,
//! which makes every estimate independent of thread scheduling.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnsembleParams {
    /// Columns of `K`, i.e. the size of `L`.
    pub n: usize,
    /// Rows of `K`, `m ≥ n`.
    pub m: usize,
    /// The initial `L` is `a²·Id`.
    pub a: f64,
    /// Macroscopic time.
    pub tau: f64,
    pub seed: u64,
}

impl EnsembleParams {
    pub fn new(n: usize, m: usize, a: f64, tau: f64, seed: u64) -> Result<Self> {
        let p = EnsembleParams { n, m, a, tau, seed };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.m < self.n {
            return Err(Error::InvalidParams(format!(
                "need 1 ≤ N ≤ M, got N={} M={}",
                self.n, self.m
            )));
        }
        if !(self.a >= 0.0) || !self.a.is_finite() {
            return Err(Error::InvalidParams(format!(
                "a must be ≥ 0, got {}",
                self.a
            )));
        }
        if !(self.tau >= 0.0) || !self.tau.is_finite() {
            return Err(Error::InvalidParams(format!(
                "tau must be ≥ 0, got {}",
                self.tau
            )));
        }
        Ok(())
    }

    /// `ν = M − N`.
    pub fn nu(&self) -> usize {
        self.m - self.n
    }

    /// Rectangularity `r = N/M`.
    pub fn r(&self) -> f64 {
        self.n as f64 / self.m as f64
    }

    pub fn raw_time(&self) -> f64 {
        macro_to_raw_time(self.tau, self)
    }

    pub fn with_tau(&self, tau: f64) -> Self {
        EnsembleParams { tau, ..*self }
    }
}

/// Macroscopic to raw diffusion time: `τ_raw = τ·r/N = τ/M`.
pub fn macro_to_raw_time(tau: f64, params: &EnsembleParams) -> f64 {
    tau * params.r() / params.n as f64
}

/// One realisation of `K`, with `L = K†K` and its sorted spectrum.
#[derive(Debug, Clone)]
pub struct WishartSample {
    pub k: DMatrix<Complex64>,
    pub l: DMatrix<Complex64>,
    /// Ascending, clamped at zero.
    pub eigenvalues: Vec<f64>,
    /// Smallest eigenvalue before clamping.
    pub min_raw_eigenvalue: f64,
    /// How many eigenvalues were slightly negative and clamped to 0.
    pub clamped: usize,
}

impl WishartSample {
    pub fn from_k(k: DMatrix<Complex64>) -> Self {
        let l = gram(&k);
        let mut eig: Vec<f64> = l.clone().symmetric_eigenvalues().iter().copied().collect();
        eig.sort_by(f64::total_cmp);
        let min_raw_eigenvalue = eig.first().copied().unwrap_or(0.0);
        let mut clamped = 0;
        for e in eig.iter_mut() {
            if *e < 0.0 {
                *e = 0.0;
                clamped += 1;
            }
        }
        WishartSample {
            k,
            l,
            eigenvalues: eig,
            min_raw_eigenvalue,
            clamped,
        }
    }

    pub fn trace(&self) -> f64 {
        (0..self.l.nrows()).map(|i| self.l[(i, i)].re).sum()
    }

    /// `det(z − L)` by LU factorisation with partial pivoting.
    pub fn char_poly(&self, z: Complex64) -> Complex64 {
        let n = self.l.nrows();
        let shifted = DMatrix::from_diagonal_element(n, n, z) - &self.l;
        shifted.lu().determinant()
    }
}

/// `K†K` assembled from three real products and symmetrised so that the
/// result is exactly Hermitian.
fn gram(k: &DMatrix<Complex64>) -> DMatrix<Complex64> {
    let re = k.map(|c| c.re);
    let im = k.map(|c| c.im);
    let mut sym = re.tr_mul(&re);
    sym += im.tr_mul(&im);
    let cross = re.tr_mul(&im);
    let n = k.ncols();
    DMatrix::from_fn(n, n, |i, j| {
        let r = 0.5 * (sym[(i, j)] + sym[(j, i)]);
        // Im(K†K)_ij = (AᵀB − BᵀA)_ij = cross_ij − cross_ji
        let m = cross[(i, j)] - cross[(j, i)];
        Complex64::new(r, if i == j { 0.0 } else { m })
    })
}

/// `K(0)`: `a` on the diagonal of the top `N×N` block, so `L(0) = a²·Id`.
pub fn init_sample(params: &EnsembleParams) -> WishartSample {
    let k = DMatrix::from_fn(params.m, params.n, |i, j| {
        if i == j {
            Complex64::new(params.a, 0.0)
        } else {
            Complex64::new(0.0, 0.0)
        }
    });
    WishartSample::from_k(k)
}

fn add_increment<R: Rng + ?Sized>(k: &mut DMatrix<Complex64>, raw_dt: f64, rng: &mut R) {
    let sd = (0.5 * raw_dt).sqrt();
    for entry in k.iter_mut() {
        let dx: f64 = rng.sample(StandardNormal);
        let dy: f64 = rng.sample(StandardNormal);
        *entry += Complex64::new(sd * dx, sd * dy);
    }
}

/// Advances `steps` exact Gaussian increments of raw length `raw_dt`.
pub fn evolve<R: Rng + ?Sized>(
    sample: &WishartSample,
    raw_dt: f64,
    steps: usize,
    rng: &mut R,
) -> Result<WishartSample> {
    if !(raw_dt > 0.0) {
        return Err(Error::InvalidParams(format!(
            "raw_dt must be > 0, got {raw_dt}"
        )));
    }
    let mut k = sample.k.clone();
    for _ in 0..steps {
        add_increment(&mut k, raw_dt, rng);
    }
    Ok(WishartSample::from_k(k))
}

/// Like [`evolve`] but keeps the sample after every step.
pub fn evolve_snapshots<R: Rng + ?Sized>(
    sample: &WishartSample,
    raw_dt: f64,
    steps: usize,
    rng: &mut R,
) -> Result<Vec<WishartSample>> {
    let mut out = Vec::with_capacity(steps);
    let mut current = sample.clone();
    for _ in 0..steps {
        current = evolve(&current, raw_dt, 1, rng)?;
        out.push(current.clone());
    }
    Ok(out)
}

/// Independent stream for trial `trial` under master `seed`.
pub fn trial_rng(seed: u64, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial);
    rng
}

/// Sample for one trial at the configured macroscopic time.
pub fn sample_trial(params: &EnsembleParams, trial: u64) -> WishartSample {
    let start = init_sample(params);
    let raw = params.raw_time();
    if raw == 0.0 {
        return start;
    }
    let mut rng = trial_rng(params.seed, trial);
    let mut k = start.k;
    add_increment(&mut k, raw, &mut rng);
    WishartSample::from_k(k)
}

/// Sum in a fixed binary-tree order.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    match xs.len() {
        0 => 0.0,
        1 => xs[0],
        n => {
            let (a, b) = xs.split_at(n / 2);
            pairwise_sum(a) + pairwise_sum(b)
        }
    }
}

/// Mean and standard error of the mean.
pub fn mean_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = pairwise_sum(xs) / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let dev: Vec<f64> = xs.iter().map(|x| (x - mean) * (x - mean)).collect();
    let var = pairwise_sum(&dev) / (n - 1.0);
    (mean, (var / n).sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AcpEstimate {
    pub z: Complex64,
    pub mean: Complex64,
    pub stderr_re: f64,
    pub stderr_im: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialStatistics {
    pub params: EnsembleParams,
    pub n_trials: usize,
    /// All sampled eigenvalues, `N` per trial, in trial order.
    pub eigenvalue_pool: Vec<f64>,
    pub acp: Vec<AcpEstimate>,
    pub trace_mean: f64,
    pub trace_stderr: f64,
    /// Smallest pre-clamp eigenvalue relative to the largest, over all trials.
    pub worst_negativity: f64,
    pub clamped: usize,
}

impl TrialStatistics {
    /// Per-trial smallest eigenvalue.
    pub fn smallest_eigenvalues(&self) -> Vec<f64> {
        self.eigenvalue_pool
            .chunks(self.params.n)
            .map(|c| c[0])
            .collect()
    }
}

struct TrialOutcome {
    eigenvalues: Vec<f64>,
    dets: Vec<Complex64>,
    trace: f64,
    negativity: f64,
    clamped: usize,
}

/// Runs `n_trials` independent trials at `params.tau`, evaluating
/// `det(z − L)` on `z_grid` for each.
pub fn run_trials(
    params: &EnsembleParams,
    n_trials: usize,
    z_grid: &[Complex64],
) -> Result<TrialStatistics> {
    params.validate()?;
    if n_trials == 0 {
        return Err(Error::InvalidParams("n_trials must be ≥ 1".to_string()));
    }
    let outcomes: Vec<TrialOutcome> = (0..n_trials as u64)
        .into_par_iter()
        .map(|t| {
            let s = sample_trial(params, t);
            let top = s.eigenvalues.last().copied().unwrap_or(0.0).abs();
            TrialOutcome {
                dets: z_grid.iter().map(|&z| s.char_poly(z)).collect(),
                trace: s.trace(),
                negativity: if top > 0.0 {
                    s.min_raw_eigenvalue.min(0.0) / top
                } else {
                    0.0
                },
                clamped: s.clamped,
                eigenvalues: s.eigenvalues,
            }
        })
        .collect();

    let mut acp = Vec::with_capacity(z_grid.len());
    for (g, &z) in z_grid.iter().enumerate() {
        let re: Vec<f64> = outcomes.iter().map(|o| o.dets[g].re).collect();
        let im: Vec<f64> = outcomes.iter().map(|o| o.dets[g].im).collect();
        let (mr, sr) = mean_stderr(&re);
        let (mi, si) = mean_stderr(&im);
        acp.push(AcpEstimate {
            z,
            mean: Complex64::new(mr, mi),
            stderr_re: sr,
            stderr_im: si,
        });
    }
    let traces: Vec<f64> = outcomes.iter().map(|o| o.trace).collect();
    let (trace_mean, trace_stderr) = mean_stderr(&traces);
    let worst_negativity = outcomes.iter().map(|o| o.negativity).fold(0.0f64, f64::min);
    let clamped = outcomes.iter().map(|o| o.clamped).sum();
    let eigenvalue_pool = outcomes.into_iter().flat_map(|o| o.eigenvalues).collect();
    Ok(TrialStatistics {
        params: *params,
        n_trials,
        eigenvalue_pool,
        acp,
        trace_mean,
        trace_stderr,
        worst_negativity,
        clamped,
    })
}

/// Monte Carlo estimate of `⟨det(z − L)⟩` at `params.tau`.
pub fn estimate_acp(
    params: &EnsembleParams,
    z_grid: &[Complex64],
    n_trials: usize,
) -> Result<TrialStatistics> {
    if n_trials < 2 {
        return Err(Error::InvalidParams(
            "estimate_acp needs at least two trials for a standard error".to_string(),
        ));
    }
    run_trials(params, n_trials, z_grid)
}

/// Normalised eigenvalue histogram.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalDensity {
    pub edges: Vec<f64>,
    /// Height per bin; `Σ heights·width + mass_below + mass_above = 1`.
    pub heights: Vec<f64>,
    pub mass_below: f64,
    pub mass_above: f64,
}

impl EmpiricalDensity {
    pub fn centers(&self) -> Vec<f64> {
        self.edges.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect()
    }

    pub fn bin_width(&self) -> f64 {
        self.edges[1] - self.edges[0]
    }
}

pub fn estimate_density(
    stats: &TrialStatistics,
    bins: usize,
    range: (f64, f64),
) -> Result<EmpiricalDensity> {
    histogram(&stats.eigenvalue_pool, bins, range)
}

pub fn histogram(pool: &[f64], bins: usize, range: (f64, f64)) -> Result<EmpiricalDensity> {
    if pool.is_empty() {
        return Err(Error::EmptyPool);
    }
    let (lo, hi) = range;
    if bins == 0 || !(hi > lo) {
        return Err(Error::InvalidParams(format!(
            "histogram needs bins ≥ 1 and lo < hi, got {bins} bins on [{lo}, {hi}]"
        )));
    }
    let width = (hi - lo) / bins as f64;
    let mut counts = vec![0usize; bins];
    let (mut below, mut above) = (0usize, 0usize);
    for &x in pool {
        if x < lo {
            below += 1;
        } else if x > hi {
            above += 1;
        } else {
            let b = (((x - lo) / width) as usize).min(bins - 1);
            counts[b] += 1;
        }
    }
    let total = pool.len() as f64;
    Ok(EmpiricalDensity {
        edges: (0..=bins).map(|i| lo + width * i as f64).collect(),
        heights: counts.iter().map(|&c| c as f64 / (total * width)).collect(),
        mass_below: below as f64 / total,
        mass_above: above as f64 / total,
    })
}
