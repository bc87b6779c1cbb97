//! Batch runner: one subcommand per experiment, configured by a flat
//! `key = value` file plus command-line overrides.
//!
//! Every data file (CSV or JSON) is written next to a `<out>.manifest.json`
//! recording the resolved configuration, seed, version, wall time and
//! warnings. Exit status is 0 when every contract of the command holds,
//! 1 when one fails (the message names it), 2 for configuration errors.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use clap::{Parser, ValueEnum};
use num_complex::Complex64;
use serde::Serialize;

use crate::asymptotics::{bessoid, MicroCoordinates};
use crate::charpoly::{pde_residual, q_integral_scaled, ACPContext, Kernel};
use crate::diffusion::{estimate_acp, estimate_density, mean_stderr, run_trials, EnsembleParams};
use crate::error::Error;
use crate::resolvent::{
    bin_masses, characteristic_map, density, histogram_l1, shock_positions_general,
};

/// Environment variable that fixes the size of the worker pool.
pub const THREADS_ENV: &str = "WISHART_LAB_THREADS";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Density,
    Edges,
    McDensity,
    AcpCompare,
    PdeCheck,
    BessoidMap,
    ScalingFit,
    Characteristics,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Density => "density",
            Command::Edges => "edges",
            Command::McDensity => "mc-density",
            Command::AcpCompare => "acp-compare",
            Command::PdeCheck => "pde-check",
            Command::BessoidMap => "bessoid-map",
            Command::ScalingFit => "scaling-fit",
            Command::Characteristics => "characteristics",
        }
    }

    /// Command-specific keys and their defaults; these may also override
    /// the shared ensemble defaults.
    fn defaults(self) -> &'static [(&'static str, &'static str)] {
        match self {
            Command::Density => &[
                ("taus", "0.4,1,2"),
                ("lambdas", ""),
                ("points", "200"),
                ("eps", "1e-8"),
                ("norm_tol", "1e-6"),
            ],
            Command::Edges => &[("taus", "linspace(0.1,2,96)"), ("crossing_tol", "1e-6")],
            Command::McDensity => &[
                ("trials", "100"),
                ("bins", "50"),
                ("range", ""),
                ("eps", "1e-8"),
                ("l1_tol", "0.05"),
            ],
            Command::AcpCompare => &[
                ("n", "2"),
                ("m", "3"),
                ("tau", "0.3"),
                ("zs", "-1,0.5+0.5i,1.2-0.3i,1.5"),
                ("trials", "10000"),
                ("sigmas", "3"),
            ],
            Command::PdeCheck => &[
                ("n", "4"),
                ("m", "6"),
                ("zs", "2,1.9+0.1i,2.1-0.1i"),
                ("taus", "0.7,0.75"),
                ("pde_tol", "1e-4"),
            ],
            Command::BessoidMap => &[
                ("nu", "0"),
                ("s_re", "linspace(-4,4,17)"),
                ("s_im", "linspace(0.25,4,16)"),
                ("ts", "0"),
            ],
            Command::ScalingFit => &[
                ("ns", "50,100,200,400"),
                ("nu", "0"),
                ("trials", "200"),
                ("exponent", "-1.5"),
                ("exponent_tol", "0.15"),
            ],
            Command::Characteristics => &[
                ("taus", "linspace(0,2,41)"),
                ("x_starts", "-3,-2,-1.5,-0.5,0.5,1,2,3"),
                ("z_starts", "-0.5+0.5i,0.2+0.8i,1+1i"),
            ],
        }
    }
}

/// Ensemble keys shared by every command.
const COMMON: [(&str, &str); 5] = [
    ("n", "200"),
    ("m", "200"),
    ("a", "1"),
    ("tau", "1"),
    ("seed", "0"),
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Parser)]
#[command(
    name = "wishart-lab",
    version,
    about = "Diffusing Wishart matrix experiments"
)]
pub struct Args {
    pub command: Command,
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "csv")]
    pub format: Format,
    /// `key=value` overrides applied after the config file.
    pub overrides: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub command: Command,
    pub params: EnsembleParams,
    /// Every key after defaults, file and overrides are merged.
    pub values: BTreeMap<String, String>,
    pub output_path: PathBuf,
    pub format: Format,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunManifest {
    pub command: Command,
    pub config_echo: BTreeMap<String, String>,
    pub seed: u64,
    pub tool_version: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub wall_time: Option<f64>,
    pub warnings: Vec<String>,
    /// Scalar results such as fitted exponents.
    pub summary: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    fn new(columns: &[&str]) -> Self {
        Table {
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn to_csv(&self) -> String {
        let mut s = self.columns.join(",");
        s.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(|x| format!("{x:?}")).collect();
            s.push_str(&cells.join(","));
            s.push('\n');
        }
        s
    }
}

#[derive(Debug)]
pub enum CliError {
    /// Bad configuration: exit status 2.
    Config(String),
    /// A contract of the command failed: exit status 1.
    Contract(String),
    Compute(Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            _ => 1,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "configuration error: {m}"),
            CliError::Contract(m) => write!(f, "contract violated: {m}"),
            CliError::Compute(e) => write!(f, "computation failed: {e}"),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Compute(e)
    }
}

/// Reads `key = value` lines; `#` starts a comment.
pub fn parse_config_text(text: &str) -> Result<BTreeMap<String, String>, CliError> {
    let mut out = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap().trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| {
            CliError::Config(format!("line {}: expected key = value, got {raw:?}", i + 1))
        })?;
        out.insert(k.trim().to_string(), v.trim().to_string());
    }
    Ok(out)
}

fn parse_f64(key: &str, v: &str) -> Result<f64, CliError> {
    v.trim()
        .parse::<f64>()
        .map_err(|_| CliError::Config(format!("{key}: cannot parse {v:?} as a number")))
}

/// A real grid: `x1,x2,...` or `linspace(lo,hi,count)`.
pub fn parse_real_grid(key: &str, v: &str) -> Result<Vec<f64>, CliError> {
    let v = v.trim();
    let grid = if let Some(inner) = v
        .strip_prefix("linspace(")
        .and_then(|r| r.strip_suffix(')'))
    {
        let parts: Vec<&str> = inner.split(',').collect();
        if parts.len() != 3 {
            return Err(CliError::Config(format!(
                "{key}: linspace needs (lo,hi,count)"
            )));
        }
        let lo = parse_f64(key, parts[0])?;
        let hi = parse_f64(key, parts[1])?;
        let n: usize = parts[2]
            .trim()
            .parse()
            .map_err(|_| CliError::Config(format!("{key}: bad count {:?}", parts[2])))?;
        match n {
            0 => Vec::new(),
            1 => vec![lo],
            _ => (0..n)
                .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
                .collect(),
        }
    } else {
        v.split(',')
            .map(|x| parse_f64(key, x))
            .collect::<Result<_, _>>()?
    };
    if grid.is_empty() {
        return Err(CliError::Config(format!("{key}: grid is empty")));
    }
    Ok(grid)
}

/// A complex grid: comma-separated values such as `1`, `2i`, `0.5-0.3i`.
pub fn parse_complex_grid(key: &str, v: &str) -> Result<Vec<Complex64>, CliError> {
    let grid: Vec<Complex64> = v
        .split(',')
        .map(|x| {
            let t: String = x.chars().filter(|c| !c.is_whitespace()).collect();
            Complex64::from_str(&t).map_err(|_| {
                CliError::Config(format!("{key}: cannot parse {x:?} as a complex number"))
            })
        })
        .collect::<Result<_, _>>()?;
    if grid.is_empty() {
        return Err(CliError::Config(format!("{key}: grid is empty")));
    }
    Ok(grid)
}

impl RunConfig {
    /// Merges defaults, the config file and overrides, and validates the result.
    pub fn resolve(args: &Args) -> Result<RunConfig, CliError> {
        let mut values: BTreeMap<String, String> = COMMON
            .iter()
            .chain(args.command.defaults())
            .map(|(k, v)| (k.to_string(), v.to_string()))
            .collect();
        let mut supplied = BTreeMap::new();
        if let Some(path) = &args.config {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
            supplied.extend(parse_config_text(&text)?);
        }
        for o in &args.overrides {
            let (k, v) = o
                .split_once('=')
                .ok_or_else(|| CliError::Config(format!("override {o:?} is not key=value")))?;
            supplied.insert(k.trim().to_string(), v.trim().to_string());
        }
        if let Some(seed) = args.seed {
            supplied.insert("seed".to_string(), seed.to_string());
        }
        for (k, v) in supplied {
            if !values.contains_key(&k) {
                return Err(CliError::Config(format!(
                    "unknown key {k:?} for command {}",
                    args.command.name()
                )));
            }
            values.insert(k, v);
        }
        let get = |k: &str| values[k].as_str();
        let n = parse_usize("n", get("n"))?;
        let m = parse_usize("m", get("m"))?;
        let seed: u64 = get("seed")
            .parse()
            .map_err(|_| CliError::Config(format!("seed: cannot parse {:?}", get("seed"))))?;
        let params = EnsembleParams::new(
            n,
            m,
            parse_f64("a", get("a"))?,
            parse_f64("tau", get("tau"))?,
            seed,
        )
        .map_err(|e| CliError::Config(e.to_string()))?;

        let ext = match args.format {
            Format::Csv => "csv",
            Format::Json => "json",
        };
        let output_path = args
            .out
            .clone()
            .unwrap_or_else(|| PathBuf::from(format!("{}.{ext}", args.command.name())));
        let parent = output_path.parent().filter(|p| !p.as_os_str().is_empty());
        if let Some(p) = parent {
            if !p.is_dir() {
                return Err(CliError::Config(format!(
                    "output directory {} does not exist",
                    p.display()
                )));
            }
        }
        let cfg = RunConfig {
            command: args.command,
            params,
            values,
            output_path,
            format: args.format,
        };
        cfg.check_grids()?;
        Ok(cfg)
    }

    /// Parses every grid once so that malformed input is a configuration error.
    fn check_grids(&self) -> Result<(), CliError> {
        for (k, v) in &self.values {
            match k.as_str() {
                "taus" | "s_re" | "s_im" | "ts" | "x_starts" | "ns" => {
                    parse_real_grid(k, v)?;
                }
                "lambdas" | "range" if !v.is_empty() => {
                    parse_real_grid(k, v)?;
                }
                "zs" | "z_starts" => {
                    parse_complex_grid(k, v)?;
                }
                _ => {}
            }
        }
        Ok(())
    }

    fn f64(&self, key: &str) -> Result<f64, CliError> {
        parse_f64(key, &self.values[key])
    }

    fn usize(&self, key: &str) -> Result<usize, CliError> {
        parse_usize(key, &self.values[key])
    }

    fn grid(&self, key: &str) -> Result<Vec<f64>, CliError> {
        parse_real_grid(key, &self.values[key])
    }

    fn cgrid(&self, key: &str) -> Result<Vec<Complex64>, CliError> {
        parse_complex_grid(key, &self.values[key])
    }
}

fn parse_usize(key: &str, v: &str) -> Result<usize, CliError> {
    v.trim().parse().map_err(|_| {
        CliError::Config(format!(
            "{key}: cannot parse {v:?} as a non-negative integer"
        ))
    })
}

/// Data and diagnostics from one run, before anything is written.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub table: Table,
    pub warnings: Vec<String>,
    pub summary: BTreeMap<String, f64>,
    /// First failed contract, if any.
    pub violation: Option<String>,
}

impl RunOutput {
    fn new(table: Table) -> Self {
        RunOutput {
            table,
            warnings: Vec::new(),
            summary: BTreeMap::new(),
            violation: None,
        }
    }

    fn fail(&mut self, msg: String) {
        if self.violation.is_none() {
            self.violation = Some(msg);
        }
    }
}

/// Computes the command's table without touching the file system.
pub fn execute(cfg: &RunConfig) -> Result<RunOutput, CliError> {
    let p = cfg.params;
    match cfg.command {
        Command::Density => run_density(cfg),
        Command::Edges => run_edges(cfg),
        Command::McDensity => run_mc_density(cfg),
        Command::AcpCompare => run_acp_compare(cfg),
        Command::PdeCheck => {
            let ctx = ACPContext::from_params(&p);
            let r = pde_residual(&ctx, &cfg.cgrid("zs")?, &cfg.grid("taus")?)?;
            let mut out = RunOutput::new(Table::new(&["max_residual"]));
            out.table.rows.push(vec![r]);
            out.summary.insert("max_residual".to_string(), r);
            let tol = cfg.f64("pde_tol")?;
            if !(r <= tol) {
                out.fail(format!("pde residual {r:e} exceeds pde_tol = {tol:e}"));
            }
            Ok(out)
        }
        Command::BessoidMap => {
            let nu = cfg.f64("nu")?;
            let mut out = RunOutput::new(Table::new(&["re_s", "im_s", "t", "abs_b", "arg_b"]));
            for &t in &cfg.grid("ts")? {
                for &re in &cfg.grid("s_re")? {
                    for &im in &cfg.grid("s_im")? {
                        let b = bessoid(&MicroCoordinates::new(Complex64::new(re, im), t, nu))?;
                        if !(b.re.is_finite() && b.im.is_finite()) {
                            out.fail(format!("non-finite Bessoid at s = {re}+{im}i, t = {t}"));
                        }
                        out.table.rows.push(vec![re, im, t, b.norm(), b.arg()]);
                    }
                }
            }
            Ok(out)
        }
        Command::ScalingFit => run_scaling_fit(cfg),
        Command::Characteristics => {
            let mut out = RunOutput::new(Table::new(&[
                "start_re", "start_im", "tau", "lambda", "eta",
            ]));
            let starts: Vec<Complex64> = cfg
                .grid("x_starts")?
                .into_iter()
                .map(|x| Complex64::new(x, 0.0))
                .chain(cfg.cgrid("z_starts")?)
                .collect();
            for z0 in starts {
                for &tau in &cfg.grid("taus")? {
                    let z = characteristic_map(z0, tau, p.r(), p.a)?;
                    out.table.rows.push(vec![z0.re, z0.im, tau, z.re, z.im]);
                }
            }
            Ok(out)
        }
    }
}

fn run_density(cfg: &RunConfig) -> Result<RunOutput, CliError> {
    let p = cfg.params;
    let eps = cfg.f64("eps")?;
    let tol = cfg.f64("norm_tol")?;
    let mut out = RunOutput::new(Table::new(&["tau", "lambda", "rho"]));
    for &tau in &cfg.grid("taus")? {
        let grid = if cfg.values["lambdas"].is_empty() {
            let front = shock_positions_general(tau, p.a, p.r())?;
            let n = cfg.usize("points")?.max(2);
            let hi = 1.05 * front.upper;
            (0..n).map(|i| hi * (i + 1) as f64 / n as f64).collect()
        } else {
            cfg.grid("lambdas")?
        };
        let d = density(tau, p.a, p.r(), &grid, eps)?;
        if d.clipped > 0 {
            out.warnings.push(format!(
                "tau={tau}: {} negative values clipped to 0",
                d.clipped
            ));
        }
        out.summary.insert(
            format!("normalization_defect_tau={tau}"),
            d.normalization_defect,
        );
        if !(d.normalization_defect <= tol) {
            out.fail(format!(
                "density at tau={tau} integrates to 1 ± {:e}, beyond norm_tol = {tol:e}",
                d.normalization_defect
            ));
        }
        for (l, r) in d.lambdas.iter().zip(&d.rho) {
            out.table.rows.push(vec![tau, *l, *r]);
        }
    }
    Ok(out)
}

fn run_edges(cfg: &RunConfig) -> Result<RunOutput, CliError> {
    let p = cfg.params;
    let (a, r) = (p.a, p.r());
    let taus = cfg.grid("taus")?;
    let mut out = RunOutput::new(Table::new(&["tau", "lower", "upper", "critical"]));
    for &tau in &taus {
        let f = shock_positions_general(tau, a, r)?;
        out.table.rows.push(vec![
            tau,
            f.lower,
            f.upper,
            if f.critical { 1.0 } else { 0.0 },
        ]);
    }
    let gapped = |tau: f64| -> Result<bool, CliError> {
        Ok(shock_positions_general(tau, a, r)?.lower > 0.0)
    };
    let (lo, hi) = (
        taus.iter().copied().fold(f64::INFINITY, f64::min),
        taus.iter().copied().fold(0.0, f64::max),
    );
    if a > 0.0 && r == 1.0 && gapped(lo)? && !gapped(hi)? {
        let (mut x0, mut x1) = (lo, hi);
        for _ in 0..200 {
            let mid = 0.5 * (x0 + x1);
            if mid <= x0 || mid >= x1 {
                break;
            }
            if gapped(mid)? {
                x0 = mid;
            } else {
                x1 = mid;
            }
        }
        let crossing = 0.5 * (x0 + x1);
        out.summary.insert("crossing_tau".to_string(), crossing);
        let tol = cfg.f64("crossing_tol")?;
        if !((crossing - a * a).abs() <= tol) {
            out.fail(format!(
                "lower edge reaches 0 at tau = {crossing}, not a² = {} ± {tol:e}",
                a * a
            ));
        }
    } else {
        out.warnings
            .push("tau range does not bracket the lower edge reaching 0".to_string());
    }
    Ok(out)
}

fn run_mc_density(cfg: &RunConfig) -> Result<RunOutput, CliError> {
    let p = cfg.params;
    let eps = cfg.f64("eps")?;
    let front = shock_positions_general(p.tau, p.a, p.r())?;
    let range = if cfg.values["range"].is_empty() {
        (0.0, 1.1 * front.upper)
    } else {
        let r = cfg.grid("range")?;
        if r.len() != 2 {
            return Err(CliError::Config("range needs two values lo,hi".to_string()));
        }
        (r[0], r[1])
    };
    let stats = run_trials(&p, cfg.usize("trials")?, &[])?;
    let hist = estimate_density(&stats, cfg.usize("bins")?, range)?;
    let theory = bin_masses(p.tau, p.a, p.r(), &hist.edges, eps)?;
    let l1 = histogram_l1(&hist, p.tau, p.a, p.r(), eps)?;
    let w = hist.bin_width();
    let mut out = RunOutput::new(Table::new(&["lambda", "mc_density", "theory_density"]));
    for ((c, h), t) in hist.centers().iter().zip(&hist.heights).zip(&theory) {
        out.table.rows.push(vec![*c, *h, t / w]);
    }
    out.summary.insert("l1".to_string(), l1);
    out.summary.insert(
        "mass_outside_range".to_string(),
        hist.mass_below + hist.mass_above,
    );
    if stats.clamped > 0 {
        out.warnings
            .push(format!("{} eigenvalues clamped at 0", stats.clamped));
    }
    let tol = cfg.f64("l1_tol")?;
    if !(l1 < tol) {
        out.fail(format!(
            "L1 distance {l1} between histogram and theory is not below l1_tol = {tol}"
        ));
    }
    Ok(out)
}

fn run_acp_compare(cfg: &RunConfig) -> Result<RunOutput, CliError> {
    let p = cfg.params;
    let zs = cfg.cgrid("zs")?;
    let sig = cfg.f64("sigmas")?;
    let stats = estimate_acp(&p, &zs, cfg.usize("trials")?)?;
    let ctx = ACPContext::from_params(&p);
    let mut out = RunOutput::new(Table::new(&[
        "z_re",
        "z_im",
        "q_mc_re",
        "q_mc_im",
        "stderr_re",
        "stderr_im",
        "q_integral_re",
        "q_integral_im",
    ]));
    for est in &stats.acp {
        let kernel = if est.z.im == 0.0 {
            Kernel::Real
        } else {
            Kernel::Complex
        };
        let q = q_integral_scaled(&ctx, est.z, p.tau, kernel)?;
        let v = q.value.to_complex();
        let slack = 10.0 * q.rel_error * v.norm();
        let d = v - est.mean;
        if !(d.re.abs() <= sig * est.stderr_re + slack && d.im.abs() <= sig * est.stderr_im + slack)
        {
            out.fail(format!(
                "at z = {}: integral {v} and Monte Carlo {} differ by more than {sig} stderr",
                est.z, est.mean
            ));
        }
        out.table.rows.push(vec![
            est.z.re,
            est.z.im,
            est.mean.re,
            est.mean.im,
            est.stderr_re,
            est.stderr_im,
            v.re,
            v.im,
        ]);
    }
    Ok(out)
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn log_log_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = lx.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

fn run_scaling_fit(cfg: &RunConfig) -> Result<RunOutput, CliError> {
    let p = cfg.params;
    let nu = cfg.usize("nu")?;
    let trials = cfg.usize("trials")?;
    let mut out = RunOutput::new(Table::new(&["n", "mean_smallest", "stderr"]));
    let (mut ns, mut means) = (Vec::new(), Vec::new());
    for n in cfg.grid("ns")? {
        if !(n >= 1.0) || n.fract() != 0.0 {
            return Err(CliError::Config(format!(
                "ns: {n} is not a positive integer"
            )));
        }
        let n = n as usize;
        let params = EnsembleParams::new(n, n + nu, p.a, p.tau, p.seed)?;
        let stats = run_trials(&params, trials, &[])?;
        let (m, se) = mean_stderr(&stats.smallest_eigenvalues());
        out.table.rows.push(vec![n as f64, m, se]);
        ns.push(n as f64);
        means.push(m);
    }
    if ns.len() < 2 {
        return Err(CliError::Config("ns needs at least two sizes".to_string()));
    }
    let slope = log_log_slope(&ns, &means);
    out.summary.insert("exponent".to_string(), slope);
    let (want, tol) = (cfg.f64("exponent")?, cfg.f64("exponent_tol")?);
    if !((slope - want).abs() <= tol) {
        out.fail(format!(
            "fitted exponent {slope} is not within {tol} of {want}"
        ));
    }
    Ok(out)
}

fn manifest_path(out: &Path) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".manifest.json");
    PathBuf::from(s)
}

fn to_json_value(x: f64) -> serde_json::Value {
    serde_json::Number::from_f64(x).map_or(serde_json::Value::Null, serde_json::Value::Number)
}

/// Serialised data file. JSON embeds the manifest without its wall time so
/// identical runs produce identical bytes.
pub fn render(cfg: &RunConfig, output: &RunOutput, manifest: &RunManifest) -> String {
    match cfg.format {
        Format::Csv => output.table.to_csv(),
        Format::Json => {
            let embedded = RunManifest {
                wall_time: None,
                ..manifest.clone()
            };
            let rows: Vec<Vec<serde_json::Value>> = output
                .table
                .rows
                .iter()
                .map(|r| r.iter().map(|&x| to_json_value(x)).collect())
                .collect();
            let doc = serde_json::json!({
                "manifest": embedded,
                "columns": output.table.columns,
                "rows": rows,
            });
            let mut s = serde_json::to_string_pretty(&doc).expect("serialisable");
            s.push('\n');
            s
        }
    }
}

/// Runs a resolved configuration, writing the data file and its manifest.
pub fn run(cfg: &RunConfig) -> Result<RunManifest, CliError> {
    let start = Instant::now();
    let output = execute(cfg)?;
    let mut manifest = RunManifest {
        command: cfg.command,
        config_echo: cfg.values.clone(),
        seed: cfg.params.seed,
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        wall_time: None,
        warnings: output.warnings.clone(),
        summary: output.summary.clone(),
    };
    let data = render(cfg, &output, &manifest);
    let io = |e: std::io::Error| CliError::Compute(Error::Numerical(format!("write failed: {e}")));
    std::fs::write(&cfg.output_path, data).map_err(io)?;
    manifest.wall_time = Some(start.elapsed().as_secs_f64());
    let mut text = serde_json::to_string_pretty(&manifest).expect("serialisable");
    text.push('\n');
    std::fs::write(manifest_path(&cfg.output_path), text).map_err(io)?;
    match output.violation {
        Some(v) => Err(CliError::Contract(v)),
        None => Ok(manifest),
    }
}

/// Applies the thread override, if set.
pub fn configure_threads() -> Result<(), CliError> {
    if let Ok(v) = std::env::var(THREADS_ENV) {
        let n: usize = v
            .trim()
            .parse()
            .map_err(|_| CliError::Config(format!("{THREADS_ENV}: cannot parse {v:?}")))?;
        // A pool may already exist when called twice in one process; keep it.
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global();
    }
    Ok(())
}

/// Parses `args` (including the program name), runs, and returns the exit status.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let args = match Args::try_parse_from(args) {
        Ok(a) => a,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let result = configure_threads()
        .and_then(|_| RunConfig::resolve(&args))
        .and_then(|cfg| run(&cfg).map(|m| (cfg, m)));
    match result {
        Ok((cfg, m)) => {
            let mut line = format!("wrote {}", cfg.output_path.display());
            for (k, v) in &m.summary {
                let _ = write!(line, "  {k}={v:e}");
            }
            println!("{line}");
            for w in &m.warnings {
                eprintln!("warning: {w}");
            }
            0
        }
        Err(e) => {
            eprintln!("{e}");
            e.exit_code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_text() {
        let m = parse_config_text("# c\n a = 1.5 \n\ntaus=0.1,0.2 # x\n").unwrap();
        assert_eq!(m["a"], "1.5");
        assert_eq!(m["taus"], "0.1,0.2");
        assert!(parse_config_text("oops").is_err());
    }

    #[test]
    fn grids() {
        assert_eq!(
            parse_real_grid("g", "linspace(0,1,3)").unwrap(),
            vec![0.0, 0.5, 1.0]
        );
        assert_eq!(parse_real_grid("g", "1, 2.5").unwrap(), vec![1.0, 2.5]);
        assert!(parse_real_grid("g", "linspace(0,1,0)").is_err());
        let z = parse_complex_grid("z", "1, 2i, 0.5-0.3i").unwrap();
        assert_eq!(
            z,
            vec![
                Complex64::new(1.0, 0.0),
                Complex64::new(0.0, 2.0),
                Complex64::new(0.5, -0.3)
            ]
        );
        assert!(parse_complex_grid("z", "1+").is_err());
    }

    #[test]
    fn csv_round_trips() {
        let mut t = Table::new(&["x"]);
        t.rows.push(vec![0.1 + 0.2]);
        t.rows.push(vec![1e-300]);
        let csv = t.to_csv();
        let back: Vec<f64> = csv.lines().skip(1).map(|l| l.parse().unwrap()).collect();
        assert_eq!(back, vec![0.1 + 0.2, 1e-300]);
    }
}
