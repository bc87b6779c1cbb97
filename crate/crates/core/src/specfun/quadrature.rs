//! Globally adaptive Gauss–Kronrod (7/15) quadrature for complex integrands.

use num_complex::Complex64;

use crate::error::{Error, Result};

// 15-point Kronrod abscissae (positive half, centre last) and weights.
const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];
// 7-point Gauss weights, for the abscissae XGK[1], XGK[3], XGK[5], XGK[7].
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

/// Tolerances and limits for one integration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureSpec {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_panels: usize,
    /// Coefficient `c` of the `exp(-c·u⁴)` decay of semi-infinite integrands.
    pub decay_hint: f64,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        QuadratureSpec {
            rel_tol: 1e-12,
            abs_tol: 1e-15,
            max_panels: 4000,
            decay_hint: 0.5,
        }
    }
}

impl QuadratureSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.rel_tol > 0.0) || !(self.abs_tol > 0.0) || self.max_panels < 1 {
            return Err(Error::InvalidParams(format!(
                "quadrature spec needs rel_tol > 0, abs_tol > 0, max_panels ≥ 1: {self:?}"
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureReport {
    pub value: Complex64,
    pub error_bound: f64,
    /// `∫|f|`, the scale against which rounding in `value` should be judged.
    pub abs_integral: f64,
    pub panels: usize,
    /// Truncation point actually used (the right end of the last panel).
    pub upper_limit: f64,
}

impl QuadratureReport {
    /// Relative size of the rounding noise carried by `value`.
    pub fn cancellation_ratio(&self) -> f64 {
        if self.value.norm() == 0.0 {
            return f64::INFINITY;
        }
        self.abs_integral / self.value.norm()
    }
}

#[derive(Clone, Copy)]
struct Panel {
    a: f64,
    b: f64,
    value: Complex64,
    error: f64,
    abs: f64,
}

fn gauss_kronrod<F: Fn(f64) -> Complex64>(f: &F, a: f64, b: f64) -> Panel {
    let centre = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(centre);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    let mut abs = fc.norm() * WGK[7];
    for j in 0..7 {
        let dx = half * XGK[j];
        let f1 = f(centre - dx);
        let f2 = f(centre + dx);
        kronrod += (f1 + f2) * WGK[j];
        abs += (f1.norm() + f2.norm()) * WGK[j];
        if j % 2 == 1 {
            gauss += (f1 + f2) * WG[j / 2];
        }
    }
    let value = kronrod * half;
    let abs = abs * half.abs();
    let mut error = ((kronrod - gauss) * half).norm();
    // Rounding floor: no estimate below what the arithmetic can resolve.
    error = error.max(50.0 * f64::EPSILON * abs);
    Panel {
        a,
        b,
        value,
        error,
        abs,
    }
}

fn totals(panels: &[Panel]) -> (Complex64, f64, f64) {
    // Panels are summed in interval order so results do not depend on the
    // bisection history.
    let mut sorted: Vec<&Panel> = panels.iter().collect();
    sorted.sort_by(|p, q| p.a.total_cmp(&q.a));
    let mut value = Complex64::new(0.0, 0.0);
    let mut error = 0.0;
    let mut abs = 0.0;
    for p in sorted {
        value += p.value;
        error += p.error;
        abs += p.abs;
    }
    (value, error, abs)
}

/// `∫ f` over `[breakpoints[0], breakpoints[last]]`, starting from one panel per
/// breakpoint interval and bisecting the worst panel until the global error
/// estimate meets `max(abs_tol, rel_tol·|I|)`.
///
/// The reported pair is the one with the smallest error bound seen, so
/// allowing more panels can only tighten the bound.
pub fn integrate_interval<F: Fn(f64) -> Complex64>(
    f: F,
    breakpoints: &[f64],
    spec: &QuadratureSpec,
) -> Result<QuadratureReport> {
    spec.validate()?;
    if breakpoints.len() < 2 {
        return Err(Error::InvalidParams(
            "need at least two breakpoints".to_string(),
        ));
    }
    if breakpoints.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidParams(
            "breakpoints must be strictly increasing".to_string(),
        ));
    }
    let upper_limit = *breakpoints.last().unwrap();
    let mut panels: Vec<Panel> = breakpoints
        .windows(2)
        .map(|w| gauss_kronrod(&f, w[0], w[1]))
        .collect();

    let (mut value, mut error, mut abs) = totals(&panels);
    let mut best = (value, error, abs, panels.len());
    loop {
        if !(value.re.is_finite() && value.im.is_finite()) {
            return Err(Error::Numerical(format!(
                "integrand produced non-finite values (estimate {value})"
            )));
        }
        if error < best.1 {
            best = (value, error, abs, panels.len());
        }
        let target = spec.abs_tol.max(spec.rel_tol * value.norm());
        let floor = 50.0 * f64::EPSILON * abs * 2.0;
        if error <= target || error <= floor {
            return Ok(QuadratureReport {
                value: best.0,
                error_bound: best.1,
                abs_integral: best.2,
                panels: best.3,
                upper_limit,
            });
        }
        if panels.len() + 1 > spec.max_panels {
            return Err(Error::Convergence {
                estimate: best.0,
                error_bound: best.1,
                panels: best.3,
            });
        }
        let worst = panels
            .iter()
            .enumerate()
            .max_by(|(_, p), (_, q)| p.error.total_cmp(&q.error))
            .map(|(i, _)| i)
            .unwrap();
        let p = panels.swap_remove(worst);
        let mid = 0.5 * (p.a + p.b);
        if !(mid > p.a && mid < p.b) {
            return Err(Error::Convergence {
                estimate: best.0,
                error_bound: best.1,
                panels: best.3,
            });
        }
        panels.push(gauss_kronrod(&f, p.a, mid));
        panels.push(gauss_kronrod(&f, mid, p.b));
        let t = totals(&panels);
        value = t.0;
        error = t.1;
        abs = t.2;
    }
}

/// Working-precision exponent budget for truncating `[0, ∞)`.
const TRUNCATION_BUDGET: f64 = 40.0;

/// `∫₀^∞ f(u) du` for integrands decaying like `exp(-c·u⁴)` with `c = spec.decay_hint`.
///
/// The cut `U` starts from `c·U⁴ = 40` and is pushed outwards until the
/// integrand has fallen `e^{-40}` below its sampled peak on a short probe
/// beyond `U`, which absorbs the linear and quadratic growth terms the hint
/// does not describe.
pub fn integrate_semiinfinite<F: Fn(f64) -> Complex64>(
    f: F,
    spec: &QuadratureSpec,
) -> Result<QuadratureReport> {
    spec.validate()?;
    if !(spec.decay_hint > 0.0) {
        return Err(Error::InvalidParams(format!(
            "decay_hint must be positive, got {}",
            spec.decay_hint
        )));
    }
    let mut upper = (TRUNCATION_BUDGET / spec.decay_hint).powf(0.25);
    let mut peak = 0.0f64;
    let threshold = (-TRUNCATION_BUDGET).exp();
    for _ in 0..40 {
        for k in 1..=64 {
            peak = peak.max(f(upper * k as f64 / 64.0).norm());
        }
        let tail = [1.0, 1.1, 1.25]
            .iter()
            .map(|m| f(upper * m).norm())
            .fold(0.0f64, f64::max);
        if peak == 0.0 || tail <= threshold * peak {
            break;
        }
        upper *= 1.25;
    }
    let initial = 8;
    let breaks: Vec<f64> = (0..=initial)
        .map(|k| upper * k as f64 / initial as f64)
        .collect();
    integrate_interval(f, &breaks, spec)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn real<F: Fn(f64) -> f64>(f: F) -> impl Fn(f64) -> Complex64 {
        move |x| Complex64::new(f(x), 0.0)
    }

    #[test]
    fn single_panel_is_exact_for_low_degree_polynomials() {
        // K15 integrates degree ≤ 22 exactly; G7 only to 13, so the estimate may still bisect.
        let spec = QuadratureSpec::default();
        let r = integrate_interval(real(|x: f64| x.powi(20)), &[0.0, 1.0], &spec).unwrap();
        assert!((r.value.re - 1.0 / 21.0).abs() < 1e-15);
    }

    #[test]
    fn gaussian_half_line() {
        let spec = QuadratureSpec {
            decay_hint: 1e-3,
            ..Default::default()
        };
        let r = integrate_semiinfinite(real(|u: f64| (-u * u).exp()), &spec).unwrap();
        let want = std::f64::consts::PI.sqrt() / 2.0;
        assert!((r.value.re - want).abs() < 1e-12, "{}", r.value);
    }

    #[test]
    fn convergence_failure_carries_estimate() {
        let spec = QuadratureSpec {
            max_panels: 3,
            rel_tol: 1e-14,
            ..Default::default()
        };
        let err = integrate_interval(real(|x: f64| x.abs().sqrt()), &[-1.0, 1.0], &spec);
        match err {
            Err(Error::Convergence {
                estimate,
                error_bound,
                ..
            }) => {
                assert!((estimate.re - 4.0 / 3.0).abs() < 1e-2);
                assert!(error_bound > 0.0);
            }
            other => panic!("expected convergence failure, got {other:?}"),
        }
    }

    #[test]
    fn rejects_bad_specs() {
        let bad = QuadratureSpec {
            rel_tol: 0.0,
            ..Default::default()
        };
        assert!(integrate_interval(real(|x| x), &[0.0, 1.0], &bad).is_err());
        let bad = QuadratureSpec {
            max_panels: 0,
            ..Default::default()
        };
        assert!(integrate_interval(real(|x| x), &[0.0, 1.0], &bad).is_err());
        assert!(integrate_interval(real(|x| x), &[1.0, 0.0], &Default::default()).is_err());
    }
}
