//! Modified Bessel function of the first kind, `I_ν(x)`, at complex argument.
//!
//! One implementation serves every caller: the ascending series for
//! `|x| ≤ SERIES_CUTOFF` and the two-exponential Hankel expansion beyond it.
//! The left half-plane is reached through `I_ν(x e^{±iπ}) = e^{±iπν} I_ν(x)`.

use std::f64::consts::PI;

use num_complex::Complex64;

use super::gamma::ln_gamma_pos;
use super::scaled::ScaledComplex;
use crate::error::{Error, Result};

/// Switch between the ascending series and the large-argument expansion.
pub const SERIES_CUTOFF: f64 = 20.0;

/// Beyond this `|Re x|` plain `f64` values overflow, so `bessel_i` hands back
/// a non-zero `log_scale`.
const OVERFLOW_GUARD: f64 = 650.0;

const SERIES_MAX_TERMS: usize = 2000;

fn check_order(order: f64) -> Result<()> {
    if !(order > -1.0) || !order.is_finite() {
        return Err(Error::Domain(format!(
            "Bessel order must satisfy order > -1, got {order}"
        )));
    }
    Ok(())
}

fn check_arg(x: Complex64) -> Result<()> {
    if !(x.re.is_finite() && x.im.is_finite()) {
        return Err(Error::Domain(format!("non-finite Bessel argument {x}")));
    }
    Ok(())
}

fn use_asymptotic(order: f64, r: f64) -> bool {
    r > SERIES_CUTOFF && r > 0.5 * order * order
}

/// Double-double number `hi + lo`, enough to carry the series through the
/// `e^{|x|−|Re x|}` cancellation it suffers on the oscillatory side.
#[derive(Clone, Copy, Debug)]
struct Dd {
    hi: f64,
    lo: f64,
}

fn two_sum(a: f64, b: f64) -> Dd {
    let s = a + b;
    let bb = s - a;
    let e = (a - (s - bb)) + (b - bb);
    Dd { hi: s, lo: e }
}

fn quick_two_sum(a: f64, b: f64) -> Dd {
    let s = a + b;
    Dd {
        hi: s,
        lo: b - (s - a),
    }
}

fn two_prod(a: f64, b: f64) -> Dd {
    let p = a * b;
    Dd {
        hi: p,
        lo: a.mul_add(b, -p),
    }
}

impl Dd {
    const ZERO: Dd = Dd { hi: 0.0, lo: 0.0 };

    fn from(x: f64) -> Dd {
        Dd { hi: x, lo: 0.0 }
    }

    fn add(self, o: Dd) -> Dd {
        let s = two_sum(self.hi, o.hi);
        let t = two_sum(self.lo, o.lo);
        let s = quick_two_sum(s.hi, s.lo + t.hi);
        quick_two_sum(s.hi, s.lo + t.lo)
    }

    fn neg(self) -> Dd {
        Dd {
            hi: -self.hi,
            lo: -self.lo,
        }
    }

    fn mul(self, o: Dd) -> Dd {
        let p = two_prod(self.hi, o.hi);
        quick_two_sum(p.hi, p.lo + (self.hi * o.lo + self.lo * o.hi))
    }

    fn div(self, o: Dd) -> Dd {
        let q1 = self.hi / o.hi;
        let r = self.add(o.mul(Dd::from(q1)).neg());
        let q2 = r.hi / o.hi;
        let r = r.add(o.mul(Dd::from(q2)).neg());
        let q3 = r.hi / o.hi;
        quick_two_sum(q1, q2).add(Dd::from(q3))
    }

    fn to_f64(self) -> f64 {
        self.hi + self.lo
    }
}

/// `Σ_k q^k / (k! Γ(k+ν+1))`, the entire part of `I_ν`, summed in
/// double-double so that alternating terms much larger than the result do
/// not swamp it. `q` is passed as exact double-double parts.
fn reduced_series_dd(order: f64, q_re: Dd, q_im: Dd) -> Complex64 {
    let (mut tr, mut ti) = (Dd::from(1.0), Dd::ZERO);
    let (mut sr, mut si) = (tr, ti);
    let qn = q_re.hi.hypot(q_im.hi);
    let mut peak = 1.0f64;
    for k in 1..SERIES_MAX_TERMS {
        let kf = k as f64;
        let d = two_prod(kf, kf).add(two_prod(kf, order));
        let nr = tr.mul(q_re).add(ti.mul(q_im).neg());
        let ni = tr.mul(q_im).add(ti.mul(q_re));
        tr = nr.div(d);
        ti = ni.div(d);
        sr = sr.add(tr);
        si = si.add(ti);
        let size = tr.hi.hypot(ti.hi);
        peak = peak.max(size);
        let total = sr.hi.hypot(si.hi);
        if kf * kf > qn && (size <= 1e-20 * total || size <= 1e-34 * peak) {
            break;
        }
    }
    let norm = (-ln_gamma_pos(order + 1.0)).exp();
    Complex64::new(sr.to_f64() * norm, si.to_f64() * norm)
}

fn reduced_series(order: f64, q: Complex64) -> Complex64 {
    reduced_series_dd(order, Dd::from(q.re), Dd::from(q.im))
}

/// `x²/4` kept exact in double-double.
fn quarter_square(x: Complex64) -> (Dd, Dd) {
    let re = two_prod(x.re, x.re).add(two_prod(x.im, x.im).neg());
    let im = two_prod(x.re, x.im);
    let q = Dd::from(0.25);
    (re.mul(q), im.mul(Dd::from(0.5)))
}

/// Ascending series `I_ν(x) = (x/2)^ν Σ (x²/4)^k / (k! Γ(k+ν+1))`.
///
/// Accurate for moderate `|x|`; exposed separately so the two expansions can
/// be cross-checked.
pub fn bessel_i_series(order: f64, x: Complex64) -> Result<Complex64> {
    check_order(order)?;
    check_arg(x)?;
    let half = x * 0.5;
    let (q_re, q_im) = quarter_square(x);
    let sum = reduced_series_dd(order, q_re, q_im);
    if x == Complex64::new(0.0, 0.0) {
        return if order == 0.0 {
            Ok(sum)
        } else if order > 0.0 {
            Ok(Complex64::new(0.0, 0.0))
        } else {
            Err(Error::Singular(format!(
                "I_{order}(0) is infinite for negative order"
            )))
        };
    }
    Ok((half.ln() * order).exp() * sum)
}

/// Hankel sums `(Σ (-1)^k a_k / x^k, Σ a_k / x^k)` truncated at their smallest term.
fn hankel_sums(order: f64, x: Complex64) -> (Complex64, Complex64) {
    let mu = 4.0 * order * order;
    let inv = x.inv();
    let mut coeff = Complex64::new(1.0, 0.0);
    let mut alt = coeff;
    let mut plain = coeff;
    let mut last = f64::INFINITY;
    for k in 1..200 {
        let kf = k as f64;
        let odd = 2.0 * kf - 1.0;
        coeff *= inv * ((mu - odd * odd) / (8.0 * kf));
        let size = coeff.norm();
        if size > last || size == 0.0 {
            break;
        }
        let sign = if k % 2 == 1 { -1.0 } else { 1.0 };
        alt += coeff * sign;
        plain += coeff;
        last = size;
        if size < 1e-17 * plain.norm() {
            break;
        }
    }
    (alt, plain)
}

/// `e^{-Re x} I_ν(x)` from the large-argument expansion, valid for `Re x ≥ 0`.
fn asymptotic_right_half_scaled(order: f64, x: Complex64) -> Complex64 {
    let (alt, plain) = hankel_sums(order, x);
    let root = (x * (2.0 * PI)).sqrt();
    let sigma = if x.im >= 0.0 { 1.0 } else { -1.0 };
    let growing = Complex64::from_polar(1.0, x.im) * alt / root;
    // Recessive exponential; matters near the imaginary axis.
    let phase = Complex64::new(0.0, sigma) * Complex64::from_polar(1.0, sigma * PI * order);
    let decaying = phase * Complex64::from_polar((-2.0 * x.re).exp(), -x.im) * plain / root;
    growing + decaying
}

/// Continuation factor `e^{±iπν}` mapping `I_ν(-x)` to `I_ν(x)` for `Re x < 0`.
fn reflection_phase(order: f64, x: Complex64) -> Complex64 {
    let sigma = if x.im >= 0.0 { 1.0 } else { -1.0 };
    Complex64::from_polar(1.0, sigma * PI * order)
}

/// Large-argument expansion on its own, returned as `e^{-|Re x|} I_ν(x)`.
pub fn bessel_i_asymptotic(order: f64, x: Complex64) -> Result<Complex64> {
    check_order(order)?;
    check_arg(x)?;
    if x.re >= 0.0 {
        Ok(asymptotic_right_half_scaled(order, x))
    } else {
        Ok(reflection_phase(order, x) * asymptotic_right_half_scaled(order, -x))
    }
}

/// `I_ν(x)` with the factor `e^{|Re x|}` always split off into `log_scale`.
///
/// This is the form integrands use, so the Bessel growth can be combined with
/// Gaussian or quartic decay before anything is exponentiated.
pub fn bessel_i_scaled(order: f64, x: Complex64) -> Result<ScaledComplex> {
    check_order(order)?;
    check_arg(x)?;
    let scale = x.re.abs();
    let r = x.norm();
    let mantissa = if use_asymptotic(order, r) {
        bessel_i_asymptotic(order, x)?
    } else {
        bessel_i_series(order, x)? * (-scale).exp()
    };
    Ok(ScaledComplex::new(mantissa, scale))
}

/// Modified Bessel function of the first kind `I_order(x)`.
///
/// `log_scale` of the result is zero unless `|Re x| > 650`, where the value
/// itself would overflow; callers that can cope with scaled values should
/// prefer [`bessel_i_scaled`].
pub fn bessel_i(order: f64, x: Complex64) -> Result<ScaledComplex> {
    let s = bessel_i_scaled(order, x)?;
    if x.re.abs() > OVERFLOW_GUARD {
        Ok(s)
    } else {
        Ok(ScaledComplex::new(s.to_complex(), 0.0))
    }
}

/// Real reduced Bessel function `Σ_k w^k / (k! Γ(k+ν+1))`.
///
/// For `w = x²/4` this equals `(x/2)^{-ν} I_ν(x)`; it is entire in `w` and
/// real on the real axis, which makes it the natural kernel when the spectral
/// variable is real. Negative `w` is the oscillatory (`J_ν`) side. Large
/// positive `w` is returned with `log_scale = 2√w`.
pub fn bessel_i_reduced_real(order: f64, w: f64) -> Result<ScaledComplex> {
    check_order(order)?;
    if !w.is_finite() {
        return Err(Error::Domain(format!("non-finite reduced argument {w}")));
    }
    let c = 2.0 * w.abs().sqrt();
    if !use_asymptotic(order, c) {
        let v = reduced_series(order, Complex64::new(w, 0.0)).re;
        return Ok(ScaledComplex::new(Complex64::new(v, 0.0), 0.0));
    }
    // (c/2)^{-ν}
    let power = (-order * (0.5 * c).ln()).exp();
    if w > 0.0 {
        // e^{-c} I_ν(c); the recessive term is below double precision here.
        let (alt, _) = hankel_sums(order, Complex64::new(c, 0.0));
        let v = alt.re / (2.0 * PI * c).sqrt();
        Ok(ScaledComplex::new(Complex64::new(v * power, 0.0), c))
    } else {
        // J_ν(c) ~ √(2/(πc)) [P cos χ − Q sin χ]
        let (p, q) = hankel_pq(order, c);
        let chi = c - 0.5 * order * PI - 0.25 * PI;
        let j = (2.0 / (PI * c)).sqrt() * (p * chi.cos() - q * chi.sin());
        Ok(ScaledComplex::new(Complex64::new(j * power, 0.0), 0.0))
    }
}

/// `P(ν,c) = Σ (-1)^k a_{2k} / c^{2k}` and `Q(ν,c) = Σ (-1)^k a_{2k+1} / c^{2k+1}`.
fn hankel_pq(order: f64, c: f64) -> (f64, f64) {
    let mu = 4.0 * order * order;
    let mut coeff = 1.0;
    let mut p = 1.0;
    let mut q = 0.0;
    let mut last = f64::INFINITY;
    for k in 1..200 {
        let kf = k as f64;
        let odd = 2.0 * kf - 1.0;
        coeff *= (mu - odd * odd) / (8.0 * kf * c);
        let size = coeff.abs();
        if size > last || size == 0.0 {
            break;
        }
        // a_k/c^k contributes to P when k even, to Q when k odd, with sign (-1)^{⌊k/2⌋}.
        let sign = if (k / 2) % 2 == 0 { 1.0 } else { -1.0 };
        if k % 2 == 0 {
            p += sign * coeff;
        } else {
            q += sign * coeff;
        }
        last = size;
        if size < 1e-17 {
            break;
        }
    }
    (p, q)
}
