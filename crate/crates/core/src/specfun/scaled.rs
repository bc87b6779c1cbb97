use std::fmt;
use std::ops::Mul;

use num_complex::Complex64;

/// A complex number stored as `mantissa · exp(log_scale)`.
///
/// Used wherever a result can overflow `f64` before cancelling against an
/// exponentially small factor elsewhere.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScaledComplex {
    pub mantissa: Complex64,
    pub log_scale: f64,
}

impl ScaledComplex {
    pub const ZERO: ScaledComplex = ScaledComplex {
        mantissa: Complex64::new(0.0, 0.0),
        log_scale: 0.0,
    };

    pub fn new(mantissa: Complex64, log_scale: f64) -> Self {
        ScaledComplex {
            mantissa,
            log_scale,
        }
    }

    /// Builds `exp(log)` without ever forming the (possibly huge) modulus.
    pub fn from_log(log: Complex64) -> Self {
        ScaledComplex {
            mantissa: Complex64::from_polar(1.0, log.im),
            log_scale: log.re,
        }
    }

    pub fn to_complex(self) -> Complex64 {
        if self.mantissa == Complex64::new(0.0, 0.0) {
            return self.mantissa;
        }
        self.mantissa * self.log_scale.exp()
    }

    /// Moves all of the magnitude into `log_scale`, leaving a unit-modulus mantissa.
    pub fn normalized(self) -> Self {
        let m = self.mantissa.norm();
        if m == 0.0 || !m.is_finite() {
            return self;
        }
        ScaledComplex {
            mantissa: self.mantissa / m,
            log_scale: self.log_scale + m.ln(),
        }
    }

    /// Natural log of the modulus.
    pub fn ln_abs(self) -> f64 {
        self.mantissa.norm().ln() + self.log_scale
    }

    /// Principal complex logarithm.
    pub fn ln(self) -> Complex64 {
        let l = self.mantissa.ln();
        Complex64::new(l.re + self.log_scale, l.im)
    }

    pub fn is_finite(self) -> bool {
        self.mantissa.re.is_finite() && self.mantissa.im.is_finite() && !self.log_scale.is_nan()
    }

    pub fn scale(self, factor: Complex64) -> Self {
        ScaledComplex {
            mantissa: self.mantissa * factor,
            log_scale: self.log_scale,
        }
    }

    pub fn div(self, other: ScaledComplex) -> Self {
        ScaledComplex {
            mantissa: self.mantissa / other.mantissa,
            log_scale: self.log_scale - other.log_scale,
        }
    }
}

impl Mul for ScaledComplex {
    type Output = ScaledComplex;
    fn mul(self, rhs: ScaledComplex) -> ScaledComplex {
        ScaledComplex {
            mantissa: self.mantissa * rhs.mantissa,
            log_scale: self.log_scale + rhs.log_scale,
        }
    }
}

impl From<Complex64> for ScaledComplex {
    fn from(c: Complex64) -> Self {
        ScaledComplex::new(c, 0.0)
    }
}

impl fmt::Display for ScaledComplex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({})·exp({})", self.mantissa, self.log_scale)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn from_log_round_trips_moderate_values() {
        let l = Complex64::new(3.5, -1.2);
        let s = ScaledComplex::from_log(l);
        let d = (s.to_complex() - l.exp()).norm();
        assert!(d < 1e-12 * l.exp().norm());
        assert!((s.ln() - l).norm() < 1e-14);
    }

    #[test]
    fn huge_values_stay_representable() {
        let a = ScaledComplex::from_log(Complex64::new(2000.0, 0.3));
        let b = ScaledComplex::from_log(Complex64::new(-1990.0, 0.0));
        let p = (a * b).to_complex();
        assert!((p - Complex64::new(10.0, 0.3).exp()).norm() < 1e-9 * p.norm());
    }
}
