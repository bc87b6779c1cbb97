//! Large-N resolvent `G(z, τ)` of the diffusing Wishart ensemble.
//!
//! `G` solves a cubic whose physical root is picked by continuation from
//! large `|z|`. The density `ρ = −Im G(λ + i0⁺)/π` is checked against a
//! second, independent reconstruction from complex characteristics.

mod characteristics;
mod cubic;
mod density;
mod shock;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use characteristics::{
    characteristic_real_parts, characteristics_density, CharacteristicPoint,
};
pub use cubic::{cubic_coefficients, solve_g, z_from_g};
pub use density::{
    bin_masses, boundary_g, critical_exponent_probe, density, density_at, histogram_l1,
    support_moments, CriticalProbe, DensityCurve,
};
pub use shock::{
    characteristic_map, characteristic_resolvent, shock_positions, shock_positions_general,
    shock_residual, ShockFront,
};

/// A point `z` at time `τ` for the ensemble with rectangularity `r` and
/// initial eigenvalue `a²`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResolventQuery {
    pub z: Complex64,
    pub tau: f64,
    pub r: f64,
    pub a: f64,
}

impl ResolventQuery {
    pub fn new(z: Complex64, tau: f64, r: f64, a: f64) -> Result<Self> {
        let q = ResolventQuery { z, tau, r, a };
        q.validate()?;
        Ok(q)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tau > 0.0) || !self.tau.is_finite() {
            return Err(Error::InvalidParams(format!(
                "tau must be positive, got {} (use 1/(z − a²) at tau = 0)",
                self.tau
            )));
        }
        if !(self.r > 0.0 && self.r <= 1.0) {
            return Err(Error::InvalidParams(format!(
                "r must lie in (0, 1], got {}",
                self.r
            )));
        }
        if !(self.a >= 0.0) || !self.a.is_finite() {
            return Err(Error::InvalidParams(format!(
                "a must be ≥ 0, got {}",
                self.a
            )));
        }
        if !(self.z.re.is_finite() && self.z.im.is_finite()) {
            return Err(Error::InvalidParams(format!(
                "z must be finite, got {}",
                self.z
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BranchCriterion {
    /// `z` is far enough out that the root nearest `1/z` is unambiguous.
    AsymptoticOneOverZ,
    /// Continuation could not separate two roots; the sign of `Im G` did.
    UpperHalfPlaneSign,
    /// Nearest-root continuation from the large-`|z|` anchor.
    Continuity,
}

/// How a root of the cubic was chosen.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BranchCertificate {
    pub all_roots: Vec<Complex64>,
    pub chosen_index: usize,
    pub criterion: BranchCriterion,
    /// Continuation steps taken from the anchor.
    pub steps: usize,
}

impl BranchCertificate {
    pub fn chosen(&self) -> Complex64 {
        self.all_roots[self.chosen_index]
    }
}
