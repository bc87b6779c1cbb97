use num_complex::Complex64;
use thiserror::Error;

use crate::resolvent::BranchCertificate;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("quadrature did not converge: estimate {estimate}, error bound {error_bound:e} after {panels} panels")]
    Convergence {
        estimate: Complex64,
        error_bound: f64,
        panels: usize,
    },

    /// The integrand is dominated by cancellation; `digits_lost` estimates how
    /// many decimal digits of the double-precision result are noise.
    #[error("ill-conditioned integral: about {digits_lost:.1} digits lost to cancellation")]
    IllConditioned { digits_lost: f64 },

    #[error("branch ambiguity at z = {z}: {reason}")]
    BranchAmbiguity {
        z: Complex64,
        reason: String,
        certificate: Box<BranchCertificate>,
    },

    #[error("singular input: {0}")]
    Singular(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("empty eigenvalue pool")]
    EmptyPool,

    #[error("scaling violation: {0}")]
    ScalingViolation(String),

    #[error("normalization check failed: {0}")]
    Normalization(String),
}
