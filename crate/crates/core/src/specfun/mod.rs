//! Special functions and quadrature shared by the rest of the crate.
//!
//! Everything here is a pure function of its inputs.

mod bessel;
mod gamma;
mod quadrature;
mod scaled;

pub use bessel::{
    bessel_i, bessel_i_asymptotic, bessel_i_reduced_real, bessel_i_scaled, bessel_i_series,
    SERIES_CUTOFF,
};
pub use gamma::log_gamma;
pub use quadrature::{
    integrate_interval, integrate_semiinfinite, QuadratureReport, QuadratureSpec,
};
pub use scaled::ScaledComplex;
