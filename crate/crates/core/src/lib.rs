//! Numerical laboratory for the diffusing complex Wishart ensemble.
//!
//! The crate is organised around four computational layers that can be
//! checked against one another:
//!
//! * [`diffusion`] simulates the matrix Brownian motion `K(τ)` and estimates
//!   spectra and averaged characteristic polynomials by Monte Carlo.
//! * [`resolvent`] solves the large-N problem: the implicit cubic for the
//!   resolvent, the shock (edge) equation and the characteristic-curve
//!   reconstruction of the density.
//! * [`charpoly`] evaluates the exact finite-N averaged characteristic
//!   polynomial through its Bessel-kernel integral representation.
//! * [`asymptotics`] covers the hard-wall critical point: saddle points, the
//!   Bessoid function and the symmetric Pearcey reduction.
//!
//! [`specfun`] holds the special functions and quadrature shared by all of
//! them, and [`cli`] wires everything into a reproducible batch runner.

pub mod asymptotics;
pub mod charpoly;
pub mod cli;
pub mod diffusion;
pub mod error;
pub mod poly;
pub mod resolvent;
pub mod specfun;

pub use error::{Error, Result};
pub use num_complex::Complex64;
