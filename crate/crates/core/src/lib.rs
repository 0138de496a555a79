//! Spectral verification toolkit for observability of `ż = iAz`, `y = Cz`.
//!
//! Systems are encoded by the eigenvalues of `A` and the Gram matrix of the
//! observed eigenfunctions. On top of that representation the crate
//! evaluates frequency functionals, resolvent inequalities, cluster-based
//! coercivity certificates, windowed Fourier bounds, observability integrals
//! and the boundary-observed Schrödinger equation on a square.

// negated float comparisons are how inputs reject NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod coercivity;
pub mod config;
pub mod error;
pub mod evolution;
pub mod linalg;
pub mod quadrature;
pub mod report;
pub mod scenario;
pub mod spectral;
pub mod square;
pub mod window;

pub use error::{Error, Result};
pub use spectral::{SpectralSystem, StateVector};
