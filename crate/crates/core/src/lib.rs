//! Tamed exponential Euler full discretization of semilinear parabolic SPDEs
//! on `(0, 1)` with Dirichlet boundary conditions.
//!
//! The state lives on the first `N` sine modes. The polynomial drift is
//! evaluated on a uniform interior grid, tamed, and projected back; additive
//! Q-Wiener noise is diagonal in the same basis.

pub mod cli_io;
pub mod ensemble;
pub mod error;
pub mod experiments;
pub mod integrator;
pub mod model;
pub mod noise;
pub mod spectral;

pub use error::{Error, Result, Violation};
