//! Bayesian updating of Halbach-array magnet models.
//!
//! Block magnetizations measured before assembly (Helmholtz coil) define a
//! Gaussian prior over the magnetization parameter vector. Flux-density
//! observations taken in the assembled magnet are fused with it, either in
//! closed form when the forward model is linear or with a preconditioned
//! Crank–Nicolson Metropolis–Hastings chain when it is not.
//!
//! Module map:
//!
//! - [`geometry`]: the 16-block cross-section, nominal magnetization and
//!   parameter layout.
//! - [`field`]: closed-form surface-charge fields of 2D blocks and 3D prisms,
//!   and assembly of the explicit linear operator.
//! - [`fem`]: nonlinear 2D vector-potential finite elements with an iron ring,
//!   plus the linearized sensitivity solve.
//! - [`observables`]: pointwise flux density and bore-circle Fourier
//!   coefficients.
//! - [`prior`]: Helmholtz-coil records, Gaussian prior fitting and the
//!   Anderson–Darling normality test.
//! - [`inference`]: conjugate Gaussian update and pCN sampling.
//! - [`harness`]: synthetic-truth validation and application-style runs.
//! - [`io`] and [`cli`]: persistence formats, run configuration and the
//!   `halbach` command-line front end.

pub mod cli;
pub mod error;
pub mod fem;
pub mod field;
pub mod geometry;
pub mod harness;
pub mod inference;
pub mod io;
pub mod observables;
pub mod prior;
pub mod stats;

pub use error::{Error, Result};

/// Vacuum permeability in T·m/A.
pub const MU0: f64 = 4.0e-7 * std::f64::consts::PI;
