//! Pseudospectral solver for the quasi-incompressible Navier–Stokes/Cahn–Hilliard
//! system with a fractional-Laplacian free energy on the periodic torus.
//!
//! The crate is organized bottom-up:
//!
//! * [`grid`], [`field`], [`spectral`]: periodic lattices, field containers and
//!   Fourier operators (fractional Laplacian, Helmholtz split, Sobolev norms,
//!   dealiased products).
//! * [`constitutive`]: physical parameters, density/viscosity/stress closures,
//!   the double-well potential, energy and dissipation functionals.
//! * [`stepper`]: the implicit, energy-stable time step for the
//!   quasi-incompressible system, solved by Picard iteration.
//! * [`modelh`]: the matched-density (model H) reference solver.
//! * [`relent`]: relative energy between the two models and the density-ratio
//!   sweep measuring the incompressible-limit rate.

pub mod constitutive;
pub mod fft;
pub mod field;
pub mod grid;
mod kernel;
pub mod modelh;
pub mod relent;
pub mod spectral;
pub mod stepper;

use thiserror::Error;

pub use constitutive::{EnergyReport, PhysParams};
pub use field::{ScalarField, SpectralField, TensorField, VectorField};
pub use grid::TorusGrid;
pub use modelh::{ModelHSolver, ModelHState};
pub use relent::{RateReport, RelEnergyReport};
pub use spectral::Spectral;
pub use stepper::{MixtureState, PicardSettings, QuasiStepper, StepDiagnostics, StepError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpectralError {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("fields live on different grids")]
    GridMismatch,
    #[error("expected {expected} samples, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("non-finite sample in field")]
    NonFinite,
    #[error("operator order must be positive and finite, got {0}")]
    InvalidOrder(f64),
    #[error("input mean {mean:e} exceeds tolerance {tol:e}")]
    MeanNotZero { mean: f64, tol: f64 },
    #[error("arity mismatch: {0}")]
    ArityMismatch(String),
}
