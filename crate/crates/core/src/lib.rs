//! Numerical core for impulse control of the degenerate heat equation
//! `y_t = (x^α y_x)_x` on (0,1) with a Robin condition at the degenerate end.
//!
//! Layers, bottom-up:
//! - [`grid`], [`operator`]: mesh, grid functions and the M-self-adjoint
//!   finite-volume operator;
//! - [`semigroup`]: θ-scheme propagation, a dense spectral oracle and the
//!   impulsive mild solution;
//! - [`carleman`], [`constants`]: gauge transform, frequency function,
//!   inequality checks and the closed-form observability constants;
//! - [`observability`]: ensemble checks of the one-time observation estimate;
//! - [`control`]: penalized-HUM synthesis with a matrix-free Gramian and CG;
//! - [`config`]: run configuration parsing shared with the CLI.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod carleman;
pub mod cg;
pub mod config;
pub mod constants;
pub mod control;
pub mod ensemble;
pub mod error;
pub mod grid;
pub mod io;
pub mod observability;
pub mod operator;
pub mod problem;
pub mod semigroup;
pub mod tridiag;

pub use carleman::CarlemanParams;
pub use constants::TheoryConstants;
pub use control::{KMode, SynthesisReport};
pub use error::{Error, Result};
pub use grid::{Field, Grid};
pub use observability::ObservabilityReport;
pub use operator::DegenOperator;
pub use problem::ProblemSpec;
pub use semigroup::{Scheme, SpectralDecomposition, TimeStepping, Trajectory};
