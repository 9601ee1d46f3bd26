//! Sequential cooperative Bayesian inference (SCBI) and its classical Bayesian
//! baseline: Sinkhorn-scaled teaching rounds, exact posterior laws on the
//! simplex, asymptotic rates, and seeded Monte Carlo experiment drivers.

// Matrix code reads most clearly with explicit index loops.
#![allow(clippy::needless_range_loop)]

pub mod cli;
pub mod error;
pub mod estimators;
pub mod gridworld;
pub mod experiments;
pub mod matrix;
pub mod measure;
pub mod seed;
pub mod simplex;
pub mod sinkhorn;

pub use error::{Error, Result};
pub use matrix::{MarginalSpec, PositiveMatrix};
pub use simplex::{LogBelief, ProbabilityVector};
