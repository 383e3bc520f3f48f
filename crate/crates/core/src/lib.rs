//! Variance-reduced stochastic approximation for strongly monotone stochastic
//! quasi-variational inequalities, with exact and budgeted inexact projections
//! onto moving constraint sets.
//!
//! Everything numerical is generic over [`Real`] (`f32` or `f64`); the
//! aliases at the crate root fix `f64`.

// Negated comparisons are how NaN inputs get rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod blood;
pub mod config;
pub mod error;
pub mod estimate;
mod linalg;
pub mod problem;
pub mod projection;
pub mod scalar;
pub mod schedule;
pub mod solver;
pub mod stochastic;
pub mod theory;

pub use config::{ProjectionMode, SolverConfig};
pub use error::{Result, SqviError};
pub use problem::{Payoffs, QviProblem};
pub use projection::{
    project_box, project_exact, project_inexact, AcceleratedPrimalDual, MovingSet, Projector,
};
pub use scalar::Real;
pub use solver::{natural_residual, solve, IterateRecord, RunReport};
pub use stochastic::{batch_average, SampleStream, StochasticOracle};
pub use theory::{theoretical_error_bound, StrongMonotonicityData};

pub type Problem = QviProblem<f64>;
pub type Config = SolverConfig<f64>;
pub type Report = RunReport<f64>;
pub type Record = IterateRecord<f64>;
pub type Set = MovingSet<f64>;
pub type Constants = StrongMonotonicityData<f64>;
pub type Market = blood::BloodMarket<f64>;
