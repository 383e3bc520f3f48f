//! Experiment harness for the `sqvi` solver: problem selection, replicated
//! runs, rate studies and the CSV/JSON artifacts behind the result tables.

// Negated comparisons are how NaN inputs get rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod experiment;
pub mod output;
pub mod problems;
pub mod report;
pub mod synthetic;

pub use error::{BenchError, Result};
pub use experiment::{compare, rate_study, run, Emit, ExperimentConfig, Outcome, RateStudy};
pub use problems::ProblemSpec;
pub use report::{PublishedComparison, PublishedTargets, SummaryReport};
pub use synthetic::{make_synthetic, SyntheticSpec};
