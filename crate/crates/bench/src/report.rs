//! Serializable summaries.

use serde::{Deserialize, Serialize};
use sqvi::{Constants, ProjectionMode};

pub const SCHEMA: &str = "sqvi-report/1";

/// Relative tolerance for comparisons against published values.
pub const PUBLISHED_TOLERANCE: f64 = 0.01;

/// Published equilibrium and utilities for a benchmark market.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PublishedTargets {
    pub q_star: Vec<f64>,
    /// Tabulated utilities.
    pub utilities: Vec<f64>,
    /// Utilities as printed in the running text, when they disagree with the table.
    pub utilities_text: Option<Vec<f64>>,
}

impl PublishedTargets {
    pub fn example1() -> Self {
        Self {
            q_star: vec![72.81, 40.00, 78.09, 77.59],
            utilities: vec![7065.0, 40589.0],
            utilities_text: None,
        }
    }

    pub fn example2() -> Self {
        Self {
            q_star: vec![69.72, 40.00, 61.89, 70.00],
            utilities: vec![3.234401e6, 2.648865e6],
            utilities_text: Some(vec![3234401.0, 264865.0]),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PublishedComparison {
    pub targets: PublishedTargets,
    /// `(ours - target) / |target|` per coordinate.
    pub q_relative_delta: Vec<f64>,
    pub u_relative_delta: Vec<f64>,
    /// Our utilities evaluated at the published point.
    pub utilities_at_published_point: Vec<f64>,
    pub tolerance: f64,
    pub q_within_tolerance: bool,
    pub u_within_tolerance: bool,
    pub text_table_inconsistent: bool,
    pub notes: Vec<String>,
}

fn rel(ours: &[f64], target: &[f64]) -> Vec<f64> {
    ours.iter().zip(target).map(|(a, b)| (a - b) / b.abs()).collect()
}

impl PublishedComparison {
    pub fn new(
        targets: PublishedTargets,
        final_x: &[f64],
        utilities: &[f64],
        utilities_at_published_point: Vec<f64>,
        residual_at_published_point: f64,
    ) -> Self {
        let q_relative_delta = rel(final_x, &targets.q_star);
        let u_relative_delta = rel(utilities, &targets.utilities);
        let within = |d: &[f64]| d.iter().all(|x| x.abs() <= PUBLISHED_TOLERANCE);
        let text_table_inconsistent = targets
            .utilities_text
            .as_ref()
            .is_some_and(|t| rel(t, &targets.utilities).iter().any(|d| d.abs() > PUBLISHED_TOLERANCE));
        let mut notes = Vec::new();
        if !within(&q_relative_delta) {
            notes.push(format!(
                "published point differs from the computed equilibrium; natural residual at the published point is {residual_at_published_point:.6e}"
            ));
        }
        if text_table_inconsistent {
            notes.push("published text and table utilities disagree; the table value is the target".into());
        }
        Self {
            q_within_tolerance: within(&q_relative_delta),
            u_within_tolerance: within(&u_relative_delta),
            targets,
            q_relative_delta,
            u_relative_delta,
            utilities_at_published_point,
            tolerance: PUBLISHED_TOLERANCE,
            text_table_inconsistent,
            notes,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeSummary {
    pub mode: ProjectionMode,
    pub seeds: Vec<u64>,
    /// Final point of the first replication.
    pub final_x: Vec<f64>,
    pub final_utilities: Option<Vec<f64>>,
    pub natural_residual: f64,
    /// Largest `g_i(x, x)` at the final point (`<= 0` means `x ∈ K(x)`).
    pub self_violation: f64,
    pub iterations: usize,
    pub total_samples: u64,
    pub total_inner_iterations: u64,
    pub inner_iterations_used: u64,
    pub wall_seconds: f64,
    pub mean_wall_seconds: f64,
    pub mean_final_error: Option<f64>,
    pub schedule_truncated: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeComparison {
    pub final_point_distance: f64,
    /// Absent when the inexact run took no measurable time.
    pub wall_time_ratio_exact_over_inexact: Option<f64>,
    pub utility_delta: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSettings {
    pub eta: f64,
    pub alpha_bar: f64,
    pub rho: f64,
    pub horizon: usize,
    pub seed: u64,
    pub replications: usize,
    pub batch_cap: Option<u64>,
    pub residual_tol: Option<f64>,
    pub noise_scale: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryReport {
    pub schema: String,
    pub problem: String,
    pub settings: RunSettings,
    pub constants: Constants,
    pub modes: Vec<ModeSummary>,
    pub comparison: Option<ModeComparison>,
    pub published: Option<PublishedComparison>,
    pub warnings: Vec<String>,
}
