//! The variance-reduced outer loop.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::config::{ProjectionMode, SolverConfig};
use crate::error::{Result, SqviError};
use crate::problem::QviProblem;
use crate::projection::{feasibility_probe, project_exact, Projector};
use crate::scalar::{cst, dist, Real};
use crate::schedule::{capped_batch_size, inner_budget};
use crate::stochastic::batch_average;

/// Inner-solver violation above which the moving set is probed for emptiness.
const INFEASIBILITY_PROBE_TRIGGER: f64 = 1e-6;

/// Outcome of outer iteration `k`, i.e. the point `x_{k+1}` it produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct IterateRecord<T: Real> {
    pub k: usize,
    pub x: Vec<T>,
    pub batch_size: u64,
    /// `t_k` in inexact mode, 0 in exact mode.
    pub inner_budget: u64,
    pub inner_iterations_used: usize,
    /// Cumulative solver time up to this iteration; diagnostics are excluded.
    pub wall_nanos: u64,
    pub residual: Option<T>,
    pub error_to_reference: Option<T>,
    pub utilities: Option<Vec<T>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct RunReport<T: Real> {
    pub initial_x: Vec<T>,
    pub initial_error: Option<T>,
    pub records: Vec<IterateRecord<T>>,
    pub final_x: Vec<T>,
    pub config_echo: SolverConfig<T>,
    /// `Σ N_k` over the iterations performed.
    pub total_samples: u64,
    /// `Σ t_k` over the iterations performed (0 in exact mode).
    pub total_inner_iterations: u64,
    /// Inner iterations actually executed, summed over blocks.
    pub inner_iterations_used: u64,
    /// Set when `batch_cap` cut some `N_k` below the schedule.
    pub schedule_truncated: bool,
    /// Warnings raised while validating the configuration.
    pub warnings: Vec<String>,
}

impl<T: Real> RunReport<T> {
    /// Copy with every timing field zeroed, for reproducibility comparisons.
    pub fn without_timing(&self) -> Self {
        let mut r = self.clone();
        for rec in &mut r.records {
            rec.wall_nanos = 0;
        }
        r
    }

    pub fn final_residual(&self) -> Option<T> {
        self.records.last().and_then(|r| r.residual)
    }
}

/// `‖x - P_{K(x)}[x - ηF(x)]‖` with the exact projection.
pub fn natural_residual<T: Real>(problem: &QviProblem<T>, x: &[T], eta: T) -> Result<T> {
    let f = problem.oracle.mean(x)?;
    let v: Vec<T> = x.iter().zip(&f).map(|(&xi, &fi)| xi - eta * fi).collect();
    let p = project_exact(&problem.moving_set, x, &v)?;
    Ok(dist(x, &p.point))
}

fn tag_iteration(err: SqviError, k: usize) -> SqviError {
    match err {
        SqviError::InfeasibleSet { block, iteration: None } => SqviError::InfeasibleSet {
            block,
            iteration: Some(k),
        },
        other => other,
    }
}

/// Runs the method for `config.horizon` iterations (fewer if `residual_tol`
/// is met).
pub fn solve<T: Real>(
    problem: &QviProblem<T>,
    config: &SolverConfig<T>,
    inner: &dyn Projector<T>,
) -> Result<RunReport<T>> {
    let warnings = config.validate()?;
    let set = &problem.moving_set;
    let track_residual = config.track_residual || config.residual_tol.is_some();
    if track_residual && !problem.oracle.has_mean() {
        return Err(SqviError::InvalidConfig(
            "residual tracking needs an oracle with an exact mean".into(),
        ));
    }

    let mut x = match &config.initial_point {
        Some(x0) => {
            set.check_dim(x0)?;
            if !set.in_box(x0) {
                return Err(SqviError::InvalidConfig("initial point lies outside the box".into()));
            }
            x0.clone()
        }
        None => set.midpoint(),
    };
    let initial_x = x.clone();
    let reference = problem.reference_solution.as_deref();
    let initial_error = reference.map(|r| dist(&x, r));

    let alpha = config.alpha_bar;
    let keep = T::one() - alpha;
    let mut records = Vec::with_capacity(config.horizon);
    let mut total_samples: u64 = 0;
    let mut total_inner: u64 = 0;
    let mut used_inner: u64 = 0;
    let mut truncated = false;
    let mut previous_y: Option<Vec<T>> = None;
    let mut elapsed: u128 = 0;

    for k in 0..config.horizon {
        let started = Instant::now();
        let (n_k, capped) = capped_batch_size(k, config.rho, config.batch_cap)?;
        truncated |= capped;
        let g = batch_average(problem.oracle.as_ref(), &x, n_k, config.seed, k as u64)?;
        let v: Vec<T> = x.iter().zip(&g).map(|(&xi, &gi)| xi - config.eta * gi).collect();

        let (y, budget, used) = match config.mode {
            ProjectionMode::Exact => {
                let p = project_exact(set, &x, &v).map_err(|e| tag_iteration(e, k))?;
                (p.point, 0, 0)
            }
            ProjectionMode::Inexact => {
                let t_k = inner_budget(k, config.rho)?;
                let budget = usize::try_from(t_k).map_err(|_| SqviError::Overflow {
                    what: "inner_budget",
                    k,
                })?;
                let res = inner.project(set, &x, &v, budget, previous_y.as_deref())?;
                if res.feasibility_violation > cst(INFEASIBILITY_PROBE_TRIGGER) {
                    if let Some(block) = feasibility_probe(set, &x).iter().position(|ok| !ok) {
                        return Err(SqviError::InfeasibleSet {
                            block,
                            iteration: Some(k),
                        });
                    }
                }
                (res.u, t_k, res.iterations)
            }
        };

        for (xi, &yi) in x.iter_mut().zip(&y) {
            *xi = keep * *xi + alpha * yi;
        }
        previous_y = Some(y);
        elapsed += started.elapsed().as_nanos();

        total_samples = total_samples.checked_add(n_k).ok_or(SqviError::Overflow {
            what: "total_samples",
            k,
        })?;
        total_inner = total_inner.saturating_add(budget);
        used_inner = used_inner.saturating_add(used as u64);

        let residual = if track_residual {
            Some(natural_residual(problem, &x, config.eta)?)
        } else {
            None
        };
        let utilities = match &problem.payoffs {
            Some(p) => Some(p.utilities(&x)?),
            None => None,
        };
        records.push(IterateRecord {
            k,
            x: x.clone(),
            batch_size: n_k,
            inner_budget: budget,
            inner_iterations_used: used,
            wall_nanos: u64::try_from(elapsed).unwrap_or(u64::MAX),
            residual,
            error_to_reference: reference.map(|r| dist(&x, r)),
            utilities,
        });

        if let (Some(tol), Some(r)) = (config.residual_tol, residual) {
            if r <= tol {
                break;
            }
        }
    }

    if truncated {
        log::warn!("batch_cap truncated the sample schedule");
    }
    Ok(RunReport {
        initial_x,
        initial_error,
        final_x: x,
        records,
        config_echo: config.clone(),
        total_samples,
        total_inner_iterations: total_inner,
        inner_iterations_used: used_inner,
        schedule_truncated: truncated,
        warnings,
    })
}
