use log::warn;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SqviError};
use crate::scalar::Real;
use crate::theory::{compute_beta, contraction_q, step_size_interval, Provenance, StrongMonotonicityData};

/// How each outer iteration computes `y_k`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProjectionMode {
    /// Exact oracle: `e_k = 0`.
    Exact,
    /// Budgeted primal-dual inner solver with `t_k` iterations.
    Inexact,
}

impl ProjectionMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            ProjectionMode::Exact => "exact",
            ProjectionMode::Inexact => "inexact",
        }
    }
}

impl std::fmt::Display for ProjectionMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for ProjectionMode {
    type Err = SqviError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exact" => Ok(ProjectionMode::Exact),
            "inexact" => Ok(ProjectionMode::Inexact),
            other => Err(SqviError::InvalidConfig(format!("unknown mode `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct SolverConfig<T: Real> {
    pub eta: T,
    pub alpha_bar: T,
    pub rho: T,
    pub horizon: usize,
    pub mode: ProjectionMode,
    pub seed: u64,
    pub constants: Option<StrongMonotonicityData<T>>,
    pub batch_cap: Option<u64>,
    pub residual_tol: Option<T>,
    /// Starting point; the midpoint of the box when absent.
    pub initial_point: Option<Vec<T>>,
    /// Compute the natural residual after every iteration.
    pub track_residual: bool,
}

impl<T: Real> SolverConfig<T> {
    pub fn new(eta: T, alpha_bar: T, rho: T, horizon: usize, mode: ProjectionMode) -> Self {
        Self {
            eta,
            alpha_bar,
            rho,
            horizon,
            mode,
            seed: 0,
            constants: None,
            batch_cap: None,
            residual_tol: None,
            initial_point: None,
            track_residual: false,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_constants(mut self, constants: StrongMonotonicityData<T>) -> Self {
        self.constants = Some(constants);
        self
    }

    pub fn with_batch_cap(mut self, cap: u64) -> Self {
        self.batch_cap = Some(cap);
        self
    }

    pub fn with_residual_tol(mut self, tol: T) -> Self {
        self.residual_tol = Some(tol);
        self.track_residual = true;
        self
    }

    pub fn with_initial_point(mut self, x0: Vec<T>) -> Self {
        self.initial_point = Some(x0);
        self
    }

    pub fn tracking_residual(mut self, on: bool) -> Self {
        self.track_residual = on;
        self
    }

    /// `q = (1 - beta) alpha_bar` when constants are present.
    pub fn q(&self) -> Option<Result<T>> {
        self.constants.as_ref().map(|c| {
            compute_beta(c.mu, c.lipschitz, c.gamma, self.eta).map(|b| contraction_q(b, self.alpha_bar))
        })
    }

    /// Checks the configuration. Violations of the rate premises are errors
    /// when the constants are known exactly and warnings when they were
    /// estimated; the returned list holds the warnings.
    pub fn validate(&self) -> Result<Vec<String>> {
        let bad = |msg: String| Err(SqviError::InvalidConfig(msg));
        if !(self.eta > T::zero()) {
            return bad(format!("eta must be positive, got {}", self.eta));
        }
        if !(self.alpha_bar > T::zero() && self.alpha_bar < T::one()) {
            return bad(format!("alpha_bar must lie in (0, 1), got {}", self.alpha_bar));
        }
        if !(self.rho > T::zero() && self.rho < T::one()) {
            return bad(format!("rho must lie in (0, 1), got {}", self.rho));
        }
        if self.horizon == 0 {
            return bad("horizon must be positive".into());
        }
        if self.batch_cap == Some(0) {
            return bad("batch_cap must be positive".into());
        }
        if let Some(tol) = self.residual_tol {
            if !(tol > T::zero()) {
                return bad(format!("residual_tol must be positive, got {tol}"));
            }
        }

        let mut warnings = Vec::new();
        let Some(c) = self.constants.as_ref() else {
            warnings.push("no problem constants supplied; step size and rho are unchecked".to_string());
            return Ok(warnings);
        };
        c.check()?;
        let strict = c.provenance == Provenance::Known;
        let mut flag = |msg: String| -> Result<()> {
            if strict {
                Err(SqviError::InvalidConfig(msg))
            } else {
                warn!("{msg}");
                warnings.push(msg);
                Ok(())
            }
        };

        match step_size_interval(c.mu, c.lipschitz, c.gamma) {
            Ok(interval) if !interval.contains(self.eta) => flag(format!(
                "eta = {} outside the admissible interval ({}, {})",
                self.eta, interval.lo, interval.hi
            ))?,
            Ok(_) => {}
            Err(e) if strict => return Err(e),
            Err(e) => flag(e.to_string())?,
        }
        match compute_beta(c.mu, c.lipschitz, c.gamma, self.eta) {
            Ok(beta) => {
                let q = contraction_q(beta, self.alpha_bar);
                if !(self.rho > T::one() - q) {
                    flag(format!("rho = {} must exceed 1 - q = {}", self.rho, T::one() - q))?;
                }
            }
            Err(e) if strict => return Err(e),
            Err(e) => flag(e.to_string())?,
        }
        Ok(warnings)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn known() -> StrongMonotonicityData<f64> {
        StrongMonotonicityData::new(1.0, 2.0, 0.0, 1.0, 1.0).unwrap()
    }

    #[test]
    fn accepts_theory_consistent_parameters() {
        // mu/L² = 0.25: beta = sqrt(0.75), q = 0.067, 1 - q = 0.933.
        let cfg = SolverConfig::new(0.25, 0.5, 0.95, 10, ProjectionMode::Exact).with_constants(known());
        assert!(cfg.validate().unwrap().is_empty());
    }

    #[test]
    fn rejects_rho_at_or_below_one_minus_q() {
        let cfg = SolverConfig::new(0.25, 0.5, 0.9, 10, ProjectionMode::Exact).with_constants(known());
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn rejects_step_outside_interval() {
        let cfg = SolverConfig::new(0.6, 0.5, 0.99, 10, ProjectionMode::Exact).with_constants(known());
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn estimated_constants_only_warn() {
        let cfg = SolverConfig::new(0.25, 0.5, 0.9, 10, ProjectionMode::Exact)
            .with_constants(known().estimated());
        let warnings = cfg.validate().unwrap();
        assert_eq!(warnings.len(), 1);
    }

    #[test]
    fn basic_ranges() {
        assert!(SolverConfig::new(0.1, 1.0, 0.9, 10, ProjectionMode::Exact).validate().is_err());
        assert!(SolverConfig::new(0.1, 0.5, 1.0, 10, ProjectionMode::Exact).validate().is_err());
        assert!(SolverConfig::new(0.1, 0.5, 0.9, 0, ProjectionMode::Exact).validate().is_err());
        assert!(SolverConfig::new(-0.1, 0.5, 0.9, 1, ProjectionMode::Exact).validate().is_err());
    }
}
