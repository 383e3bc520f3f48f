//! Parameter machinery behind the linear rate: contraction factor, admissible
//! step sizes, and the a-priori error bound with its sample-complexity
//! counterpart.

use serde::{Deserialize, Serialize};

use crate::config::{ProjectionMode, SolverConfig};
use crate::error::{Result, SqviError};
use crate::scalar::{cst, to_f64, Real};

/// Upper bound on `Σ_{k≥0} 1 / ((k+1) ln²(k+2))`.
pub const SERIES_BOUND: f64 = 3.39;

/// Whether constants were supplied exactly or estimated numerically.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    #[default]
    Known,
    Estimated,
}

/// Problem constants: strong monotonicity `mu`, Lipschitz `lipschitz`,
/// set-variation modulus `gamma`, noise scale `nu` and the inner-solver
/// constant `inner_c`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct StrongMonotonicityData<T: Real> {
    pub mu: T,
    pub lipschitz: T,
    pub gamma: T,
    pub nu: T,
    pub inner_c: T,
    #[serde(default)]
    pub provenance: Provenance,
}

impl<T: Real> StrongMonotonicityData<T> {
    pub fn new(mu: T, lipschitz: T, gamma: T, nu: T, inner_c: T) -> Result<Self> {
        let data = Self {
            mu,
            lipschitz,
            gamma,
            nu,
            inner_c,
            provenance: Provenance::Known,
        };
        data.check()?;
        Ok(data)
    }

    pub fn estimated(mut self) -> Self {
        self.provenance = Provenance::Estimated;
        self
    }

    pub fn check(&self) -> Result<()> {
        let positive = self.mu > T::zero() && self.lipschitz > T::zero() && self.inner_c > T::zero();
        if !positive {
            return Err(SqviError::InvalidConfig(
                "mu, L and C must be positive".into(),
            ));
        }
        if self.gamma < T::zero() || self.nu < T::zero() {
            return Err(SqviError::InvalidConfig(
                "gamma and nu must be nonnegative".into(),
            ));
        }
        if self.mu > self.lipschitz {
            return Err(SqviError::InvalidConfig(format!(
                "mu = {} exceeds L = {}",
                self.mu, self.lipschitz
            )));
        }
        Ok(())
    }

    /// `gamma + sqrt(1 - mu²/L²) < 1`, sufficient for a unique solution.
    pub fn existence_condition(&self) -> bool {
        let ratio = self.mu / self.lipschitz;
        self.gamma + (T::one() - ratio * ratio).max(T::zero()).sqrt() < T::one()
    }
}

/// `beta = gamma + sqrt(1 + L²eta² - 2 eta mu)`.
pub fn compute_beta<T: Real>(mu: T, lipschitz: T, gamma: T, eta: T) -> Result<T> {
    if !(mu > T::zero() && lipschitz > T::zero() && eta > T::zero()) || gamma < T::zero() {
        return Err(SqviError::Domain {
            what: "compute_beta",
            detail: format!("need mu, L, eta > 0 and gamma >= 0 (mu={mu}, L={lipschitz}, eta={eta}, gamma={gamma})"),
        });
    }
    let radicand = T::one() + lipschitz * lipschitz * eta * eta - cst::<T>(2.0) * eta * mu;
    if radicand < T::zero() {
        return Err(SqviError::Domain {
            what: "compute_beta",
            detail: format!("negative radicand {radicand}"),
        });
    }
    Ok(gamma + radicand.sqrt())
}

/// Open interval of admissible step sizes, centred on `mu / L²`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct StepSizeInterval<T: Real> {
    pub lo: T,
    pub hi: T,
}

impl<T: Real> StepSizeInterval<T> {
    pub fn contains(&self, eta: T) -> bool {
        eta > self.lo && eta < self.hi
    }

    pub fn midpoint(&self) -> T {
        (self.lo + self.hi) / cst(2.0)
    }
}

/// `|eta - mu/L²| < sqrt(mu² - L²(2 gamma - gamma²)) / L²`, returned as-is
/// (the lower end is not intersected with `(0, ∞)`).
pub fn step_size_interval<T: Real>(mu: T, lipschitz: T, gamma: T) -> Result<StepSizeInterval<T>> {
    if !(mu > T::zero() && lipschitz > T::zero()) || gamma < T::zero() {
        return Err(SqviError::Domain {
            what: "step_size_interval",
            detail: format!("need mu, L > 0 and gamma >= 0 (mu={mu}, L={lipschitz}, gamma={gamma})"),
        });
    }
    let l2 = lipschitz * lipschitz;
    let slack = mu * mu - l2 * (cst::<T>(2.0) * gamma - gamma * gamma);
    if slack <= T::zero() {
        return Err(SqviError::InfeasibleStepCondition {
            mu: to_f64(mu),
            lipschitz: to_f64(lipschitz),
            gamma: to_f64(gamma),
        });
    }
    let centre = mu / l2;
    let radius = slack.sqrt() / l2;
    Ok(StepSizeInterval {
        lo: centre - radius,
        hi: centre + radius,
    })
}

/// `q = (1 - beta) alpha_bar`.
pub fn contraction_q<T: Real>(beta: T, alpha_bar: T) -> T {
    (T::one() - beta) * alpha_bar
}

/// Terms of the a-priori bound
/// `rho^T e0 + a eta nu rho^(T-1) + a eta nu rho^T / (rho+q-1) + a C D rho^(T-1)`.
///
/// The inner-error term is dropped for exact projections. `inner_c` multiplies
/// `1/t_k` in the bound on `‖e_k‖`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorBound<T: Real> {
    pub rho: T,
    pub q: T,
    pub alpha_bar: T,
    pub eta: T,
    pub nu: T,
    pub inner_c: T,
    pub include_inner: bool,
}

impl<T: Real> ErrorBound<T> {
    pub fn from_config(cfg: &SolverConfig<T>) -> Result<Self> {
        let c = cfg.constants.as_ref().ok_or_else(|| {
            SqviError::InvalidConfig("error bound needs problem constants".into())
        })?;
        let beta = compute_beta(c.mu, c.lipschitz, c.gamma, cfg.eta)?;
        let bound = Self {
            rho: cfg.rho,
            q: contraction_q(beta, cfg.alpha_bar),
            alpha_bar: cfg.alpha_bar,
            eta: cfg.eta,
            nu: c.nu,
            inner_c: c.inner_c,
            include_inner: cfg.mode == ProjectionMode::Inexact,
        };
        bound.premise()?;
        Ok(bound)
    }

    fn premise(&self) -> Result<T> {
        let gap = self.rho + self.q - T::one();
        if gap > T::zero() {
            Ok(gap)
        } else {
            Err(SqviError::BoundPremise { value: to_f64(gap) })
        }
    }

    fn inner_term(&self) -> T {
        if self.include_inner {
            self.alpha_bar * self.inner_c * cst(SERIES_BOUND)
        } else {
            T::zero()
        }
    }

    pub fn evaluate(&self, horizon: usize, x0_err: T) -> Result<T> {
        let gap = self.premise()?;
        let t = i32::try_from(horizon)
            .map_err(|_| SqviError::InvalidConfig("horizon too large".into()))?;
        let rho_t = self.rho.powi(t);
        let rho_tm1 = self.rho.powi(t - 1);
        let noise = self.alpha_bar * self.eta * self.nu;
        Ok(rho_t * x0_err + noise * rho_tm1 + noise * rho_t / gap + self.inner_term() * rho_tm1)
    }

    /// `D̄ = e0 + a eta nu / rho + a eta nu / (rho+q-1) + a C D / rho`.
    pub fn d_bar(&self, x0_err: T) -> Result<T> {
        let gap = self.premise()?;
        let noise = self.alpha_bar * self.eta * self.nu;
        Ok(x0_err + noise / self.rho + noise / gap + self.inner_term() / self.rho)
    }

    /// `rho²/(1-rho²) (D̄²/eps² - 1)` samples needed for `E‖x_T - x*‖ <= eps`.
    pub fn sample_complexity(&self, x0_err: T, eps: T) -> Result<T> {
        let d = self.d_bar(x0_err)?;
        let r2 = self.rho * self.rho;
        Ok(r2 / (T::one() - r2) * (d * d / (eps * eps) - T::one()))
    }
}

/// Right-hand side of the a-priori bound on `E‖x_T - x*‖`.
pub fn theoretical_error_bound<T: Real>(horizon: usize, x0_err: T, cfg: &SolverConfig<T>) -> Result<T> {
    if horizon == 0 {
        return Err(SqviError::InvalidConfig("horizon must be positive".into()));
    }
    ErrorBound::from_config(cfg)?.evaluate(horizon, x0_err)
}
