use thiserror::Error;

pub type Result<T, E = SqviError> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SqviError {
    #[error("domain error in {what}: {detail}")]
    Domain { what: &'static str, detail: String },

    #[error(
        "no valid step size: mu^2 = {mu_sq} <= L^2 (2 gamma - gamma^2) = {rhs} \
         (mu = {mu}, L = {lipschitz}, gamma = {gamma})",
        mu_sq = mu * mu,
        rhs = lipschitz * lipschitz * (2.0 * gamma - gamma * gamma)
    )]
    InfeasibleStepCondition { mu: f64, lipschitz: f64, gamma: f64 },

    #[error("rho + q - 1 = {value} must be positive for the error bound")]
    BoundPremise { value: f64 },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("{what} overflows u64 at k = {k}; set a batch cap")]
    Overflow { what: &'static str, k: usize },

    #[error("bound order violated at coordinate {index}: lo = {lo} > hi = {hi}")]
    BoundOrder { index: usize, lo: f64, hi: f64 },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("block {block} has dimension {dim}; exact projection supports at most {max}")]
    DimensionTooLarge { block: usize, dim: usize, max: usize },

    #[error("moving set is empty in block {block}{}", at_iteration(*.iteration))]
    InfeasibleSet { block: usize, iteration: Option<usize> },

    #[error("operator oracle has no exact mean")]
    MeanUnavailable,

    #[error("numerical failure: {0}")]
    Numerical(String),
}

fn at_iteration(iteration: Option<usize>) -> String {
    match iteration {
        Some(k) => format!(" at outer iteration {k}"),
        None => String::new(),
    }
}

impl SqviError {
    /// True when the failure means the constraint family itself is infeasible.
    pub fn is_infeasible(&self) -> bool {
        matches!(self, SqviError::InfeasibleSet { .. })
    }
}
