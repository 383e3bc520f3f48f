use std::fmt::Debug;
use std::sync::Arc;

use crate::error::{Result, SqviError};
use crate::projection::MovingSet;
use crate::scalar::Real;
use crate::stochastic::StochasticOracle;

/// Per-player payoffs reported alongside a trajectory.
pub trait Payoffs<T: Real>: Send + Sync + Debug {
    fn n_players(&self) -> usize;
    fn utilities(&self, x: &[T]) -> Result<Vec<T>>;
}

/// A stochastic QVI: find `x ∈ K(x)` with `⟨F(x), y - x⟩ >= 0` for all `y ∈ K(x)`.
#[derive(Debug, Clone)]
pub struct QviProblem<T: Real> {
    pub oracle: Arc<dyn StochasticOracle<T>>,
    pub moving_set: MovingSet<T>,
    /// Known solution, when the instance is constructed around one.
    pub reference_solution: Option<Vec<T>>,
    pub payoffs: Option<Arc<dyn Payoffs<T>>>,
}

impl<T: Real> QviProblem<T> {
    pub fn new(oracle: Arc<dyn StochasticOracle<T>>, moving_set: MovingSet<T>) -> Result<Self> {
        if oracle.dim() != moving_set.dim() {
            return Err(SqviError::DimensionMismatch {
                expected: moving_set.dim(),
                got: oracle.dim(),
            });
        }
        Ok(Self {
            oracle,
            moving_set,
            reference_solution: None,
            payoffs: None,
        })
    }

    pub fn with_reference(mut self, x_star: Vec<T>) -> Result<Self> {
        self.moving_set.check_dim(&x_star)?;
        self.reference_solution = Some(x_star);
        Ok(self)
    }

    pub fn with_payoffs(mut self, payoffs: Arc<dyn Payoffs<T>>) -> Self {
        self.payoffs = Some(payoffs);
        self
    }

    pub fn dim(&self) -> usize {
        self.moving_set.dim()
    }
}
