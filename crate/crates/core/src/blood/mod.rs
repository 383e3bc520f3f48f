//! Blood-donation quality competition as a generalized Nash game.
//!
//! Organization `i` picks quality levels `Q_ij` at locations `j`. Variables
//! are stored flat at index `i * m + j`. Its expected utility is
//!
//! ```text
//! U_i = π_i Σ_j P_ij(Q) + ω_i Σ_j γ_ij Q_ij - Σ_j (a_ij Q_ij² + b_ij)
//! ```
//!
//! and each location needs `Σ_i P_ij(Q) >= P_j`. The sampled cost adds
//! `ξ_ij Q_ij²`, so the sampled operator is the mean plus `2 ξ_ij Q_ij`.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Result, SqviError};
use crate::problem::{Payoffs, QviProblem};
use crate::projection::{Block, Convexity, MovingSet, ParamConstraint};
use crate::scalar::{cst, to_f64, Real};
use crate::stochastic::{check_len, SampleStream, StochasticOracle};

mod examples;

pub use examples::{build_example1, build_example2, example1_market, example2_market};

/// Smallest square-root argument used when evaluating volumes.
pub const SQRT_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum VolumeKind {
    Affine,
    /// `multiplier · √(affine)`.
    SqrtAffine { multiplier: f64 },
}

/// Donation volume `P_ij(Q)` built on an affine form `cᵀQ + c₀`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct VolumeFunction<T: Real> {
    pub kind: VolumeKind,
    /// One coefficient per flat variable.
    pub coefficients: Vec<T>,
    pub constant: T,
}

impl<T: Real> VolumeFunction<T> {
    pub fn affine_part(&self, q: &[T]) -> T {
        crate::scalar::dot(&self.coefficients, q) + self.constant
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct CostPair<T: Real> {
    /// Quadratic coefficient of the expected cost.
    pub a: T,
    /// Fixed cost.
    pub b: T,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct NoiseModel<T: Real> {
    /// Standard deviation of each cost perturbation `ξ`.
    #[serde(default = "one")]
    pub scale: T,
    /// Use one draw for every cost function instead of one per function.
    #[serde(default)]
    pub shared: bool,
}

fn one<T: Real>() -> T {
    T::one()
}

impl<T: Real> Default for NoiseModel<T> {
    fn default() -> Self {
        Self {
            scale: T::one(),
            shared: false,
        }
    }
}

/// Market data. Matrices indexed by organization then location are stored as
/// `Vec<Vec<_>>` with `n_orgs` rows of length `n_locations`.
#[derive(Debug, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct BloodMarket<T: Real> {
    pub n_orgs: usize,
    pub n_locations: usize,
    pub prices: Vec<T>,
    pub omega: Vec<T>,
    pub quality_weights: Vec<Vec<T>>,
    pub volumes: Vec<Vec<VolumeFunction<T>>>,
    pub costs: Vec<Vec<CostPair<T>>>,
    pub demand_floors: Vec<T>,
    pub lower: Vec<Vec<T>>,
    pub upper: Vec<Vec<T>>,
    #[serde(default)]
    pub noise: NoiseModel<T>,
    #[serde(skip)]
    domain_clamps: AtomicUsize,
}

impl<T: Real> Clone for BloodMarket<T> {
    fn clone(&self) -> Self {
        Self {
            n_orgs: self.n_orgs,
            n_locations: self.n_locations,
            prices: self.prices.clone(),
            omega: self.omega.clone(),
            quality_weights: self.quality_weights.clone(),
            volumes: self.volumes.clone(),
            costs: self.costs.clone(),
            demand_floors: self.demand_floors.clone(),
            lower: self.lower.clone(),
            upper: self.upper.clone(),
            noise: self.noise,
            domain_clamps: AtomicUsize::new(self.domain_clamps.load(Ordering::Relaxed)),
        }
    }
}

fn invalid(detail: String) -> SqviError {
    SqviError::InvalidConfig(detail)
}

impl<T: Real> BloodMarket<T> {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        prices: Vec<T>,
        omega: Vec<T>,
        quality_weights: Vec<Vec<T>>,
        volumes: Vec<Vec<VolumeFunction<T>>>,
        costs: Vec<Vec<CostPair<T>>>,
        demand_floors: Vec<T>,
        lower: Vec<Vec<T>>,
        upper: Vec<Vec<T>>,
        noise: NoiseModel<T>,
    ) -> Result<Self> {
        let market = Self {
            n_orgs: prices.len(),
            n_locations: demand_floors.len(),
            prices,
            omega,
            quality_weights,
            volumes,
            costs,
            demand_floors,
            lower,
            upper,
            noise,
            domain_clamps: AtomicUsize::new(0),
        };
        market.validate()?;
        Ok(market)
    }

    /// Shape, sign, bound-order and square-root domain checks.
    pub fn validate(&self) -> Result<()> {
        let (n, m) = (self.n_orgs, self.n_locations);
        if n == 0 || m == 0 {
            return Err(invalid("market needs at least one organization and one location".into()));
        }
        let rows_ok = |name: &str, len: usize| {
            if len == n {
                Ok(())
            } else {
                Err(invalid(format!("{name}: expected {n} organizations, got {len}")))
            }
        };
        rows_ok("prices", self.prices.len())?;
        rows_ok("omega", self.omega.len())?;
        rows_ok("quality_weights", self.quality_weights.len())?;
        rows_ok("volumes", self.volumes.len())?;
        rows_ok("costs", self.costs.len())?;
        rows_ok("lower", self.lower.len())?;
        rows_ok("upper", self.upper.len())?;
        if self.demand_floors.len() != m {
            return Err(invalid(format!(
                "demand_floors: expected {m} locations, got {}",
                self.demand_floors.len()
            )));
        }
        for i in 0..n {
            let cols = [
                ("quality_weights", self.quality_weights[i].len()),
                ("volumes", self.volumes[i].len()),
                ("costs", self.costs[i].len()),
                ("lower", self.lower[i].len()),
                ("upper", self.upper[i].len()),
            ];
            for (name, len) in cols {
                if len != m {
                    return Err(invalid(format!("{name}[{i}]: expected {m} locations, got {len}")));
                }
            }
            for (j, v) in self.volumes[i].iter().enumerate() {
                if v.coefficients.len() != n * m {
                    return Err(invalid(format!(
                        "volumes[{i}][{j}]: expected {} coefficients, got {}",
                        n * m,
                        v.coefficients.len()
                    )));
                }
                if let VolumeKind::SqrtAffine { multiplier } = v.kind {
                    if !(multiplier > 0.0) {
                        return Err(invalid(format!("volumes[{i}][{j}]: multiplier must be positive")));
                    }
                }
            }
            for (j, c) in self.costs[i].iter().enumerate() {
                if !(c.a > T::zero()) {
                    return Err(invalid(format!("costs[{i}][{j}].a must be positive")));
                }
            }
        }
        let finite = self
            .prices
            .iter()
            .chain(&self.omega)
            .chain(&self.demand_floors)
            .chain(self.quality_weights.iter().flatten())
            .chain(self.lower.iter().flatten())
            .chain(self.upper.iter().flatten())
            .chain(self.volumes.iter().flatten().flat_map(|v| v.coefficients.iter().chain([&v.constant])))
            .chain(self.costs.iter().flatten().flat_map(|c| [&c.a, &c.b]))
            .all(|z| z.is_finite());
        if !finite || !self.noise.scale.is_finite() || self.noise.scale < T::zero() {
            return Err(invalid("market coefficients must be finite (noise scale >= 0)".into()));
        }
        let lo = self.flat_lower();
        let hi = self.flat_upper();
        for (index, (&l, &h)) in lo.iter().zip(&hi).enumerate() {
            if !(l <= h) {
                return Err(SqviError::BoundOrder {
                    index,
                    lo: to_f64(l),
                    hi: to_f64(h),
                });
            }
        }
        self.check_sqrt_domain()
    }

    /// Every square-root argument must be at least 1 on the whole box. The
    /// arguments are affine, so checking the box vertices suffices.
    fn check_sqrt_domain(&self) -> Result<()> {
        let lo = self.flat_lower();
        let hi = self.flat_upper();
        for (i, row) in self.volumes.iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                if v.kind == VolumeKind::Affine {
                    continue;
                }
                // Minimum of an affine form over a box: pick each coordinate's
                // minimizing end. This is the minimizing vertex.
                let min: T = v
                    .coefficients
                    .iter()
                    .zip(lo.iter().zip(&hi))
                    .map(|(&c, (&l, &h))| if c >= T::zero() { c * l } else { c * h })
                    .sum::<T>()
                    + v.constant;
                if min < T::one() {
                    return Err(SqviError::Domain {
                        what: "blood market volume",
                        detail: format!(
                            "square-root argument of P[{i}][{j}] reaches {} < 1 on the box",
                            to_f64(min)
                        ),
                    });
                }
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.n_orgs * self.n_locations
    }

    pub fn index(&self, org: usize, location: usize) -> usize {
        org * self.n_locations + location
    }

    pub fn flat_lower(&self) -> Vec<T> {
        self.lower.iter().flatten().copied().collect()
    }

    pub fn flat_upper(&self) -> Vec<T> {
        self.upper.iter().flatten().copied().collect()
    }

    /// Number of times a square-root argument was floored during evaluation.
    pub fn domain_clamps(&self) -> usize {
        self.domain_clamps.load(Ordering::Relaxed)
    }

    fn sqrt_arg(&self, arg: T) -> T {
        if arg < cst(SQRT_FLOOR) {
            self.domain_clamps.fetch_add(1, Ordering::Relaxed);
            cst(SQRT_FLOOR)
        } else {
            arg
        }
    }

    fn checked_arg(&self, org: usize, location: usize, q: &[T]) -> Result<T> {
        let arg = self.volumes[org][location].affine_part(q);
        if arg < T::zero() || arg.is_nan() {
            return Err(SqviError::Domain {
                what: "blood market volume",
                detail: format!("square-root argument of P[{org}][{location}] is {}", to_f64(arg)),
            });
        }
        Ok(self.sqrt_arg(arg))
    }

    /// `P_ij(Q)`, flooring a square-root argument below the domain.
    pub fn volume(&self, org: usize, location: usize, q: &[T]) -> T {
        let v = &self.volumes[org][location];
        match v.kind {
            VolumeKind::Affine => v.affine_part(q),
            VolumeKind::SqrtAffine { multiplier } => {
                cst::<T>(multiplier) * self.sqrt_arg(v.affine_part(q)).sqrt()
            }
        }
    }

    /// `∂P_ij/∂Q_k` for every flat `k`, written into `out`.
    fn volume_gradient(&self, org: usize, location: usize, q: &[T], out: &mut [T]) {
        let v = &self.volumes[org][location];
        let factor = match v.kind {
            VolumeKind::Affine => T::one(),
            VolumeKind::SqrtAffine { multiplier } => {
                cst::<T>(multiplier) / (cst::<T>(2.0) * self.sqrt_arg(v.affine_part(q)).sqrt())
            }
        };
        for (o, &c) in out.iter_mut().zip(&v.coefficients) {
            *o = factor * c;
        }
    }

    fn check_domain(&self, q: &[T]) -> Result<()> {
        check_len(q, self.dim())?;
        for i in 0..self.n_orgs {
            for j in 0..self.n_locations {
                if self.volumes[i][j].kind != VolumeKind::Affine {
                    self.checked_arg(i, j, q)?;
                }
            }
        }
        Ok(())
    }

    /// `F_ij(Q) = -∂U_i/∂Q_ij` at `ξ = 0`.
    pub fn mean_operator(&self, q: &[T]) -> Result<Vec<T>> {
        self.check_domain(q)?;
        let (n, m) = (self.n_orgs, self.n_locations);
        let mut f = vec![T::zero(); n * m];
        let mut grad = vec![T::zero(); n * m];
        for i in 0..n {
            let mut own = vec![T::zero(); n * m];
            for l in 0..m {
                self.volume_gradient(i, l, q, &mut grad);
                for (o, &g) in own.iter_mut().zip(&grad) {
                    *o += g;
                }
            }
            for j in 0..m {
                let k = self.index(i, j);
                let marginal = self.prices[i] * own[k] + self.omega[i] * self.quality_weights[i][j]
                    - cst::<T>(2.0) * self.costs[i][j].a * q[k];
                f[k] = -marginal;
            }
        }
        Ok(f)
    }

    /// Mean operator plus `2 ξ_ij Q_ij`.
    pub fn sample_operator(&self, q: &[T], stream: &SampleStream) -> Result<Vec<T>> {
        let mut f = self.mean_operator(q)?;
        if self.noise.scale == T::zero() {
            return Ok(f);
        }
        let draws = stream.normals(if self.noise.shared { 1 } else { f.len() });
        let two_s = cst::<T>(2.0) * self.noise.scale;
        for (k, fk) in f.iter_mut().enumerate() {
            let xi = cst::<T>(if self.noise.shared { draws[0] } else { draws[k] });
            *fk += two_s * xi * q[k];
        }
        Ok(f)
    }

    /// Expected utilities `U_i(Q)` (costs at `ξ = 0`).
    pub fn utilities(&self, q: &[T]) -> Result<Vec<T>> {
        self.check_domain(q)?;
        Ok((0..self.n_orgs)
            .map(|i| {
                (0..self.n_locations)
                    .map(|j| {
                        let k = self.index(i, j);
                        let c = self.costs[i][j];
                        self.prices[i] * self.volume(i, j, q) + self.omega[i] * self.quality_weights[i][j] * q[k]
                            - (c.a * q[k] * q[k] + c.b)
                    })
                    .sum()
            })
            .collect())
    }

    /// Joint demand slack `Σ_i P_ij(Q) - P_j` per location.
    pub fn demand_slack(&self, q: &[T]) -> Vec<T> {
        (0..self.n_locations)
            .map(|j| (0..self.n_orgs).map(|i| self.volume(i, j, q)).sum::<T>() - self.demand_floors[j])
            .collect()
    }

    /// `K(x) = ∏_i K_i(x)`: organization `i` moves its own block while rivals'
    /// volumes are parameters.
    pub fn moving_set(self: &Arc<Self>) -> Result<MovingSet<T>> {
        let blocks = (0..self.n_orgs)
            .map(|i| Block {
                start: i * self.n_locations,
                len: self.n_locations,
            })
            .collect();
        let mut set = MovingSet::with_blocks(self.flat_lower(), self.flat_upper(), blocks)?;
        for i in 0..self.n_orgs {
            for j in 0..self.n_locations {
                set.add_constraint(
                    i,
                    Arc::new(DemandConstraint {
                        market: Arc::clone(self),
                        org: i,
                        location: j,
                    }),
                )?;
            }
        }
        Ok(set)
    }

    /// Problem with the market as both oracle and payoff model.
    pub fn into_problem(self) -> Result<(QviProblem<T>, Arc<Self>)> {
        let market = Arc::new(self);
        let set = market.moving_set()?;
        let problem = QviProblem::new(market.clone(), set)?.with_payoffs(market.clone());
        Ok((problem, market))
    }
}

impl<T: Real> StochasticOracle<T> for BloodMarket<T> {
    fn dim(&self) -> usize {
        BloodMarket::dim(self)
    }

    fn mean(&self, x: &[T]) -> Result<Vec<T>> {
        self.mean_operator(x)
    }

    fn sample(&self, x: &[T], stream: &SampleStream) -> Result<Vec<T>> {
        self.sample_operator(x, stream)
    }

    fn noise_scale_hint(&self) -> Option<T> {
        // E‖2ξQ‖² = 4 s² ‖Q‖² whether or not the draw is shared; the box
        // bounds give the supremum over feasible points.
        let q_sq: T = self
            .flat_lower()
            .iter()
            .zip(self.flat_upper())
            .map(|(&l, h)| l.abs().max(h.abs()).powi(2))
            .sum();
        Some(cst::<T>(2.0) * self.noise.scale * q_sq.sqrt())
    }

    fn is_deterministic(&self) -> bool {
        self.noise.scale == T::zero()
    }
}

impl<T: Real> Payoffs<T> for BloodMarket<T> {
    fn n_players(&self) -> usize {
        self.n_orgs
    }

    fn utilities(&self, x: &[T]) -> Result<Vec<T>> {
        BloodMarket::utilities(self, x)
    }
}

/// `g(x, y) = P_j - P_ij(y, x_{-i}) - Σ_{i' ≠ i} P_{i'j}(x)`.
#[derive(Debug)]
pub struct DemandConstraint<T: Real> {
    market: Arc<BloodMarket<T>>,
    org: usize,
    location: usize,
}

impl<T: Real> DemandConstraint<T> {
    fn splice(&self, x: &[T], y: &[T]) -> Vec<T> {
        let mut q = x.to_vec();
        let start = self.org * self.market.n_locations;
        q[start..start + y.len()].copy_from_slice(y);
        q
    }
}

impl<T: Real> ParamConstraint<T> for DemandConstraint<T> {
    fn evaluate(&self, x: &[T], y: &[T]) -> T {
        let mk = &self.market;
        let q = self.splice(x, y);
        let own = mk.volume(self.org, self.location, &q);
        let rivals: T = (0..mk.n_orgs)
            .filter(|&i| i != self.org)
            .map(|i| mk.volume(i, self.location, x))
            .sum();
        mk.demand_floors[self.location] - own - rivals
    }

    fn gradient_y(&self, x: &[T], y: &[T], out: &mut [T]) {
        let mk = &self.market;
        let q = self.splice(x, y);
        let mut full = vec![T::zero(); mk.dim()];
        mk.volume_gradient(self.org, self.location, &q, &mut full);
        let start = self.org * mk.n_locations;
        for (o, &g) in out.iter_mut().zip(&full[start..start + y.len()]) {
            *o = -g;
        }
    }

    fn convexity(&self) -> Convexity {
        match self.market.volumes[self.org][self.location].kind {
            VolumeKind::Affine => Convexity::AffineInY,
            VolumeKind::SqrtAffine { .. } => Convexity::ConvexInY,
        }
    }
}
