//! The two-organization, two-location markets used as benchmarks.

use std::sync::Arc;

use super::{BloodMarket, CostPair, NoiseModel, VolumeFunction, VolumeKind};
use crate::error::Result;
use crate::problem::QviProblem;
use crate::scalar::{cst, Real};

/// Affine parts over `(Q11, Q12, Q21, Q22)`, ordered `P11, P12, P21, P22`.
const VOLUME_FORMS: [([f64; 4], f64); 4] = [
    ([10.0, 0.0, -1.0, -1.0], 130.0),
    ([0.0, 12.0, -1.0, -2.0], 135.0),
    ([-1.0, -1.0, 11.0, 0.0], 123.0),
    ([-1.0, -1.0, 0.0, 12.0], 135.0),
];

const SQRT_MULTIPLIERS: [f64; 4] = [50.0, 30.0, 40.0, 20.0];

fn grid<T: Real>(rows: [[f64; 2]; 2]) -> Vec<Vec<T>> {
    rows.iter().map(|r| r.iter().map(|&v| cst(v)).collect()).collect()
}

fn market<T: Real>(kinds: [VolumeKind; 4]) -> Result<BloodMarket<T>> {
    let volume = |k: usize| VolumeFunction {
        kind: kinds[k],
        coefficients: VOLUME_FORMS[k].0.iter().map(|&c| cst(c)).collect(),
        constant: cst(VOLUME_FORMS[k].1),
    };
    let cost = |a: f64, b: f64| CostPair { a: cst(a), b: cst(b) };
    BloodMarket::new(
        vec![cst(70.0), cst(60.0)],
        vec![cst(9.0), cst(10.0)],
        grid([[8.0, 9.0], [9.0, 10.0]]),
        vec![vec![volume(0), volume(1)], vec![volume(2), volume(3)]],
        vec![
            vec![cost(5.0, 10_000.0), cost(18.0, 12_000.0)],
            vec![cost(4.5, 12_000.0), cost(5.0, 14_000.0)],
        ],
        vec![cst(1200.0), cst(1100.0)],
        grid([[50.0, 40.0], [60.0, 70.0]]),
        grid([[80.0, 70.0], [90.0, 90.0]]),
        NoiseModel::default(),
    )
}

/// Affine donation volumes.
pub fn example1_market<T: Real>() -> Result<BloodMarket<T>> {
    market([VolumeKind::Affine; 4])
}

/// Square-root donation volumes with multipliers 50, 30, 40, 20.
pub fn example2_market<T: Real>() -> Result<BloodMarket<T>> {
    market(SQRT_MULTIPLIERS.map(|multiplier| VolumeKind::SqrtAffine { multiplier }))
}

pub fn build_example1<T: Real>() -> Result<(QviProblem<T>, Arc<BloodMarket<T>>)> {
    example1_market()?.into_problem()
}

pub fn build_example2<T: Real>() -> Result<(QviProblem<T>, Arc<BloodMarket<T>>)> {
    example2_market()?.into_problem()
}
