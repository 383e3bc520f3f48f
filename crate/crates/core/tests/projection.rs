use std::sync::Arc;

use proptest::prelude::*;
use sqvi::blood::{build_example1, example1_market, example2_market};
use sqvi::projection::{
    feasibility_probe, project_exact, project_inexact, AffineConstraint, Block, MovingSet,
};

const TOL: f64 = 1e-9;

/// Two blocks of dimension 2 and 3, each with up to two random halfspaces
/// that contain the box centre, so the set is never empty.
fn random_set() -> impl Strategy<Value = MovingSet<f64>> {
    let halfspace = (prop::collection::vec(-2.0..2.0f64, 5), 0.0..1.0f64);
    prop::collection::vec(halfspace, 0..4).prop_map(|rows| {
        let blocks = vec![Block { start: 0, len: 2 }, Block { start: 2, len: 3 }];
        let mut set = MovingSet::with_blocks(vec![-1.0; 5], vec![1.0; 5], blocks).unwrap();
        for (i, (coef, slack)) in rows.into_iter().enumerate() {
            let b = i % 2;
            let len = if b == 0 { 2 } else { 3 };
            // g(y) = aᵀy - slack is -slack < 0 at the centre y = 0.
            set.add_constraint(b, Arc::new(AffineConstraint::fixed(coef[..len].to_vec(), -slack)))
                .unwrap();
        }
        set
    })
}

fn point() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-3.0..3.0f64, 5)
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn nonexpansive(set in random_set(), u in point(), v in point()) {
        let x = vec![0.0; 5];
        let pu = project_exact(&set, &x, &u).unwrap().point;
        let pv = project_exact(&set, &x, &v).unwrap().point;
        prop_assert!(dist(&pu, &pv) <= dist(&u, &v) + TOL);
    }

    #[test]
    fn obtuse_angle(set in random_set(), u in point(), w in point()) {
        let x = vec![0.0; 5];
        let pu = project_exact(&set, &x, &u).unwrap().point;
        let z = project_exact(&set, &x, &w).unwrap().point;
        let inner: f64 = (0..5).map(|i| (pu[i] - u[i]) * (z[i] - pu[i])).sum();
        prop_assert!(inner >= -TOL);
    }

    #[test]
    fn idempotent_and_feasible(set in random_set(), v in point()) {
        let x = vec![0.0; 5];
        let p = project_exact(&set, &x, &v).unwrap().point;
        prop_assert!(set.contains(&x, &p, 1e-8));
        let pp = project_exact(&set, &x, &p).unwrap().point;
        prop_assert!(dist(&p, &pp) <= TOL);
    }

    #[test]
    fn blocks_project_independently(set in random_set(), v in point(), w in point()) {
        let x = vec![0.0; 5];
        let full = project_exact(&set, &x, &v).unwrap().point;
        // Changing the other block's input leaves this block's output alone.
        let mut mixed = v.clone();
        mixed[2..].copy_from_slice(&w[2..]);
        let part = project_exact(&set, &x, &mixed).unwrap().point;
        prop_assert!(dist(&full[..2], &part[..2]) <= 1e-12);
    }

    #[test]
    fn inexact_stays_in_box(set in random_set(), v in point(), budget in 1usize..64) {
        let x = vec![0.0; 5];
        let r = project_inexact(&set, &x, &v, budget, None).unwrap();
        prop_assert!(set.in_box(&r.u));
    }
}

#[test]
fn inexact_budget_quadrupling_halves_the_error() {
    let set = MovingSet::boxed(vec![-1.0; 3], vec![1.0; 3])
        .unwrap()
        .with_constraint(0, Arc::new(AffineConstraint::fixed(vec![1.0, 1.0, 1.0], -0.5)))
        .unwrap()
        .with_constraint(0, Arc::new(AffineConstraint::fixed(vec![1.0, -2.0, 0.5], -0.2)))
        .unwrap();
    let (x, v) = (vec![0.0; 3], vec![0.9, 0.7, 0.95]);
    let exact = project_exact(&set, &x, &v).unwrap().point;
    let mut prev = f64::INFINITY;
    for t in [16, 64, 256, 1024] {
        let e = dist(&project_inexact(&set, &x, &v, t, None).unwrap().u, &exact);
        assert!(e <= prev / 2.0 || e < 1e-12, "t = {t}: {e} vs {prev}");
        prev = e;
    }
}

/// Brute-force projection onto player 1's set by nested grid refinement.
fn grid_projection(set: &MovingSet<f64>, x: &[f64], v: &[f64]) -> [f64; 2] {
    let (mut lo, mut hi) = ([50.0, 40.0], [80.0, 70.0]);
    let mut best = [0.0; 2];
    for _ in 0..40 {
        let mut best_val = f64::INFINITY;
        let n = 40;
        for a in 0..=n {
            for b in 0..=n {
                let y = [
                    lo[0] + (hi[0] - lo[0]) * a as f64 / n as f64,
                    lo[1] + (hi[1] - lo[1]) * b as f64 / n as f64,
                ];
                let feasible = set.constraints(0).iter().all(|c| c.evaluate(x, &y) <= 1e-12);
                let val = (y[0] - v[0]).powi(2) + (y[1] - v[1]).powi(2);
                if feasible && val < best_val {
                    best_val = val;
                    best = y;
                }
            }
        }
        let w = [(hi[0] - lo[0]) / 8.0, (hi[1] - lo[1]) / 8.0];
        lo = [(best[0] - w[0]).max(50.0), (best[1] - w[1]).max(40.0)];
        hi = [(best[0] + w[0]).min(80.0), (best[1] + w[1]).min(70.0)];
    }
    best
}

#[test]
fn example1_block_projection_matches_grid_search() {
    let (problem, _) = build_example1::<f64>().unwrap();
    let set = &problem.moving_set;
    // Rivals at their lowest quality: location 1 needs Q11 >= 50.7.
    let x = set.lower().to_vec();
    let mut binding = 0;
    for v1 in [[45.0, 45.0], [49.0, 30.0], [50.2, 71.0], [60.0, 60.0]] {
        let v = [v1[0], v1[1], x[2], x[3]];
        let exact = project_exact(set, &x, &v).unwrap().point;
        let grid = grid_projection(set, &x, &v);
        assert!(dist(&exact[..2], &grid) < 1e-6, "{exact:?} vs {grid:?}");
        if dist(&exact, &set.clamp(&v)) > 1e-3 {
            binding += 1;
        }
    }
    assert!(binding >= 2);
}

#[test]
fn example1_midpoint_is_feasible_for_every_block() {
    let market = Arc::new(example1_market::<f64>().unwrap());
    let set = market.moving_set().unwrap();
    assert_eq!(feasibility_probe(&set, &set.midpoint()), vec![true, true]);
}

#[test]
fn converged_inexact_projection_stays_put_as_budget_grows() {
    // Raised floors make the square-root constraints bind; this subproblem
    // once drifted away after converging once steps reached roundoff level.
    let mut market = example2_market::<f64>().unwrap();
    market.demand_floors = vec![2400.0, 1350.0];
    let (problem, _) = market.into_problem().unwrap();
    let set = &problem.moving_set;
    let x = [63.02403645510223, 58.48052795030818, 64.49625219236142, 77.36731120742097];
    let v = [45.7619342521298, 55.78001956899871, 83.14905936316522, 46.032050915599676];
    let reference = project_exact(set, &x, &v).unwrap().point;
    for budget in [256, 512, 1024, 4096] {
        let u = project_inexact(set, &x, &v, budget, None).unwrap().u;
        assert!(dist(&u, &reference) < 1e-10, "budget {budget}: {:e}", dist(&u, &reference));
    }
}
