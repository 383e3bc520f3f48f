use std::sync::Arc;

use approx::assert_relative_eq;
use proptest::prelude::*;
use sqvi::blood::*;
use sqvi::projection::Convexity;
use sqvi::stochastic::{batch_average, SampleStream};
use sqvi::SqviError;

const LOW: [f64; 4] = [50.0, 40.0, 60.0, 70.0];

fn ex1() -> Arc<BloodMarket<f64>> {
    Arc::new(example1_market().unwrap())
}

fn ex2() -> Arc<BloodMarket<f64>> {
    Arc::new(example2_market().unwrap())
}

/// Own-block central differences of the utilities, negated.
fn fd_operator(m: &BloodMarket<f64>, q: &[f64], h: f64) -> Vec<f64> {
    (0..4)
        .map(|k| {
            let org = k / 2;
            let mut p = q.to_vec();
            p[k] += h;
            let up = m.utilities(&p).unwrap()[org];
            p[k] -= 2.0 * h;
            let down = m.utilities(&p).unwrap()[org];
            -(up - down) / (2.0 * h)
        })
        .collect()
}

#[test]
fn example1_data_echo() {
    let m = ex1();
    assert_eq!(m.upper[1][0], 90.0);
    assert_eq!(m.lower[1][0], 60.0);
    assert_eq!(m.volume(0, 0, &LOW), 500.0);
}

#[test]
fn example1_operator_values() {
    let m = ex1();
    assert_eq!(m.mean_operator(&LOW).unwrap(), vec![-272.0, 519.0, -210.0, -120.0]);
    let fd = fd_operator(&m, &LOW, 1e-3);
    for (a, b) in fd.iter().zip(m.mean_operator(&LOW).unwrap()) {
        assert_relative_eq!(*a, b, epsilon = 1e-6);
    }
}

#[test]
fn example1_operator_is_affine_with_diagonal_jacobian() {
    let m = ex1();
    let q = [61.0, 52.0, 83.0, 71.5];
    let f = m.mean_operator(&q).unwrap();
    let f0 = m.mean_operator(&LOW).unwrap();
    let diag = [10.0, 36.0, 9.0, 10.0];
    for k in 0..4 {
        assert_relative_eq!(f[k] - f0[k], diag[k] * (q[k] - LOW[k]), epsilon = 1e-10);
    }
}

#[test]
fn example1_utility_hessian_and_zero_quality() {
    let m = ex1();
    // Q = 0 lies outside the box; utilities do not check bounds.
    let u = m.utilities(&[0.0; 4]).unwrap();
    assert_relative_eq!(u[0], -3450.0, epsilon = 1e-9);
    let q = [65.0, 55.0, 75.0, 80.0];
    let h = 1e-2;
    let u1 = |p: &[f64]| m.utilities(p).unwrap()[0];
    let expected = [-10.0, -36.0, 0.0, 0.0];
    for k in 0..4 {
        let mut p = q;
        p[k] += h;
        let up = u1(&p);
        p[k] -= 2.0 * h;
        let down = u1(&p);
        let second = (up - 2.0 * u1(&q) + down) / (h * h);
        assert!((second - expected[k]).abs() < 1e-4, "k = {k}: {second}");
    }
}

#[test]
fn example1_printed_constraint_and_values() {
    let m = ex1();
    let set = m.moving_set().unwrap();
    // Joint constraint value 9Q11 + 10Q21 - Q22 - Q12 + 253 at the lower corner.
    assert_relative_eq!(m.demand_slack(&LOW)[0] + 1200.0, 1193.0, epsilon = 1e-12);
    let x = [61.0, 47.0, 66.0, 88.0];
    let c = &set.constraints(0)[0];
    let y = [55.0, 60.0];
    let expected = 1200.0 - (10.0 * y[0] - x[2] - x[3] + 130.0) - (11.0 * x[2] - x[0] - x[1] + 123.0);
    assert_relative_eq!(c.evaluate(&x, &y), expected, epsilon = 1e-12);
    assert_eq!(c.convexity(), Convexity::AffineInY);
    let mut g = [0.0; 2];
    c.gradient_y(&x, &y, &mut g);
    assert_eq!(g, [-10.0, 0.0]);
}

#[test]
fn moving_set_at_y_equals_x_reproduces_joint_constraints() {
    for m in [ex1(), ex2()] {
        let set = m.moving_set().unwrap();
        let x = [71.0, 44.0, 77.0, 81.0];
        for b in 0..2 {
            for j in 0..2 {
                let own = &x[2 * b..2 * b + 2];
                let joint = -m.demand_slack(&x)[j];
                assert_relative_eq!(set.constraints(b)[j].evaluate(&x, own), joint, epsilon = 1e-12);
            }
        }
    }
}

#[test]
fn example2_values() {
    let m = ex2();
    assert_relative_eq!(m.volume(0, 0, &LOW), 50.0 * 500f64.sqrt(), epsilon = 1e-12);
    let c1 = m.demand_slack(&LOW)[0] + 1200.0;
    assert_relative_eq!(c1, 50.0 * 500f64.sqrt() + 40.0 * 693f64.sqrt(), epsilon = 1e-9);
    assert!(c1 >= 1200.0);
    let set = m.moving_set().unwrap();
    assert_eq!(set.constraints(0)[0].convexity(), Convexity::ConvexInY);
}

#[test]
fn example2_operator_matches_finite_differences() {
    let m = ex2();
    let mid = [65.0, 55.0, 75.0, 80.0];
    let fd = fd_operator(&m, &mid, 1e-5);
    for (a, b) in fd.iter().zip(m.mean_operator(&mid).unwrap()) {
        assert!((a - b).abs() < 1e-5 * b.abs().max(1.0), "{a} vs {b}");
    }
}

#[test]
fn gradient_consistency_on_grid() {
    for m in [ex1(), ex2()] {
        let pts = |lo: f64, hi: f64| (0..5).map(move |i| lo + (hi - lo) * i as f64 / 4.0);
        for a in pts(50.0, 80.0) {
            for b in pts(40.0, 70.0) {
                for c in pts(60.0, 90.0) {
                    for d in pts(70.0, 90.0) {
                        let q = [a, b, c, d];
                        let f = m.mean_operator(&q).unwrap();
                        let fd = fd_operator(&m, &q, 1e-4);
                        for k in 0..4 {
                            assert!((f[k] - fd[k]).abs() < 1e-5 * f[k].abs().max(1.0));
                        }
                    }
                }
            }
        }
    }
}

#[test]
fn domain_guard_rejects_bad_box() {
    let mut m = example2_market::<f64>().unwrap();
    // Q21 = Q22 = 2000 drives the P11 argument far below zero.
    m.upper[1] = vec![2000.0, 2000.0];
    assert!(matches!(m.validate(), Err(SqviError::Domain { .. })));
    assert!(m.mean_operator(&[50.0, 40.0, 2000.0, 2000.0]).is_err());
}

#[test]
fn zero_noise_sample_equals_mean() {
    let mut m = example1_market::<f64>().unwrap();
    m.noise.scale = 0.0;
    let s = m.sample_operator(&LOW, &SampleStream::new(1, 2, 3)).unwrap();
    assert_eq!(s, m.mean_operator(&LOW).unwrap());
}

#[test]
fn sample_mean_and_variance() {
    let m = ex1();
    let q = [72.0, 45.0, 80.0, 85.0];
    let n = 100_000u64;
    let avg = batch_average(m.as_ref(), &q, n, 11, 0).unwrap();
    let mean = m.mean_operator(&q).unwrap();
    let mut var = [0.0; 4];
    for j in 1..=20_000u64 {
        let s = m.sample_operator(&q, &SampleStream::new(11, 1, j)).unwrap();
        for k in 0..4 {
            var[k] += (s[k] - mean[k]).powi(2) / 20_000.0;
        }
    }
    for k in 0..4 {
        let sigma = 2.0 * q[k];
        assert!((avg[k] - mean[k]).abs() <= 3.0 * sigma / (n as f64).sqrt());
        assert!((var[k] / (sigma * sigma) - 1.0).abs() < 0.1, "k = {k}: {}", var[k]);
    }
}

#[test]
fn shared_noise_uses_one_draw() {
    let mut m = example1_market::<f64>().unwrap();
    m.noise.shared = true;
    let q = LOW;
    let s = m.sample_operator(&q, &SampleStream::new(5, 0, 1)).unwrap();
    let f = m.mean_operator(&q).unwrap();
    let xi: Vec<f64> = (0..4).map(|k| (s[k] - f[k]) / (2.0 * q[k])).collect();
    for k in 1..4 {
        assert_relative_eq!(xi[k], xi[0], epsilon = 1e-9);
    }
}

#[test]
fn market_file_round_trip() {
    let m = example2_market::<f64>().unwrap();
    let json = serde_json::to_string(&m).unwrap();
    let back: BloodMarket<f64> = serde_json::from_str(&json).unwrap();
    back.validate().unwrap();
    assert_eq!(back.mean_operator(&LOW).unwrap(), m.mean_operator(&LOW).unwrap());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn example1_strongly_monotone_and_lipschitz(
        a in prop::array::uniform4(0.0..1.0f64),
        b in prop::array::uniform4(0.0..1.0f64),
    ) {
        let m = ex1();
        let box_point = |t: [f64; 4]| -> Vec<f64> {
            (0..4).map(|k| LOW[k] + t[k] * (m.flat_upper()[k] - LOW[k])).collect()
        };
        let (p, q) = (box_point(a), box_point(b));
        let (fp, fq) = (m.mean_operator(&p).unwrap(), m.mean_operator(&q).unwrap());
        let d_sq: f64 = (0..4).map(|k| (p[k] - q[k]).powi(2)).sum();
        let inner: f64 = (0..4).map(|k| (fp[k] - fq[k]) * (p[k] - q[k])).sum();
        let df: f64 = (0..4).map(|k| (fp[k] - fq[k]).powi(2)).sum::<f64>().sqrt();
        prop_assert!(inner >= 9.0 * d_sq - 1e-9);
        prop_assert!(df <= 36.0 * d_sq.sqrt() + 1e-9);
    }

    #[test]
    fn example2_strongly_monotone(
        a in prop::array::uniform4(0.0..1.0f64),
        b in prop::array::uniform4(0.0..1.0f64),
    ) {
        let m = ex2();
        let box_point = |t: [f64; 4]| -> Vec<f64> {
            (0..4).map(|k| LOW[k] + t[k] * (m.flat_upper()[k] - LOW[k])).collect()
        };
        let (p, q) = (box_point(a), box_point(b));
        prop_assume!(p != q);
        let (fp, fq) = (m.mean_operator(&p).unwrap(), m.mean_operator(&q).unwrap());
        let d_sq: f64 = (0..4).map(|k| (p[k] - q[k]).powi(2)).sum();
        let inner: f64 = (0..4).map(|k| (fp[k] - fq[k]) * (p[k] - q[k])).sum();
        prop_assert!(inner > 0.0);
        prop_assert!(inner >= 1.0 * d_sq);
    }

    #[test]
    fn demand_constraints_are_convex_in_own_block(
        x in prop::array::uniform4(0.0..1.0f64),
        y in prop::array::uniform2(0.0..1.0f64),
        z in prop::array::uniform2(0.0..1.0f64),
    ) {
        let m = ex2();
        let set = m.moving_set().unwrap();
        let hi = m.flat_upper();
        let x: Vec<f64> = (0..4).map(|k| LOW[k] + x[k] * (hi[k] - LOW[k])).collect();
        for b in 0..2 {
            let own = |t: [f64; 2]| -> Vec<f64> {
                (0..2).map(|k| LOW[2 * b + k] + t[k] * (hi[2 * b + k] - LOW[2 * b + k])).collect()
            };
            let (py, pz) = (own(y), own(z));
            let mid: Vec<f64> = py.iter().zip(&pz).map(|(a, c)| (a + c) / 2.0).collect();
            for c in set.constraints(b) {
                let lhs = c.evaluate(&x, &mid);
                let rhs = (c.evaluate(&x, &py) + c.evaluate(&x, &pz)) / 2.0;
                prop_assert!(lhs <= rhs + 1e-9);
            }
        }
    }
}
