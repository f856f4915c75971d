mod common;

use common::{oracle_decision, random_binary_problem, solve_dual};
use fuseid_core::svm::{predict_batch, train_binary, train_multiclass, SmoConfig, SvmSettings};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn projection_lands_on_the_feasible_set() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..50 {
        let n = rng.random_range(2..10);
        let v = common::random_vec(&mut rng, n, 3.0);
        let mut y: Vec<f64> = (0..n)
            .map(|_| if rng.random_bool(0.5) { 1.0 } else { -1.0 })
            .collect();
        y[0] = 1.0;
        y[1] = -1.0;
        let a = common::project(&v, &y, 1.0);
        assert!(a.iter().all(|&x| (0.0..=1.0).contains(&x)));
        assert!(a.iter().zip(&y).map(|(a, y)| a * y).sum::<f64>().abs() < 1e-9);
    }
}

#[test]
fn oracle_solves_the_two_point_problem() {
    let x = vec![vec![1.0, 0.0], vec![-1.0, 0.0]];
    let y = vec![1.0, -1.0];
    let sol = solve_dual(&x, &y, &fuseid_core::svm::KernelSpec::linear(), 10.0);
    // Q = [[1, 1], [1, 1]] and a_1 = a_2 = a, so the dual is 2a - 2a^2,
    // maximized at a = 0.5 with value 0.5.
    assert!((sol.objective - 0.5).abs() < 1e-9, "{sol:?}");
    assert!(sol.bias.abs() < 1e-9);
}

#[test]
fn smo_matches_the_qp_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for instance in 0..60 {
        let (x, y, kernel, c) = random_binary_problem(&mut rng);
        let cfg = SmoConfig {
            regularization: c,
            ..SmoConfig::default()
        };
        let smo = train_binary(&x, &y, kernel, &cfg).unwrap();
        let oracle = solve_dual(&x, &y, &kernel, c);
        let rel = (smo.objective - oracle.objective).abs() / oracle.objective.abs().max(1e-12);
        assert!(
            rel <= 1e-3,
            "instance {instance}: smo {} oracle {} (rel {rel:.2e})",
            smo.objective,
            oracle.objective
        );
        for (i, p) in x.iter().enumerate() {
            let a = smo.decision(p) >= 0.0;
            let b = oracle_decision(&x, &y, &kernel, &oracle, p) >= 0.0;
            assert_eq!(a, b, "instance {instance}, point {i}");
        }
    }
}

#[test]
fn train_accuracy_is_invariant_to_sample_order() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let classes = 4;
    let mut x = Vec::new();
    let mut y = Vec::new();
    for i in 0..60 {
        let c = i % classes;
        let p: Vec<f64> = (0..3)
            .map(|k| {
                rng.random_range(-1.0..1.0)
                    + if k == c % 3 {
                        1.5 * (c as f64 + 1.0)
                    } else {
                        0.0
                    }
            })
            .collect();
        x.push(p);
        y.push(c);
    }
    let settings = SvmSettings::default();
    let acc = |x: &[Vec<f64>], y: &[usize]| {
        let m = train_multiclass(x, y, classes, &settings).unwrap();
        let p = predict_batch(&m, x).unwrap();
        p.iter().zip(y).filter(|(a, b)| a == b).count()
    };
    let base = acc(&x, &y);
    let mut order: Vec<usize> = (0..x.len()).collect();
    for _ in 0..3 {
        order.shuffle(&mut rng);
        let xs: Vec<_> = order.iter().map(|&i| x[i].clone()).collect();
        let ys: Vec<_> = order.iter().map(|&i| y[i]).collect();
        assert_eq!(acc(&xs, &ys), base);
    }
}
