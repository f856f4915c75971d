mod common;

use common::{central_difference, check_network, random_vec, rel_err, GradCheck, FD_STEP, REL_TOL};
use fuseid_core::nn::{
    cross_entropy, fuse_multiply, fuse_multiply_backward, l2_normalize, l2_normalize_backward,
    softmax, softmax_cross_entropy_backward, Activation, DenseGrad, DenseLayer, LabelOneHot,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Gradient of `w . f(x)` against a fixed random projection `w`.
fn check_vector_op(
    x: &[f64],
    w: &[f64],
    f: impl Fn(&[f64]) -> Vec<f64>,
    analytic: &[f64],
) -> GradCheck {
    let mut report = GradCheck::default();
    for k in 0..x.len() {
        let num = central_difference(
            |v| {
                let mut xp = x.to_vec();
                xp[k] = v;
                f(&xp).iter().zip(w).map(|(a, b)| a * b).sum()
            },
            x[k],
            FD_STEP,
        );
        report.record(analytic[k], num);
    }
    report
}

#[test]
fn l2_normalize_backward_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..20 {
        let n = rng.random_range(1..9);
        let x = random_vec(&mut rng, n, 2.0);
        let w = random_vec(&mut rng, n, 1.0);
        let y = l2_normalize(&x);
        let g = l2_normalize_backward(&x, &y, &w);
        let r = check_vector_op(&x, &w, l2_normalize, &g);
        assert!(r.passes(), "{r:?}");
    }
}

#[test]
fn fusion_backward_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..20 {
        let n = rng.random_range(1..9);
        let a = random_vec(&mut rng, n, 1.0);
        let b = random_vec(&mut rng, n, 1.0);
        let w = random_vec(&mut rng, n, 1.0);
        let (da, db) = fuse_multiply_backward(&a, &b, &w);
        let ra = check_vector_op(&a, &w, |a| fuse_multiply(a, &b).unwrap(), &da);
        let rb = check_vector_op(&b, &w, |b| fuse_multiply(&a, b).unwrap(), &db);
        assert!(ra.passes() && rb.passes(), "{ra:?} {rb:?}");
    }
}

#[test]
fn softmax_cross_entropy_backward_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..20 {
        let c = rng.random_range(2..8);
        let logits = random_vec(&mut rng, c, 3.0);
        let label = LabelOneHot::new(rng.random_range(0..c), c).unwrap();
        let g = softmax_cross_entropy_backward(&softmax(&logits), &label);
        let mut r = GradCheck::default();
        for k in 0..c {
            let num = central_difference(
                |v| {
                    let mut z = logits.clone();
                    z[k] = v;
                    cross_entropy(&softmax(&z), &label)
                },
                logits[k],
                FD_STEP,
            );
            r.record(g[k], num);
        }
        assert!(r.passes(), "{r:?}");
    }
}

#[test]
fn dense_identity_backward_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..20 {
        let (i, o) = (rng.random_range(1..6), rng.random_range(1..6));
        let layer: DenseLayer<f64> = DenseLayer::init(i, o, Activation::Identity, &mut rng);
        let x = random_vec(&mut rng, i, 1.0);
        let w = random_vec(&mut rng, o, 1.0);
        let out = layer.forward(&x).unwrap();
        let mut grad = DenseGrad::zeros_like(&layer);
        let dx = layer.backward(&x, &out, &w, &mut grad);
        let r = check_vector_op(&x, &w, |x| layer.forward(x).unwrap(), &dx);
        assert!(r.passes(), "{r:?}");
        for k in 0..layer.weights.len() {
            let num = central_difference(
                |v| {
                    let mut l = layer.clone();
                    l.weights[k] = v;
                    l.forward(&x)
                        .unwrap()
                        .iter()
                        .zip(&w)
                        .map(|(a, b)| a * b)
                        .sum()
                },
                layer.weights[k],
                FD_STEP,
            );
            assert!(rel_err(grad.weights[k], num) < REL_TOL);
        }
    }
}

#[test]
fn full_network_gradients_match_on_random_networks() {
    let mut total = GradCheck::default();
    for seed in 0..24 {
        let r = check_network(seed);
        assert!(r.passes(), "network {seed}: {r:?}");
        total.merge(r);
    }
    eprintln!("{total:?}");
    assert!(total.checked > 1000, "{total:?}");
    assert!(total.skipped * 20 < total.checked, "{total:?}");
}
