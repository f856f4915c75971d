//! Independent oracles shared by the integration tests.
#![allow(dead_code)]

use fuseid_core::nn::{cross_entropy, softmax, Activation, LabelOneHot};
use fuseid_core::svm::KernelSpec;
use fuseid_core::two_branch::{
    backward, build_model, forward_trace, ArchitectureSpec, ModelGrads, TwoBranchModel,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const FD_STEP: f64 = 1e-4;
pub const REL_TOL: f64 = 1e-3;
/// Denominator floor for the relative error, so gradients that are zero
/// analytically are compared in absolute terms.
pub const REL_FLOOR: f64 = 1e-6;

pub fn rel_err(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(REL_FLOOR)
}

pub fn central_difference(mut f: impl FnMut(f64) -> f64, x: f64, h: f64) -> f64 {
    (f(x + h) - f(x - h)) / (2.0 * h)
}

#[derive(Debug, Default, Clone, Copy)]
pub struct GradCheck {
    pub checked: usize,
    pub skipped: usize,
    pub max_rel: f64,
}

impl GradCheck {
    pub fn record(&mut self, analytic: f64, numeric: f64) {
        self.checked += 1;
        self.max_rel = self.max_rel.max(rel_err(analytic, numeric));
    }

    pub fn merge(&mut self, other: GradCheck) {
        self.checked += other.checked;
        self.skipped += other.skipped;
        self.max_rel = self.max_rel.max(other.max_rel);
    }

    pub fn passes(&self) -> bool {
        self.checked > 0 && self.max_rel < REL_TOL
    }
}

pub fn random_vec(rng: &mut impl Rng, n: usize, scale: f64) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-scale..scale)).collect()
}

/// Random small two-branch network, exercising 0..2 post-fusion layers
/// and 1..2 layers per branch.
pub fn random_spec(rng: &mut impl Rng) -> ArchitectureSpec {
    let fusion = rng.random_range(3..7);
    let hidden = |rng: &mut ChaCha8Rng| {
        let mut dims: Vec<usize> = (0..rng.random_range(0..2))
            .map(|_| rng.random_range(3..7))
            .collect();
        dims.push(fusion);
        dims
    };
    let mut r = ChaCha8Rng::seed_from_u64(rng.random());
    ArchitectureSpec {
        voice_in_dim: rng.random_range(2..6),
        face_in_dim: rng.random_range(2..6),
        voice_hidden_dims: hidden(&mut r),
        face_hidden_dims: hidden(&mut r),
        fusion_dim: fusion,
        post_fusion_hidden_dims: (0..r.random_range(0..3)).map(|_| fusion).collect(),
        num_classes: rng.random_range(2..5),
        dropout_rates: [0.1, 0.2],
        hidden_activation: Activation::Relu,
    }
}

/// Loss of one sample with dropout masks drawn from `mask_seed`.
pub fn sample_loss(
    model: &TwoBranchModel<f64>,
    voice: &[f64],
    face: &[f64],
    class: usize,
    mask_seed: u64,
) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(mask_seed);
    let t = forward_trace(model, voice, face, true, &mut rng).unwrap();
    let label = LabelOneHot::new(class, model.spec.num_classes).unwrap();
    cross_entropy(&softmax(&t.logits), &label)
}

fn unit_signs(
    model: &TwoBranchModel<f64>,
    voice: &[f64],
    face: &[f64],
    mask_seed: u64,
) -> Vec<bool> {
    let mut rng = ChaCha8Rng::seed_from_u64(mask_seed);
    forward_trace(model, voice, face, true, &mut rng)
        .unwrap()
        .unit_signs()
}

fn param(model: &mut TwoBranchModel<f64>, layer: usize, bias: bool, k: usize) -> &mut f64 {
    let l = model.layers_mut().nth(layer).unwrap();
    if bias {
        &mut l.bias[k]
    } else {
        &mut l.weights[k]
    }
}

/// Checks every parameter and input gradient of one random network with
/// dropout active. Coordinates where the perturbation flips a ReLU unit are
/// skipped, since the loss is not differentiable across the step.
pub fn check_network(seed: u64) -> GradCheck {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let spec = random_spec(&mut rng);
    let mut model: TwoBranchModel<f64> = build_model(&spec, seed).unwrap();
    for l in model.layers_mut() {
        for b in &mut l.bias {
            *b = rng.random_range(-0.3..0.3);
        }
    }
    let voice = random_vec(&mut rng, spec.voice_in_dim, 1.0);
    let face = random_vec(&mut rng, spec.face_in_dim, 1.0);
    let class = rng.random_range(0..spec.num_classes);
    let mask_seed: u64 = rng.random();

    let mut mrng = ChaCha8Rng::seed_from_u64(mask_seed);
    let trace = forward_trace(&model, &voice, &face, true, &mut mrng).unwrap();
    let base_signs = trace.unit_signs();
    let label = LabelOneHot::new(class, spec.num_classes).unwrap();
    let p = softmax(&trace.logits);
    let dlogits: Vec<f64> =
        p.0.iter()
            .zip(label.to_vec::<f64>())
            .map(|(p, y)| p - y)
            .collect();
    let mut grads = ModelGrads::zeros_like(&model);
    let (dvoice, dface) = backward(&model, &trace, &dlogits, &mut grads);
    let analytic: Vec<(Vec<f64>, Vec<f64>)> = grads
        .iter()
        .map(|g| (g.weights.clone(), g.bias.clone()))
        .collect();

    let mut report = GradCheck::default();
    for (li, (gw, gb)) in analytic.iter().enumerate() {
        for (bias, g) in [(false, gw), (true, gb)] {
            for (k, &a) in g.iter().enumerate() {
                let x0 = *param(&mut model, li, bias, k);
                let mut smooth = true;
                let num = central_difference(
                    |x| {
                        *param(&mut model, li, bias, k) = x;
                        smooth &= unit_signs(&model, &voice, &face, mask_seed) == base_signs;
                        sample_loss(&model, &voice, &face, class, mask_seed)
                    },
                    x0,
                    FD_STEP,
                );
                *param(&mut model, li, bias, k) = x0;
                if smooth {
                    report.record(a, num);
                } else {
                    report.skipped += 1;
                }
            }
        }
    }
    for (is_voice, grad) in [(true, &dvoice), (false, &dface)] {
        for (k, &a) in grad.iter().enumerate() {
            let x0 = if is_voice { voice[k] } else { face[k] };
            let mut smooth = true;
            let num = central_difference(
                |x| {
                    let (mut v, mut f) = (voice.clone(), face.clone());
                    if is_voice {
                        v[k] = x;
                    } else {
                        f[k] = x;
                    }
                    smooth &= unit_signs(&model, &v, &f, mask_seed) == base_signs;
                    sample_loss(&model, &v, &f, class, mask_seed)
                },
                x0,
                FD_STEP,
            );
            if smooth {
                report.record(a, num);
            } else {
                report.skipped += 1;
            }
        }
    }
    report
}

/// Dual solution from the brute-force oracle.
#[derive(Debug, Clone)]
pub struct QpSolution {
    pub alpha: Vec<f64>,
    pub bias: f64,
    pub objective: f64,
}

/// Dual objective `sum(a) - 1/2 a^T Q a`.
pub fn dual_objective(q: &[Vec<f64>], alpha: &[f64]) -> f64 {
    let quad: f64 = (0..alpha.len())
        .map(|i| alpha[i] * (0..alpha.len()).map(|j| q[i][j] * alpha[j]).sum::<f64>())
        .sum();
    alpha.iter().sum::<f64>() - 0.5 * quad
}

/// Euclidean projection onto `{0 <= a <= c, y^T a = 0}`: the projection has
/// the form `clip(v - lambda y)`, with `lambda` found by bisection since
/// `y^T clip(v - lambda y)` is non-increasing in `lambda`.
pub fn project(v: &[f64], y: &[f64], c: f64) -> Vec<f64> {
    let at = |lambda: f64| -> Vec<f64> {
        v.iter()
            .zip(y)
            .map(|(vi, yi)| (vi - lambda * yi).clamp(0.0, c))
            .collect()
    };
    let g = |lambda: f64| -> f64 { at(lambda).iter().zip(y).map(|(a, y)| a * y).sum() };
    let span = v.iter().map(|x| x.abs()).fold(0.0, f64::max) + c + 1.0;
    let (mut lo, mut hi) = (-span, span);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if g(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    at(0.5 * (lo + hi))
}

/// Accelerated projected gradient ascent on the SVM dual.
pub fn solve_dual(x: &[Vec<f64>], y: &[f64], kernel: &KernelSpec, c: f64) -> QpSolution {
    let n = x.len();
    let q: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| y[i] * y[j] * kernel_value(kernel, &x[i], &x[j]))
                .collect()
        })
        .collect();
    // Frobenius norm bounds the largest eigenvalue.
    let lip = q
        .iter()
        .flatten()
        .map(|v| v * v)
        .sum::<f64>()
        .sqrt()
        .max(1e-12);
    let step = 1.0 / lip;
    let grad = |a: &[f64]| -> Vec<f64> {
        (0..n)
            .map(|i| 1.0 - (0..n).map(|j| q[i][j] * a[j]).sum::<f64>())
            .collect()
    };
    let mut a = vec![0.0; n];
    let mut z = a.clone();
    let mut t = 1.0f64;
    for _ in 0..200_000 {
        let g = grad(&z);
        let next = project(
            &z.iter()
                .zip(&g)
                .map(|(zi, gi)| zi + step * gi)
                .collect::<Vec<_>>(),
            y,
            c,
        );
        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        let moved: f64 = next
            .iter()
            .zip(&a)
            .map(|(p, q)| (p - q).abs())
            .fold(0.0, f64::max);
        z = next
            .iter()
            .zip(&a)
            .map(|(p, q)| p + (t - 1.0) / t_next * (p - q))
            .collect();
        // Restart the momentum whenever it stops helping.
        if dual_objective(&q, &next) < dual_objective(&q, &a) {
            z = next.clone();
            t = 1.0;
        } else {
            t = t_next;
        }
        a = next;
        if moved < 1e-13 {
            break;
        }
    }
    let objective = dual_objective(&q, &a);
    let bias = oracle_bias(&q, y, &a, c);
    QpSolution {
        alpha: a,
        bias,
        objective,
    }
}

fn kernel_value(k: &KernelSpec, a: &[f64], b: &[f64]) -> f64 {
    let d: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    match k.kind {
        fuseid_core::svm::KernelKind::Linear => d,
        fuseid_core::svm::KernelKind::Poly => (k.gamma * d + k.coef0).powi(k.degree as i32),
    }
}

/// Bias from the KKT conditions: the mean over free vectors, else the
/// midpoint of the feasible interval.
fn oracle_bias(q: &[Vec<f64>], y: &[f64], a: &[f64], c: f64) -> f64 {
    let n = a.len();
    let tol = 1e-6 * c.max(1.0);
    let margin = |i: usize| -> f64 {
        // y_i - sum_j a_j y_j K_ij, with Q_ij = y_i y_j K_ij.
        y[i] - (0..n).map(|j| a[j] * q[i][j] * y[i]).sum::<f64>()
    };
    let free: Vec<f64> = (0..n)
        .filter(|&i| a[i] > tol && a[i] < c - tol)
        .map(margin)
        .collect();
    if !free.is_empty() {
        return free.iter().sum::<f64>() / free.len() as f64;
    }
    let (mut lb, mut ub) = (f64::NEG_INFINITY, f64::INFINITY);
    for i in 0..n {
        let m = margin(i);
        let at_upper = a[i] >= c - tol;
        // Lower-bounded variables need y_i f(x_i) >= 1, upper-bounded <= 1.
        if (y[i] > 0.0) != at_upper {
            lb = lb.max(m);
        } else {
            ub = ub.min(m);
        }
    }
    match (lb.is_finite(), ub.is_finite()) {
        (true, true) => 0.5 * (lb + ub),
        (true, false) => lb,
        (false, true) => ub,
        _ => 0.0,
    }
}

pub fn oracle_decision(
    x: &[Vec<f64>],
    y: &[f64],
    kernel: &KernelSpec,
    sol: &QpSolution,
    point: &[f64],
) -> f64 {
    x.iter()
        .zip(y)
        .zip(&sol.alpha)
        .map(|((xi, yi), ai)| ai * yi * kernel_value(kernel, xi, point))
        .sum::<f64>()
        + sol.bias
}

/// Random binary problem: two Gaussian blobs whose separation varies from
/// overlapping to well separated.
pub fn random_binary_problem(rng: &mut impl Rng) -> (Vec<Vec<f64>>, Vec<f64>, KernelSpec, f64) {
    let n = rng.random_range(4..=25);
    let d = rng.random_range(2..=5);
    let sep = rng.random_range(0.0..3.0);
    let mut x = Vec::with_capacity(n);
    let mut y = Vec::with_capacity(n);
    for i in 0..n {
        // Alternate first so both classes are present.
        let label = if i < 2 {
            [1.0, -1.0][i]
        } else if rng.random_bool(0.5) {
            1.0
        } else {
            -1.0
        };
        let p: Vec<f64> = (0..d)
            .map(|k| rng.random_range(-1.0..1.0) + if k == 0 { label * sep * 0.5 } else { 0.0 })
            .collect();
        x.push(p);
        y.push(label);
    }
    let kernel = match rng.random_range(0..3) {
        0 => KernelSpec::linear(),
        1 => KernelSpec::poly(d),
        _ => KernelSpec {
            coef0: 1.0,
            degree: 2,
            ..KernelSpec::poly(d)
        },
    };
    let c = [0.1, 1.0, 10.0][rng.random_range(0..3)];
    (x, y, kernel, c)
}
