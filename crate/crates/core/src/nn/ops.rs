use rand::Rng;

use super::{dot, Real};
use crate::{Error, Result};

/// Norm floor of [`l2_normalize`]; vectors shorter than this are divided by it.
pub const L2_EPS: f64 = 1e-12;
/// Probability floor inside the logarithm of [`cross_entropy`].
pub const LOG_CLAMP: f64 = 1e-12;

/// `x / max(||x||, 1e-12)`; the zero vector maps to itself.
pub fn l2_normalize<T: Real>(x: &[T]) -> Vec<T> {
    let norm = dot(x, x).sqrt().max(T::of(L2_EPS));
    x.iter().map(|&v| v / norm).collect()
}

/// Input gradient of [`l2_normalize`] given its input `x`, output `y` and upstream `dy`.
pub fn l2_normalize_backward<T: Real>(x: &[T], y: &[T], dy: &[T]) -> Vec<T> {
    let norm = dot(x, x).sqrt();
    let eps = T::of(L2_EPS);
    if norm <= eps {
        return dy.iter().map(|&g| g / eps).collect();
    }
    let proj = dot(y, dy);
    dy.iter()
        .zip(y)
        .map(|(&g, &yi)| (g - yi * proj) / norm)
        .collect()
}

/// Inverted dropout. Returns the output and the per-component scale mask
/// (0 or `1/(1-rate)` when training, all ones otherwise).
pub fn dropout_forward<T: Real, R: Rng + ?Sized>(
    x: &[T],
    rate: f64,
    rng: &mut R,
    training: bool,
) -> (Vec<T>, Vec<T>) {
    assert!(
        (0.0..1.0).contains(&rate),
        "dropout rate {rate} outside [0, 1)"
    );
    if !training || rate == 0.0 {
        return (x.to_vec(), vec![T::one(); x.len()]);
    }
    let keep = T::of(1.0 / (1.0 - rate));
    let mask: Vec<T> = x
        .iter()
        .map(|_| {
            if rng.random::<f64>() < rate {
                T::zero()
            } else {
                keep
            }
        })
        .collect();
    let out = x.iter().zip(&mask).map(|(&v, &m)| v * m).collect();
    (out, mask)
}

pub fn dropout_backward<T: Real>(mask: &[T], dy: &[T]) -> Vec<T> {
    dy.iter().zip(mask).map(|(&g, &m)| g * m).collect()
}

pub fn fuse_multiply<T: Real>(a: &[T], b: &[T]) -> Result<Vec<T>> {
    if a.len() != b.len() {
        return Err(Error::dim("fusion operands", a.len(), b.len()));
    }
    Ok(a.iter().zip(b).map(|(&x, &y)| x * y).collect())
}

/// Gradients with respect to `a` and `b`.
pub fn fuse_multiply_backward<T: Real>(a: &[T], b: &[T], dy: &[T]) -> (Vec<T>, Vec<T>) {
    let da = dy.iter().zip(b).map(|(&g, &v)| g * v).collect();
    let db = dy.iter().zip(a).map(|(&g, &v)| g * v).collect();
    (da, db)
}

/// Softmax output: a probability vector over the classes.
#[derive(Debug, Clone, PartialEq)]
pub struct Probabilities<T>(pub Vec<T>);

impl<T: Real> Probabilities<T> {
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (i, &p) in self.0.iter().enumerate() {
            if p > self.0[best] {
                best = i;
            }
        }
        best
    }
}

/// One-hot target, stored as the index of its hot component.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LabelOneHot {
    pub class: usize,
    pub num_classes: usize,
}

impl LabelOneHot {
    pub fn new(class: usize, num_classes: usize) -> Result<Self> {
        if class >= num_classes {
            return Err(Error::InvalidLabel(format!(
                "class {class} outside [0, {num_classes})"
            )));
        }
        Ok(LabelOneHot { class, num_classes })
    }

    pub fn to_vec<T: Real>(&self) -> Vec<T> {
        let mut y = vec![T::zero(); self.num_classes];
        y[self.class] = T::one();
        y
    }
}

/// Max-subtracted softmax.
pub fn softmax<T: Real>(logits: &[T]) -> Probabilities<T> {
    let max = logits.iter().fold(T::neg_infinity(), |m, &z| m.max(z));
    let exps: Vec<T> = logits.iter().map(|&z| (z - max).exp()).collect();
    let total: T = exps.iter().copied().sum();
    Probabilities(exps.into_iter().map(|e| e / total).collect())
}

/// `-sum_i y_i log(max(p_i, 1e-12))`, which for a one-hot label is `-log p_true`.
pub fn cross_entropy<T: Real>(pred: &Probabilities<T>, label: &LabelOneHot) -> T {
    debug_assert_eq!(pred.0.len(), label.num_classes);
    -pred.0[label.class].max(T::of(LOG_CLAMP)).ln()
}

/// Logit gradient of softmax followed by cross-entropy: `p - y`.
pub fn softmax_cross_entropy_backward<T: Real>(
    pred: &Probabilities<T>,
    label: &LabelOneHot,
) -> Vec<T> {
    let mut g = pred.0.clone();
    g[label.class] = g[label.class] - T::one();
    g
}
