//! Minimal deterministic neural-network kernel.
//!
//! Everything is generic over [`Real`] so the same code paths run in `f32`
//! for training and feature extraction and in `f64` for gradient checking.

use std::fmt::Debug;
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, ToPrimitive};

mod adam;
mod dense;
mod ops;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use dense::{dense_forward, Activation, DenseGrad, DenseLayer};
pub use ops::{
    cross_entropy, dropout_backward, dropout_forward, fuse_multiply, fuse_multiply_backward,
    l2_normalize, l2_normalize_backward, softmax, softmax_cross_entropy_backward, LabelOneHot,
    Probabilities, L2_EPS, LOG_CLAMP,
};

pub trait Real:
    Float + FromPrimitive + ToPrimitive + Sum + Default + Debug + Send + Sync + 'static
{
    fn of(x: f64) -> Self {
        Self::from_f64(x).expect("f64 converts to Real")
    }
}

impl<T> Real for T where
    T: Float + FromPrimitive + ToPrimitive + Sum + Default + Debug + Send + Sync + 'static
{
}

/// Dot product with eight independent accumulators so the loop vectorizes.
pub(crate) fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [T::zero(); 8];
    let ca = a.chunks_exact(8);
    let cb = b.chunks_exact(8);
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        for k in 0..8 {
            acc[k] = acc[k] + x[k] * y[k];
        }
    }
    let mut s = ((acc[0] + acc[4]) + (acc[1] + acc[5])) + ((acc[2] + acc[6]) + (acc[3] + acc[7]));
    for (x, y) in ra.iter().zip(rb) {
        s = s + *x * *y;
    }
    s
}

/// `y += alpha * x`
pub(crate) fn axpy<T: Real>(alpha: T, x: &[T], y: &mut [T]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi = *yi + alpha * *xi;
    }
}
