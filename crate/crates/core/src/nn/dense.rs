use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{axpy, dot, Real};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Identity,
}

impl Activation {
    fn apply<T: Real>(self, z: T) -> T {
        match self {
            Activation::Relu => z.max(T::zero()),
            Activation::Identity => z,
        }
    }
}

/// Fully connected layer, weights stored row-major as `out_dim x in_dim`.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer<T> {
    pub weights: Vec<T>,
    pub bias: Vec<T>,
    pub in_dim: usize,
    pub out_dim: usize,
    pub activation: Activation,
}

/// Gradient accumulator shaped like a [`DenseLayer`].
#[derive(Debug, Clone, PartialEq)]
pub struct DenseGrad<T> {
    pub weights: Vec<T>,
    pub bias: Vec<T>,
}

impl<T: Real> DenseGrad<T> {
    pub fn zeros_like(layer: &DenseLayer<T>) -> Self {
        DenseGrad {
            weights: vec![T::zero(); layer.weights.len()],
            bias: vec![T::zero(); layer.bias.len()],
        }
    }

    pub fn scale(&mut self, s: T) {
        for g in self.weights.iter_mut().chain(self.bias.iter_mut()) {
            *g = *g * s;
        }
    }

    pub fn clear(&mut self) {
        self.weights.iter_mut().for_each(|g| *g = T::zero());
        self.bias.iter_mut().for_each(|g| *g = T::zero());
    }
}

impl<T: Real> DenseLayer<T> {
    pub fn new(
        weights: Vec<T>,
        bias: Vec<T>,
        in_dim: usize,
        activation: Activation,
    ) -> Result<Self> {
        let out_dim = bias.len();
        if weights.len() != out_dim * in_dim {
            return Err(Error::dim("dense weights", out_dim * in_dim, weights.len()));
        }
        Ok(DenseLayer {
            weights,
            bias,
            in_dim,
            out_dim,
            activation,
        })
    }

    /// Uniform in `[-s, s]` with `s = sqrt(6 / (in + out))`, zero bias.
    pub fn init<R: Rng + ?Sized>(
        in_dim: usize,
        out_dim: usize,
        activation: Activation,
        rng: &mut R,
    ) -> Self {
        let s = (6.0 / (in_dim + out_dim) as f64).sqrt();
        let weights = (0..in_dim * out_dim)
            .map(|_| T::of(rng.random_range(-s..=s)))
            .collect();
        DenseLayer {
            weights,
            bias: vec![T::zero(); out_dim],
            in_dim,
            out_dim,
            activation,
        }
    }

    pub fn param_count(&self) -> usize {
        self.weights.len() + self.bias.len()
    }

    pub fn row(&self, o: usize) -> &[T] {
        &self.weights[o * self.in_dim..(o + 1) * self.in_dim]
    }

    pub fn forward(&self, x: &[T]) -> Result<Vec<T>> {
        if x.len() != self.in_dim {
            return Err(Error::dim("dense input", self.in_dim, x.len()));
        }
        Ok((0..self.out_dim)
            .map(|o| self.activation.apply(dot(self.row(o), x) + self.bias[o]))
            .collect())
    }

    /// Accumulates parameter gradients into `grad` and returns the input gradient.
    ///
    /// `x` and `out` are the input and output of the matching forward call.
    pub fn backward(&self, x: &[T], out: &[T], upstream: &[T], grad: &mut DenseGrad<T>) -> Vec<T> {
        let mut dx = vec![T::zero(); self.in_dim];
        for o in 0..self.out_dim {
            let g = match self.activation {
                Activation::Relu if out[o] <= T::zero() => continue,
                _ => upstream[o],
            };
            if g == T::zero() {
                continue;
            }
            grad.bias[o] = grad.bias[o] + g;
            axpy(
                g,
                x,
                &mut grad.weights[o * self.in_dim..(o + 1) * self.in_dim],
            );
            axpy(g, self.row(o), &mut dx);
        }
        dx
    }
}

pub fn dense_forward<T: Real>(layer: &DenseLayer<T>, x: &[T]) -> Result<Vec<T>> {
    layer.forward(x)
}
