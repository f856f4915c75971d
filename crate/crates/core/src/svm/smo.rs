//! Sequential minimal optimization for the soft-margin SVM dual
//!
//! ```text
//! min_a  1/2 a^T Q a - e^T a,   Q_ij = y_i y_j K(x_i, x_j)
//! s.t.   0 <= a_i <= C,  y^T a = 0
//! ```
//!
//! Working pairs are chosen as the maximal violating pair and updated
//! analytically; iteration stops once the KKT gap drops below `tol`.

use std::borrow::Cow;
use std::cell::RefCell;
use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use super::KernelSpec;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmoConfig {
    /// Box bound `C` on every dual variable.
    pub regularization: f64,
    /// Stop when `max_up(-y G) - min_low(-y G) <= tol`.
    pub tol: f64,
    /// Iteration cap, in passes of `n` pair updates.
    pub max_passes: usize,
    /// Largest sample count for which the full Gram matrix is precomputed.
    pub full_gram_limit: usize,
    /// Kernel rows kept when the Gram matrix is computed on demand.
    pub row_cache: usize,
}

impl Default for SmoConfig {
    fn default() -> Self {
        SmoConfig {
            regularization: 1.0,
            tol: 1e-3,
            max_passes: 10_000,
            full_gram_limit: 4096,
            row_cache: 256,
        }
    }
}

/// Binary machine; a positive decision value votes for `pair.0`.
#[derive(Debug, Clone, PartialEq)]
pub struct BinarySvm {
    pub support_vectors: Vec<Vec<f64>>,
    /// `alpha_i * y_i` for each support vector.
    pub dual_coef: Vec<f64>,
    pub bias: f64,
    pub kernel: KernelSpec,
    pub pair: (usize, usize),
    pub converged: bool,
    pub iterations: usize,
    /// Dual objective `sum(a) - 1/2 a^T Q a` at the solution.
    pub objective: f64,
}

impl BinarySvm {
    pub fn decision(&self, x: &[f64]) -> f64 {
        self.support_vectors
            .iter()
            .zip(&self.dual_coef)
            .map(|(sv, c)| c * self.kernel.eval_unchecked(sv, x))
            .sum::<f64>()
            + self.bias
    }
}

enum Gram<'a> {
    Full {
        n: usize,
        k: Vec<f64>,
    },
    Rows {
        x: &'a [Vec<f64>],
        kernel: KernelSpec,
        cache: RefCell<VecDeque<(usize, Vec<f64>)>>,
        capacity: usize,
    },
}

impl<'a> Gram<'a> {
    fn new(x: &'a [Vec<f64>], kernel: KernelSpec, cfg: &SmoConfig) -> Self {
        let n = x.len();
        if n <= cfg.full_gram_limit {
            let mut k = vec![0.0; n * n];
            for i in 0..n {
                for j in i..n {
                    let v = kernel.eval_unchecked(&x[i], &x[j]);
                    k[i * n + j] = v;
                    k[j * n + i] = v;
                }
            }
            Gram::Full { n, k }
        } else {
            Gram::Rows {
                x,
                kernel,
                cache: RefCell::new(VecDeque::new()),
                capacity: cfg.row_cache.max(2),
            }
        }
    }

    fn row(&self, i: usize) -> Cow<'_, [f64]> {
        match self {
            Gram::Full { n, k } => Cow::Borrowed(&k[i * n..(i + 1) * n]),
            Gram::Rows {
                x,
                kernel,
                cache,
                capacity,
            } => {
                let mut cache = cache.borrow_mut();
                if let Some(pos) = cache.iter().position(|(r, _)| *r == i) {
                    let entry = cache.remove(pos).unwrap();
                    let row = entry.1.clone();
                    cache.push_back(entry);
                    return Cow::Owned(row);
                }
                let row: Vec<f64> = x
                    .iter()
                    .map(|xj| kernel.eval_unchecked(&x[i], xj))
                    .collect();
                if cache.len() == *capacity {
                    cache.pop_front();
                }
                cache.push_back((i, row.clone()));
                Cow::Owned(row)
            }
        }
    }
}

/// Trains a binary soft-margin SVM on labels `+1` / `-1`.
///
/// Hitting the iteration cap is not an error; the model comes back with
/// `converged = false`.
pub fn train_binary(
    features: &[Vec<f64>],
    labels: &[f64],
    kernel: KernelSpec,
    cfg: &SmoConfig,
) -> Result<BinarySvm> {
    kernel.validate()?;
    if features.len() != labels.len() {
        return Err(Error::dim("SVM labels", features.len(), labels.len()));
    }
    if let Some(&bad) = labels.iter().find(|&&y| y != 1.0 && y != -1.0) {
        return Err(Error::InvalidLabel(format!(
            "binary SVM label {bad} is not +1 or -1"
        )));
    }
    if !(labels.contains(&1.0) && labels.contains(&-1.0)) {
        return Err(Error::SingleClass);
    }
    if !(cfg.regularization > 0.0 && cfg.regularization.is_finite()) {
        return Err(Error::InvalidConfig(format!(
            "regularization must be > 0, got {}",
            cfg.regularization
        )));
    }
    let dim = features[0].len();
    if let Some(f) = features.iter().find(|f| f.len() != dim) {
        return Err(Error::dim("SVM feature", dim, f.len()));
    }

    let n = features.len();
    let c = cfg.regularization;
    let y = labels;
    let gram = Gram::new(features, kernel, cfg);
    let diag: Vec<f64> = features
        .iter()
        .map(|x| kernel.eval_unchecked(x, x))
        .collect();
    let mut alpha = vec![0.0f64; n];
    let mut grad = vec![-1.0f64; n];
    let max_iter = cfg.max_passes.saturating_mul(n.max(1));
    let mut iterations = 0;
    let mut converged = false;

    let in_up = |a: f64, y: f64| (y > 0.0 && a < c) || (y < 0.0 && a > 0.0);
    let in_low = |a: f64, y: f64| (y > 0.0 && a > 0.0) || (y < 0.0 && a < c);

    while iterations < max_iter {
        let mut i = usize::MAX;
        let mut g_max = f64::NEG_INFINITY;
        let mut j = usize::MAX;
        let mut g_min = f64::INFINITY;
        for t in 0..n {
            let v = -y[t] * grad[t];
            if in_up(alpha[t], y[t]) && v > g_max {
                g_max = v;
                i = t;
            }
            if in_low(alpha[t], y[t]) && v < g_min {
                g_min = v;
                j = t;
            }
        }
        if i == usize::MAX || j == usize::MAX || g_max - g_min <= cfg.tol {
            converged = true;
            break;
        }
        iterations += 1;

        let ki = gram.row(i);
        let kj = gram.row(j);
        let q_ij = y[i] * y[j] * ki[j];
        let (old_i, old_j) = (alpha[i], alpha[j]);
        if y[i] != y[j] {
            let quad = (diag[i] + diag[j] + 2.0 * q_ij).max(1e-12);
            let delta = (-grad[i] - grad[j]) / quad;
            let diff = alpha[i] - alpha[j];
            alpha[i] += delta;
            alpha[j] += delta;
            if diff > 0.0 {
                if alpha[j] < 0.0 {
                    alpha[j] = 0.0;
                    alpha[i] = diff;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = -diff;
            }
            if diff > 0.0 {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = c - diff;
                }
            } else if alpha[j] > c {
                alpha[j] = c;
                alpha[i] = c + diff;
            }
        } else {
            let quad = (diag[i] + diag[j] - 2.0 * q_ij).max(1e-12);
            let delta = (grad[i] - grad[j]) / quad;
            let sum = alpha[i] + alpha[j];
            alpha[i] -= delta;
            alpha[j] += delta;
            if sum > c {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = sum - c;
                }
            } else if alpha[j] < 0.0 {
                alpha[j] = 0.0;
                alpha[i] = sum;
            }
            if sum > c {
                if alpha[j] > c {
                    alpha[j] = c;
                    alpha[i] = sum - c;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = sum;
            }
        }
        let (di, dj) = (alpha[i] - old_i, alpha[j] - old_j);
        for t in 0..n {
            grad[t] += y[t] * (y[i] * ki[t] * di + y[j] * kj[t] * dj);
        }
    }

    // Bias: mean over free vectors, midpoint of the feasible interval otherwise.
    let mut ub = f64::INFINITY;
    let mut lb = f64::NEG_INFINITY;
    let mut free_sum = 0.0;
    let mut free = 0usize;
    for t in 0..n {
        let yg = y[t] * grad[t];
        let at_upper = alpha[t] >= c;
        let at_lower = alpha[t] <= 0.0;
        if at_upper {
            if y[t] < 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else if at_lower {
            if y[t] > 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else {
            free += 1;
            free_sum += yg;
        }
    }
    let rho = if free > 0 {
        free_sum / free as f64
    } else {
        (ub + lb) / 2.0
    };

    let objective = alpha.iter().sum::<f64>()
        - 0.5
            * alpha
                .iter()
                .zip(&grad)
                .map(|(a, g)| a * (g + 1.0))
                .sum::<f64>();

    let mut support_vectors = Vec::new();
    let mut dual_coef = Vec::new();
    for t in 0..n {
        if alpha[t] > 0.0 {
            support_vectors.push(features[t].clone());
            dual_coef.push(alpha[t] * y[t]);
        }
    }
    Ok(BinarySvm {
        support_vectors,
        dual_coef,
        bias: -rho,
        kernel,
        pair: (0, 1),
        converged,
        iterations,
        objective,
    })
}
