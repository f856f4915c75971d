//! Polynomial-kernel SVM: SMO binary solver combined one-vs-one.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

mod io;
mod multiclass;
mod smo;

pub use io::{decode_svm, encode_svm, load_svm, save_svm, MAGIC};
pub use multiclass::{predict, predict_batch, train_multiclass, SvmModel};
pub use smo::{train_binary, BinarySvm, SmoConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelKind {
    Poly,
    Linear,
}

/// `K(x, y) = (gamma <x, y> + coef0)^degree` for poly, `<x, y>` for linear.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub kind: KernelKind,
    pub degree: u32,
    pub gamma: f64,
    pub coef0: f64,
}

impl KernelSpec {
    /// Cubic polynomial with `gamma = 1 / feature_dim` and `coef0 = 0`.
    pub fn poly(feature_dim: usize) -> Self {
        KernelSpec {
            kind: KernelKind::Poly,
            degree: 3,
            gamma: 1.0 / feature_dim.max(1) as f64,
            coef0: 0.0,
        }
    }

    pub fn linear() -> Self {
        KernelSpec {
            kind: KernelKind::Linear,
            degree: 1,
            gamma: 1.0,
            coef0: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.degree < 1 {
            return Err(Error::InvalidConfig("kernel degree must be >= 1".into()));
        }
        if !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "kernel gamma must be > 0, got {}",
                self.gamma
            )));
        }
        if !self.coef0.is_finite() {
            return Err(Error::InvalidConfig("kernel coef0 must be finite".into()));
        }
        Ok(())
    }

    #[inline]
    pub(crate) fn eval_unchecked(&self, x: &[f64], y: &[f64]) -> f64 {
        let d = crate::nn::dot(x, y);
        match self.kind {
            KernelKind::Linear => d,
            KernelKind::Poly => (self.gamma * d + self.coef0).powi(self.degree as i32),
        }
    }
}

pub fn kernel_eval(k: &KernelSpec, x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::dim("kernel arguments", x.len(), y.len()));
    }
    Ok(k.eval_unchecked(x, y))
}

/// SVM settings as they appear in configuration; `gamma = None` resolves to
/// `1 / feature_dim` once the feature width is known.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SvmSettings {
    pub kernel: KernelKind,
    pub degree: u32,
    pub gamma: Option<f64>,
    pub coef0: f64,
    pub regularization: f64,
    pub tol: f64,
    pub max_passes: usize,
}

impl Default for SvmSettings {
    fn default() -> Self {
        SvmSettings {
            kernel: KernelKind::Poly,
            degree: 3,
            gamma: None,
            coef0: 0.0,
            regularization: 1.0,
            tol: 1e-3,
            max_passes: 10_000,
        }
    }
}

impl SvmSettings {
    pub fn kernel_for(&self, feature_dim: usize) -> KernelSpec {
        match self.kernel {
            KernelKind::Linear => KernelSpec::linear(),
            KernelKind::Poly => KernelSpec {
                degree: self.degree,
                gamma: self.gamma.unwrap_or(1.0 / feature_dim.max(1) as f64),
                coef0: self.coef0,
                ..KernelSpec::poly(feature_dim)
            },
        }
    }

    pub fn smo(&self) -> SmoConfig {
        SmoConfig {
            regularization: self.regularization,
            tol: self.tol,
            max_passes: self.max_passes,
            ..SmoConfig::default()
        }
    }
}

/// Per-dimension z-score statistics of the training features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureStats {
    pub mean: Vec<f64>,
    /// Population standard deviation, floored at [`STD_FLOOR`].
    pub scale: Vec<f64>,
}

pub const STD_FLOOR: f64 = 1e-8;

impl FeatureStats {
    pub fn fit(features: &[Vec<f64>]) -> Result<Self> {
        let first = features
            .first()
            .ok_or_else(|| Error::EmptyDataset("no features to fit normalization on".into()))?;
        let dim = first.len();
        let n = features.len() as f64;
        let mut mean = vec![0.0; dim];
        for f in features {
            if f.len() != dim {
                return Err(Error::dim("feature", dim, f.len()));
            }
            for (m, x) in mean.iter_mut().zip(f) {
                *m += x;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; dim];
        for f in features {
            for ((v, x), m) in var.iter_mut().zip(f).zip(&mean) {
                *v += (x - m) * (x - m);
            }
        }
        let scale = var
            .into_iter()
            .map(|v| (v / n).sqrt().max(STD_FLOOR))
            .collect();
        Ok(FeatureStats { mean, scale })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn apply(&self, feature: &[f64]) -> Result<Vec<f64>> {
        if feature.len() != self.dim() {
            return Err(Error::dim(
                "feature vs normalization stats",
                self.dim(),
                feature.len(),
            ));
        }
        Ok(feature
            .iter()
            .zip(&self.mean)
            .zip(&self.scale)
            .map(|((x, m), s)| (x - m) / s)
            .collect())
    }
}

/// z-scores `features`; computes statistics from them unless `stats` is given.
pub fn normalize_features(
    features: &[Vec<f64>],
    stats: Option<&FeatureStats>,
) -> Result<(Vec<Vec<f64>>, FeatureStats)> {
    let stats = match stats {
        Some(s) => s.clone(),
        None => FeatureStats::fit(features)?,
    };
    let out = features
        .iter()
        .map(|f| stats.apply(f))
        .collect::<Result<_>>()?;
    Ok((out, stats))
}
