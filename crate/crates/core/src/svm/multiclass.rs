use super::{normalize_features, train_binary, BinarySvm, FeatureStats, KernelSpec, SvmSettings};
use crate::{Error, Result};

/// One-vs-one ensemble: one [`BinarySvm`] per unordered class pair, in
/// `(0,1), (0,2), ..., (C-2,C-1)` order.
#[derive(Debug, Clone, PartialEq)]
pub struct SvmModel {
    pub machines: Vec<BinarySvm>,
    pub num_classes: usize,
    pub stats: FeatureStats,
    pub kernel: KernelSpec,
    pub regularization: f64,
}

impl SvmModel {
    pub fn all_converged(&self) -> bool {
        self.machines.iter().all(|m| m.converged)
    }
}

/// Trains `C (C - 1) / 2` machines, each on the z-scored samples of its two classes.
pub fn train_multiclass(
    features: &[Vec<f64>],
    labels: &[usize],
    num_classes: usize,
    settings: &SvmSettings,
) -> Result<SvmModel> {
    if num_classes < 2 {
        return Err(Error::InvalidConfig(format!(
            "one-vs-one SVM needs >= 2 classes, got {num_classes}"
        )));
    }
    if features.len() != labels.len() {
        return Err(Error::dim("SVM labels", features.len(), labels.len()));
    }
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); num_classes];
    for (i, &l) in labels.iter().enumerate() {
        if l >= num_classes {
            return Err(Error::InvalidLabel(format!(
                "class {l} outside [0, {num_classes})"
            )));
        }
        by_class[l].push(i);
    }
    if let Some(empty) = by_class.iter().position(Vec::is_empty) {
        return Err(Error::EmptyClass(empty));
    }

    let (normalized, stats) = normalize_features(features, None)?;
    let kernel = settings.kernel_for(stats.dim());
    kernel.validate()?;
    let smo = settings.smo();
    let mut machines = Vec::with_capacity(num_classes * (num_classes - 1) / 2);
    for a in 0..num_classes {
        for b in a + 1..num_classes {
            let idx: Vec<usize> = by_class[a].iter().chain(&by_class[b]).copied().collect();
            let x: Vec<Vec<f64>> = idx.iter().map(|&i| normalized[i].clone()).collect();
            let y: Vec<f64> = idx
                .iter()
                .map(|&i| if labels[i] == a { 1.0 } else { -1.0 })
                .collect();
            let mut m = train_binary(&x, &y, kernel, &smo)?;
            m.pair = (a, b);
            machines.push(m);
        }
    }
    Ok(SvmModel {
        machines,
        num_classes,
        stats,
        kernel,
        regularization: settings.regularization,
    })
}

/// Majority vote over all machines.
///
/// Ties go to the tied class with the largest summed |decision value| over
/// the machines that voted for it, then to the lowest class index.
pub fn predict(model: &SvmModel, feature: &[f64]) -> Result<usize> {
    let x = model.stats.apply(feature)?;
    let mut votes = vec![0usize; model.num_classes];
    let mut confidence = vec![0.0f64; model.num_classes];
    for m in &model.machines {
        let d = m.decision(&x);
        let winner = if d > 0.0 { m.pair.0 } else { m.pair.1 };
        votes[winner] += 1;
        confidence[winner] += d.abs();
    }
    let mut best = 0;
    for k in 1..model.num_classes {
        if votes[k] > votes[best] || (votes[k] == votes[best] && confidence[k] > confidence[best]) {
            best = k;
        }
    }
    Ok(best)
}

pub fn predict_batch(model: &SvmModel, features: &[Vec<f64>]) -> Result<Vec<usize>> {
    features.iter().map(|f| predict(model, f)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::svm::{KernelKind, SmoConfig};

    fn blobs(classes: usize, per: usize) -> (Vec<Vec<f64>>, Vec<usize>) {
        let mut x = Vec::new();
        let mut y = Vec::new();
        for c in 0..classes {
            let angle = c as f64 * std::f64::consts::TAU / classes as f64;
            for i in 0..per {
                let jitter = (i as f64 * 1.7 + c as f64).sin() * 0.2;
                x.push(vec![3.0 * angle.cos() + jitter, 3.0 * angle.sin() - jitter]);
                y.push(c);
            }
        }
        (x, y)
    }

    #[test]
    fn three_classes_three_machines() {
        let (x, y) = blobs(3, 6);
        let m = train_multiclass(&x, &y, 3, &SvmSettings::default()).unwrap();
        assert_eq!(m.machines.len(), 3);
        let pairs: Vec<_> = m.machines.iter().map(|b| b.pair).collect();
        assert_eq!(pairs, vec![(0, 1), (0, 2), (1, 2)]);
        assert_eq!(predict_batch(&m, &x).unwrap(), y);
    }

    #[test]
    fn two_classes_reduce_to_the_binary_machine() {
        let (x, y) = blobs(2, 8);
        let settings = SvmSettings {
            coef0: 1.0,
            ..SvmSettings::default()
        };
        let m = train_multiclass(&x, &y, 2, &settings).unwrap();
        let (z, _) = normalize_features(&x, None).unwrap();
        let yb: Vec<f64> = y.iter().map(|&c| if c == 0 { 1.0 } else { -1.0 }).collect();
        let b = train_binary(&z, &yb, settings.kernel_for(2), &settings.smo()).unwrap();
        for (xi, zi) in x.iter().zip(&z) {
            let expect = if b.decision(zi) > 0.0 { 0 } else { 1 };
            assert_eq!(predict(&m, xi).unwrap(), expect);
        }
    }

    #[test]
    fn machine_count_formula() {
        for c in [2usize, 3, 10, 50, 1251] {
            assert_eq!(c * (c - 1) / 2, (0..c).map(|a| c - 1 - a).sum::<usize>());
        }
        assert_eq!(1251 * 1250 / 2, 781_875);
    }

    #[test]
    fn empty_class_rejected() {
        let (x, y) = blobs(2, 3);
        assert!(matches!(
            train_multiclass(&x, &y, 3, &SvmSettings::default()),
            Err(Error::EmptyClass(2))
        ));
        assert!(train_multiclass(&x, &y, 1, &SvmSettings::default()).is_err());
    }

    fn stub(pair: (usize, usize), coef: f64) -> BinarySvm {
        BinarySvm {
            support_vectors: vec![vec![1.0]],
            dual_coef: vec![coef],
            bias: 0.0,
            kernel: KernelSpec::linear(),
            pair,
            converged: true,
            iterations: 0,
            objective: 0.0,
        }
    }

    fn cyclic(c01: f64, c02: f64, c12: f64) -> SvmModel {
        SvmModel {
            machines: vec![stub((0, 1), c01), stub((0, 2), c02), stub((1, 2), c12)],
            num_classes: 3,
            stats: FeatureStats {
                mean: vec![0.0],
                scale: vec![1.0],
            },
            kernel: KernelSpec {
                kind: KernelKind::Linear,
                ..KernelSpec::linear()
            },
            regularization: 1.0,
        }
    }

    #[test]
    fn cyclic_tie_broken_by_decision_magnitude() {
        // At x = 1: 0 beats 1 (|d| = 1), 2 beats 0 (|d| = 3), 1 beats 2 (|d| = 2).
        let m = cyclic(1.0, -3.0, 2.0);
        for _ in 0..5 {
            assert_eq!(predict(&m, &[1.0]).unwrap(), 2);
        }
        // Equal magnitudes fall through to the lowest index.
        let m = cyclic(1.0, -1.0, 1.0);
        assert_eq!(predict(&m, &[1.0]).unwrap(), 0);
    }

    #[test]
    fn unanimous_vote_wins() {
        // 0 beats 1 and 2; 1 vs 2 irrelevant.
        let m = cyclic(1.0, 1.0, -1.0);
        assert_eq!(predict(&m, &[1.0]).unwrap(), 0);
        assert!(predict(&m, &[1.0, 2.0]).is_err());
    }

    #[test]
    fn smo_defaults_used() {
        assert_eq!(SvmSettings::default().smo(), SmoConfig::default());
    }
}
