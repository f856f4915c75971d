//! Browser bindings: a small synthetic experiment and a 2-D SVM playground.
//!
//! Every entry point takes and returns JSON strings. Errors come back as
//! `"E_CODE: message"`.

use std::collections::BTreeMap;

use fuseid_core::eval::{Condition, EvalReport};
use fuseid_core::pipeline::{run_experiment, ArchConfig, ExperimentConfig};
use fuseid_core::store::{generate_synthetic, SynthConfig};
use fuseid_core::svm::{predict, train_multiclass, KernelKind, SvmSettings};
use fuseid_core::two_branch::TrainConfig;
use serde::{Deserialize, Serialize};
use wasm_bindgen::prelude::*;

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DemoExperiment {
    pub identities: usize,
    pub voice_noise: f64,
    pub face_noise: f64,
    pub train_clips: usize,
    pub test_clips: usize,
    pub width: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub seed: u64,
}

impl Default for DemoExperiment {
    fn default() -> Self {
        DemoExperiment {
            identities: 10,
            voice_noise: 0.8,
            face_noise: 0.2,
            train_clips: 12,
            test_clips: 6,
            width: 64,
            epochs: 20,
            learning_rate: 0.04,
            seed: 7,
        }
    }
}

#[derive(Debug, Serialize)]
struct ConditionResult {
    condition: Condition,
    top1: f64,
    n_samples: usize,
    confusion: Vec<Vec<u64>>,
}

impl From<&EvalReport> for ConditionResult {
    fn from(r: &EvalReport) -> Self {
        ConditionResult {
            condition: r.condition,
            top1: r.top1,
            n_samples: r.n_samples,
            confusion: (0..r.confusion.num_classes())
                .map(|i| r.confusion.row(i).to_vec())
                .collect(),
        }
    }
}

#[derive(Debug, Serialize)]
struct ExperimentResult {
    conditions: Vec<ConditionResult>,
    loss: Vec<f64>,
    summary: String,
}

fn fail(e: fuseid_core::Error) -> String {
    format!("{}: {e}", e.code())
}

fn bad_json(e: serde_json::Error) -> String {
    format!("E_CONFIG: {e}")
}

/// Runs baseline, aided and masked conditions on a synthetic dataset.
pub fn experiment_json(config: &str) -> Result<String, String> {
    let demo: DemoExperiment = if config.trim().is_empty() {
        DemoExperiment::default()
    } else {
        serde_json::from_str(config).map_err(bad_json)?
    };
    let synth = SynthConfig {
        num_identities: demo.identities,
        clips_per_identity_train: demo.train_clips,
        clips_per_identity_test: demo.test_clips,
        voice_noise_sigma: demo.voice_noise,
        face_noise_sigma: demo.face_noise,
        seed: demo.seed,
        ..SynthConfig::default()
    };
    let records = generate_synthetic(&synth).map_err(fail)?;
    let cfg = ExperimentConfig {
        arch: ArchConfig::with_width(demo.width),
        train: TrainConfig {
            learning_rate: demo.learning_rate,
            epochs: demo.epochs,
            seed: demo.seed,
            ..TrainConfig::default()
        },
        svm: SvmSettings::default(),
    };
    cfg.train.validate().map_err(fail)?;
    let out = run_experiment(&records, &cfg).map_err(fail)?;
    let result = ExperimentResult {
        conditions: out
            .reports()
            .into_iter()
            .map(ConditionResult::from)
            .collect(),
        loss: out.loss_history.clone(),
        summary: out.comparison.to_text(),
    };
    Ok(serde_json::to_string(&result).expect("result serializes"))
}

#[derive(Debug, Clone, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
    pub label: usize,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RegionRequest {
    pub points: Vec<Point>,
    pub kernel: KernelKind,
    pub degree: u32,
    pub coef0: f64,
    pub regularization: f64,
    /// Cells per side of the square `[-1, 1]^2` prediction grid.
    pub grid: usize,
}

impl Default for RegionRequest {
    fn default() -> Self {
        RegionRequest {
            points: Vec::new(),
            kernel: KernelKind::Poly,
            degree: 3,
            coef0: 1.0,
            regularization: 1.0,
            grid: 48,
        }
    }
}

#[derive(Debug, Serialize)]
struct RegionResult {
    grid: usize,
    /// Row-major labels, row 0 at `y = -1`.
    cells: Vec<usize>,
    support_vectors: usize,
    train_accuracy: f64,
    converged: bool,
}

/// Trains a one-vs-one SVM on labelled 2-D points and labels a grid.
pub fn regions_json(request: &str) -> Result<String, String> {
    let req: RegionRequest = serde_json::from_str(request).map_err(bad_json)?;
    if req.grid == 0 || req.grid > 256 {
        return Err(format!(
            "E_CONFIG: grid must be in 1..=256, got {}",
            req.grid
        ));
    }
    // Compact the labels in use to 0..k so absent classes are not an error.
    let used: BTreeMap<usize, usize> = req
        .points
        .iter()
        .map(|p| p.label)
        .collect::<std::collections::BTreeSet<_>>()
        .into_iter()
        .enumerate()
        .map(|(i, l)| (l, i))
        .collect();
    let back: Vec<usize> = used.keys().copied().collect();
    let x: Vec<Vec<f64>> = req.points.iter().map(|p| vec![p.x, p.y]).collect();
    let y: Vec<usize> = req.points.iter().map(|p| used[&p.label]).collect();
    let settings = SvmSettings {
        kernel: req.kernel,
        degree: req.degree,
        coef0: req.coef0,
        regularization: req.regularization,
        ..SvmSettings::default()
    };
    let model = train_multiclass(&x, &y, back.len(), &settings).map_err(fail)?;
    let n = req.grid;
    let mut cells = Vec::with_capacity(n * n);
    for r in 0..n {
        for c in 0..n {
            let gx = -1.0 + (c as f64 + 0.5) * 2.0 / n as f64;
            let gy = -1.0 + (r as f64 + 0.5) * 2.0 / n as f64;
            cells.push(back[predict(&model, &[gx, gy]).map_err(fail)?]);
        }
    }
    let correct = x
        .iter()
        .zip(&y)
        .filter(|(p, &t)| predict(&model, p).map(|q| q == t).unwrap_or(false))
        .count();
    let result = RegionResult {
        grid: n,
        cells,
        support_vectors: model.machines.iter().map(|m| m.support_vectors.len()).sum(),
        train_accuracy: correct as f64 / x.len() as f64,
        converged: model.all_converged(),
    };
    Ok(serde_json::to_string(&result).expect("result serializes"))
}

#[wasm_bindgen]
pub fn run_experiment_demo(config: &str) -> Result<String, JsError> {
    experiment_json(config).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn svm_regions(request: &str) -> Result<String, JsError> {
    regions_json(request).map_err(|e| JsError::new(&e))
}
