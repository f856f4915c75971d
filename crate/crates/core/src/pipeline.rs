//! End-to-end experiment: baseline SVM on raw voice embeddings versus SVMs on
//! fusion-layer features with and without the face input.

use serde::{Deserialize, Serialize};

use crate::eval::{compare_conditions, Comparison, Condition, EvalReport};
use crate::store::{label_map, pair_samples, voice_samples, EmbeddingRecord, Split};
use crate::svm::{predict_batch, train_multiclass, SvmModel, SvmSettings};
use crate::two_branch::{
    build_model, extract_pairs, train, ArchitectureSpec, FeatureSet, TrainConfig, TwoBranchModel,
};
use crate::{Error, Result};

/// Architecture overrides; input widths and class count come from the data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ArchConfig {
    pub voice_hidden_dims: Vec<usize>,
    pub face_hidden_dims: Vec<usize>,
    pub fusion_dim: usize,
    pub post_fusion_hidden_dims: Vec<usize>,
    pub dropout_rates: [f64; 2],
}

impl Default for ArchConfig {
    fn default() -> Self {
        ArchConfig::with_width(1024)
    }
}

impl ArchConfig {
    pub fn with_width(width: usize) -> Self {
        let s = ArchitectureSpec::with_width(1, 1, 2, width);
        ArchConfig {
            voice_hidden_dims: s.voice_hidden_dims,
            face_hidden_dims: s.face_hidden_dims,
            fusion_dim: s.fusion_dim,
            post_fusion_hidden_dims: s.post_fusion_hidden_dims,
            dropout_rates: s.dropout_rates,
        }
    }

    pub fn resolve(
        &self,
        voice_in_dim: usize,
        face_in_dim: usize,
        num_classes: usize,
    ) -> ArchitectureSpec {
        ArchitectureSpec {
            voice_in_dim,
            face_in_dim,
            voice_hidden_dims: self.voice_hidden_dims.clone(),
            face_hidden_dims: self.face_hidden_dims.clone(),
            fusion_dim: self.fusion_dim,
            post_fusion_hidden_dims: self.post_fusion_hidden_dims.clone(),
            num_classes,
            dropout_rates: self.dropout_rates,
            hidden_activation: crate::nn::Activation::Relu,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub arch: ArchConfig,
    pub train: TrainConfig,
    pub svm: SvmSettings,
}

fn to_f64(features: &[Vec<f32>]) -> Vec<Vec<f64>> {
    features
        .iter()
        .map(|f| f.iter().map(|&x| x as f64).collect())
        .collect()
}

fn dims(records: &[EmbeddingRecord]) -> (usize, usize) {
    use crate::store::Modality;
    let dim = |m| {
        records
            .iter()
            .find(|r| r.modality == m)
            .map_or(0, |r| r.vector.len())
    };
    (dim(Modality::Voice), dim(Modality::Face))
}

/// Builds and trains the fusion network on the train-split pairs.
pub fn train_fusion(
    records: &[EmbeddingRecord],
    arch: &ArchConfig,
    train_cfg: &TrainConfig,
) -> Result<(TwoBranchModel, Vec<f64>)> {
    let pairs = pair_samples(records, Split::Train)?.pairs;
    let (voice_dim, face_dim) = dims(records);
    let spec = arch.resolve(voice_dim, face_dim, label_map(records).len());
    let model = build_model::<f32>(&spec, train_cfg.seed)?;
    train(model, &pairs, train_cfg)
}

/// Fusion-layer features of every paired clip in `split`.
pub fn extract_feature_set(
    model: &TwoBranchModel,
    records: &[EmbeddingRecord],
    split: Split,
    mask_face: bool,
) -> Result<FeatureSet> {
    let pairs = pair_samples(records, split)?.pairs;
    let feats = extract_pairs(model, &pairs, mask_face)?;
    Ok(FeatureSet {
        dim: model.spec.fusion_dim,
        masked: mask_face,
        split,
        condition: if mask_face {
            Condition::FusedMasked
        } else {
            Condition::FusedAided
        },
        labels: sorted_labels(records),
        speaker_indices: feats.iter().map(|f| f.speaker_index.unwrap()).collect(),
        features: feats.into_iter().map(|f| f.vector).collect(),
    })
}

/// Raw voice embeddings of `split` packaged as a baseline feature set.
pub fn voice_feature_set(records: &[EmbeddingRecord], split: Split) -> Result<FeatureSet> {
    let (features, speaker_indices) = voice_samples(records, split)?;
    Ok(FeatureSet {
        dim: features[0].len(),
        masked: false,
        split,
        condition: Condition::VoiceOnlyBaseline,
        labels: sorted_labels(records),
        features,
        speaker_indices,
    })
}

fn sorted_labels(records: &[EmbeddingRecord]) -> Vec<String> {
    label_map(records).into_keys().collect()
}

pub fn train_svm(train_set: &FeatureSet, settings: &SvmSettings) -> Result<SvmModel> {
    train_multiclass(
        &to_f64(&train_set.features),
        &train_set.speaker_indices,
        train_set.num_classes(),
        settings,
    )
}

pub fn evaluate_svm(svm: &SvmModel, test_set: &FeatureSet) -> Result<EvalReport> {
    if test_set.num_classes() != svm.num_classes {
        return Err(Error::dim(
            "test label table",
            svm.num_classes,
            test_set.num_classes(),
        ));
    }
    let preds = predict_batch(svm, &to_f64(&test_set.features))?;
    EvalReport::new(
        test_set.condition,
        &preds,
        &test_set.speaker_indices,
        svm.num_classes,
    )
}

/// Train an SVM on `train_set`, score it on `test_set`.
pub fn svm_condition(
    train_set: &FeatureSet,
    test_set: &FeatureSet,
    settings: &SvmSettings,
) -> Result<EvalReport> {
    evaluate_svm(&train_svm(train_set, settings)?, test_set)
}

pub fn run_baseline(records: &[EmbeddingRecord], settings: &SvmSettings) -> Result<EvalReport> {
    svm_condition(
        &voice_feature_set(records, Split::Train)?,
        &voice_feature_set(records, Split::Test)?,
        settings,
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentOutcome {
    pub loss_history: Vec<f64>,
    pub baseline: EvalReport,
    pub aided: EvalReport,
    pub masked: EvalReport,
    pub comparison: Comparison,
}

impl ExperimentOutcome {
    pub fn reports(&self) -> [&EvalReport; 3] {
        [&self.baseline, &self.aided, &self.masked]
    }
}

/// Runs all three conditions on one dataset.
pub fn run_experiment(
    records: &[EmbeddingRecord],
    cfg: &ExperimentConfig,
) -> Result<ExperimentOutcome> {
    let baseline = run_baseline(records, &cfg.svm)?;
    let (model, loss_history) = train_fusion(records, &cfg.arch, &cfg.train)?;
    let condition = |mask: bool| -> Result<EvalReport> {
        svm_condition(
            &extract_feature_set(&model, records, Split::Train, mask)?,
            &extract_feature_set(&model, records, Split::Test, mask)?,
            &cfg.svm,
        )
    };
    let aided = condition(false)?;
    let masked = condition(true)?;
    let comparison = compare_conditions(&[baseline.clone(), aided.clone(), masked.clone()])?;
    Ok(ExperimentOutcome {
        loss_history,
        baseline,
        aided,
        masked,
        comparison,
    })
}
