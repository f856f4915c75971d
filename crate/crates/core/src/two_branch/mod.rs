//! Two-branch voice/face fusion network.
//!
//! ```text
//! voice -> dense stack -> dropout(0.1) -> l2 ┐
//!                                            ⊙ -> post-fusion dense stack -> l2 -> head -> logits
//! face  -> dense stack -> dropout(0.2) -> l2 ┘                                  │
//!                                                                  fused feature (SVM input)
//! ```
//!
//! The fused feature handed to the SVM is the output of the last post-fusion
//! normalization, i.e. the last representation before the softmax head.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::nn::{
    adam_step, cross_entropy, dropout_backward, dropout_forward, fuse_multiply,
    fuse_multiply_backward, l2_normalize, l2_normalize_backward, softmax,
    softmax_cross_entropy_backward, Activation, AdamConfig, AdamState, DenseGrad, DenseLayer,
    LabelOneHot, Real,
};
use crate::store::PairedSample;
use crate::{Error, Result};

mod features;
mod io;

pub use features::{decode_features, encode_features, read_features, write_features, FeatureSet};
pub use io::{decode_model, encode_model, load_model, save_model, FORMAT_VERSION, MAGIC};

/// Name of the feature tap point, recorded in model files.
pub const FEATURE_TAP: &str = "post_fusion_l2";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArchitectureSpec {
    pub voice_in_dim: usize,
    pub face_in_dim: usize,
    /// Dense widths of the voice branch; the last must equal `fusion_dim`.
    pub voice_hidden_dims: Vec<usize>,
    /// Dense widths of the face branch; the last must equal `fusion_dim`.
    pub face_hidden_dims: Vec<usize>,
    pub fusion_dim: usize,
    /// Dense widths after fusion; the last (if any) must equal `fusion_dim`.
    pub post_fusion_hidden_dims: Vec<usize>,
    pub num_classes: usize,
    /// Dropout after the voice and face branch stacks, in that order.
    pub dropout_rates: [f64; 2],
    pub hidden_activation: Activation,
}

impl ArchitectureSpec {
    /// 1024-wide branches, one 1024-wide post-fusion layer, dropout 0.1 / 0.2.
    pub fn new(voice_in_dim: usize, face_in_dim: usize, num_classes: usize) -> Self {
        ArchitectureSpec::with_width(voice_in_dim, face_in_dim, num_classes, 1024)
    }

    pub fn with_width(
        voice_in_dim: usize,
        face_in_dim: usize,
        num_classes: usize,
        width: usize,
    ) -> Self {
        ArchitectureSpec {
            voice_in_dim,
            face_in_dim,
            voice_hidden_dims: vec![width],
            face_hidden_dims: vec![width],
            fusion_dim: width,
            post_fusion_hidden_dims: vec![width],
            num_classes,
            dropout_rates: [0.1, 0.2],
            hidden_activation: Activation::Relu,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if self.num_classes < 2 {
            return bad(format!(
                "num_classes must be >= 2, got {}",
                self.num_classes
            ));
        }
        if self.voice_in_dim == 0 || self.face_in_dim == 0 || self.fusion_dim == 0 {
            return bad("input and fusion dimensions must be >= 1".into());
        }
        for (name, dims) in [
            ("voice_hidden_dims", &self.voice_hidden_dims),
            ("face_hidden_dims", &self.face_hidden_dims),
        ] {
            match dims.last() {
                None => return bad(format!("{name} must not be empty")),
                Some(&last) if last != self.fusion_dim => {
                    return bad(format!(
                        "{name} ends at {last}, but branches must end at fusion_dim {}",
                        self.fusion_dim
                    ))
                }
                _ => {}
            }
        }
        if let Some(&last) = self.post_fusion_hidden_dims.last() {
            if last != self.fusion_dim {
                return bad(format!(
                    "post_fusion_hidden_dims ends at {last}, expected fusion_dim {}",
                    self.fusion_dim
                ));
            }
        }
        let all = self
            .voice_hidden_dims
            .iter()
            .chain(&self.face_hidden_dims)
            .chain(&self.post_fusion_hidden_dims);
        if all.clone().any(|&d| d == 0) {
            return bad("layer widths must be >= 1".into());
        }
        if !self.dropout_rates.iter().all(|r| (0.0..1.0).contains(r)) {
            return bad(format!(
                "dropout rates {:?} outside [0, 1)",
                self.dropout_rates
            ));
        }
        Ok(())
    }

    fn stack_shapes(input: usize, dims: &[usize]) -> Vec<(usize, usize)> {
        let mut shapes = Vec::with_capacity(dims.len());
        let mut prev = input;
        for &d in dims {
            shapes.push((prev, d));
            prev = d;
        }
        shapes
    }

    /// `(in, out)` of every layer: voice stack, face stack, post-fusion stack, head.
    pub fn layer_shapes(&self) -> Vec<(usize, usize)> {
        let mut shapes = Self::stack_shapes(self.voice_in_dim, &self.voice_hidden_dims);
        shapes.extend(Self::stack_shapes(self.face_in_dim, &self.face_hidden_dims));
        shapes.extend(Self::stack_shapes(
            self.fusion_dim,
            &self.post_fusion_hidden_dims,
        ));
        shapes.push((self.fusion_dim, self.num_classes));
        shapes
    }

    pub fn param_count(&self) -> usize {
        self.layer_shapes().iter().map(|(i, o)| i * o + o).sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TwoBranchModel<T = f32> {
    pub voice_branch: Vec<DenseLayer<T>>,
    pub face_branch: Vec<DenseLayer<T>>,
    pub post_fusion: Vec<DenseLayer<T>>,
    pub classifier_head: DenseLayer<T>,
    pub spec: ArchitectureSpec,
}

/// Deterministically initialized model; equal `(spec, seed)` gives equal parameters.
pub fn build_model<T: Real>(spec: &ArchitectureSpec, seed: u64) -> Result<TwoBranchModel<T>> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let act = spec.hidden_activation;
    let mut stack = |input: usize, dims: &[usize]| -> Vec<DenseLayer<T>> {
        ArchitectureSpec::stack_shapes(input, dims)
            .into_iter()
            .map(|(i, o)| DenseLayer::init(i, o, act, &mut rng))
            .collect()
    };
    let voice_branch = stack(spec.voice_in_dim, &spec.voice_hidden_dims);
    let face_branch = stack(spec.face_in_dim, &spec.face_hidden_dims);
    let post_fusion = stack(spec.fusion_dim, &spec.post_fusion_hidden_dims);
    let classifier_head = DenseLayer::init(
        spec.fusion_dim,
        spec.num_classes,
        Activation::Identity,
        &mut rng,
    );
    Ok(TwoBranchModel {
        voice_branch,
        face_branch,
        post_fusion,
        classifier_head,
        spec: spec.clone(),
    })
}

impl<T: Real> TwoBranchModel<T> {
    pub fn layers(&self) -> impl Iterator<Item = &DenseLayer<T>> {
        self.voice_branch
            .iter()
            .chain(&self.face_branch)
            .chain(&self.post_fusion)
            .chain(std::iter::once(&self.classifier_head))
    }

    pub fn layers_mut(&mut self) -> impl Iterator<Item = &mut DenseLayer<T>> {
        self.voice_branch
            .iter_mut()
            .chain(self.face_branch.iter_mut())
            .chain(self.post_fusion.iter_mut())
            .chain(std::iter::once(&mut self.classifier_head))
    }

    pub fn param_count(&self) -> usize {
        self.layers().map(DenseLayer::param_count).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.layers()
            .all(|l| l.weights.iter().chain(&l.bias).all(|v| v.is_finite()))
    }

    fn check_inputs(&self, voice: &[T], face: &[T]) -> Result<()> {
        if voice.len() != self.spec.voice_in_dim {
            return Err(Error::dim(
                "voice input",
                self.spec.voice_in_dim,
                voice.len(),
            ));
        }
        if face.len() != self.spec.face_in_dim {
            return Err(Error::dim("face input", self.spec.face_in_dim, face.len()));
        }
        Ok(())
    }
}

/// Intermediate values of one branch, kept for the backward pass.
#[derive(Debug, Clone)]
struct BranchTrace<T> {
    /// Branch input followed by every dense output.
    acts: Vec<Vec<T>>,
    mask: Vec<T>,
    dropped: Vec<T>,
    normalized: Vec<T>,
}

/// Everything the backward pass needs from one forward evaluation.
#[derive(Debug, Clone)]
pub struct ForwardTrace<T> {
    voice: BranchTrace<T>,
    face: BranchTrace<T>,
    /// Fusion product followed by every post-fusion dense output.
    post_acts: Vec<Vec<T>>,
    pub fused: Vec<T>,
    pub logits: Vec<T>,
}

impl<T: Real> ForwardTrace<T> {
    /// Whether each hidden unit output is positive, in layer order. For
    /// ReLU stacks this is the activation pattern.
    pub fn unit_signs(&self) -> Vec<bool> {
        self.voice.acts[1..]
            .iter()
            .chain(&self.face.acts[1..])
            .chain(&self.post_acts[1..])
            .flatten()
            .map(|&v| v > T::zero())
            .collect()
    }
}

fn branch_forward<T: Real, R: Rng + ?Sized>(
    layers: &[DenseLayer<T>],
    input: &[T],
    rate: f64,
    rng: &mut R,
    training: bool,
) -> Result<BranchTrace<T>> {
    let mut acts = Vec::with_capacity(layers.len() + 1);
    acts.push(input.to_vec());
    for layer in layers {
        let next = layer.forward(acts.last().unwrap())?;
        acts.push(next);
    }
    let (dropped, mask) = dropout_forward(acts.last().unwrap(), rate, rng, training);
    let normalized = l2_normalize(&dropped);
    Ok(BranchTrace {
        acts,
        mask,
        dropped,
        normalized,
    })
}

fn branch_backward<T: Real>(
    layers: &[DenseLayer<T>],
    trace: &BranchTrace<T>,
    upstream: &[T],
    grads: &mut [DenseGrad<T>],
) -> Vec<T> {
    let g = l2_normalize_backward(&trace.dropped, &trace.normalized, upstream);
    let mut g = dropout_backward(&trace.mask, &g);
    for (k, layer) in layers.iter().enumerate().rev() {
        g = layer.backward(&trace.acts[k], &trace.acts[k + 1], &g, &mut grads[k]);
    }
    g
}

/// Full forward pass keeping intermediates.
pub fn forward_trace<T: Real, R: Rng + ?Sized>(
    model: &TwoBranchModel<T>,
    voice: &[T],
    face: &[T],
    training: bool,
    rng: &mut R,
) -> Result<ForwardTrace<T>> {
    model.check_inputs(voice, face)?;
    let [voice_rate, face_rate] = model.spec.dropout_rates;
    let voice = branch_forward(&model.voice_branch, voice, voice_rate, rng, training)?;
    let face = branch_forward(&model.face_branch, face, face_rate, rng, training)?;
    let mut post_acts = vec![fuse_multiply(&voice.normalized, &face.normalized)?];
    for layer in &model.post_fusion {
        let next = layer.forward(post_acts.last().unwrap())?;
        post_acts.push(next);
    }
    let fused = l2_normalize(post_acts.last().unwrap());
    let logits = model.classifier_head.forward(&fused)?;
    Ok(ForwardTrace {
        voice,
        face,
        post_acts,
        fused,
        logits,
    })
}

/// Returns `(logits, fused feature)`.
pub fn forward<T: Real, R: Rng + ?Sized>(
    model: &TwoBranchModel<T>,
    voice: &[T],
    face: &[T],
    training: bool,
    rng: &mut R,
) -> Result<(Vec<T>, Vec<T>)> {
    let t = forward_trace(model, voice, face, training, rng)?;
    Ok((t.logits, t.fused))
}

/// Parameter gradients, laid out like [`TwoBranchModel::layers`].
#[derive(Debug, Clone, PartialEq)]
pub struct ModelGrads<T> {
    pub voice: Vec<DenseGrad<T>>,
    pub face: Vec<DenseGrad<T>>,
    pub post: Vec<DenseGrad<T>>,
    pub head: DenseGrad<T>,
}

impl<T: Real> ModelGrads<T> {
    pub fn zeros_like(model: &TwoBranchModel<T>) -> Self {
        ModelGrads {
            voice: model
                .voice_branch
                .iter()
                .map(DenseGrad::zeros_like)
                .collect(),
            face: model
                .face_branch
                .iter()
                .map(DenseGrad::zeros_like)
                .collect(),
            post: model
                .post_fusion
                .iter()
                .map(DenseGrad::zeros_like)
                .collect(),
            head: DenseGrad::zeros_like(&model.classifier_head),
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = &DenseGrad<T>> {
        self.voice
            .iter()
            .chain(&self.face)
            .chain(&self.post)
            .chain(std::iter::once(&self.head))
    }

    fn iter_mut(&mut self) -> impl Iterator<Item = &mut DenseGrad<T>> {
        self.voice
            .iter_mut()
            .chain(self.face.iter_mut())
            .chain(self.post.iter_mut())
            .chain(std::iter::once(&mut self.head))
    }

    pub fn clear(&mut self) {
        self.iter_mut().for_each(DenseGrad::clear);
    }

    pub fn scale(&mut self, s: T) {
        self.iter_mut().for_each(|g| g.scale(s));
    }
}

/// Backpropagates a logit gradient through the trace, accumulating into
/// `grads`; returns the gradients with respect to the voice and face inputs.
pub fn backward<T: Real>(
    model: &TwoBranchModel<T>,
    trace: &ForwardTrace<T>,
    dlogits: &[T],
    grads: &mut ModelGrads<T>,
) -> (Vec<T>, Vec<T>) {
    let dfused =
        model
            .classifier_head
            .backward(&trace.fused, &trace.logits, dlogits, &mut grads.head);
    let mut g = l2_normalize_backward(trace.post_acts.last().unwrap(), &trace.fused, &dfused);
    for (k, layer) in model.post_fusion.iter().enumerate().rev() {
        g = layer.backward(
            &trace.post_acts[k],
            &trace.post_acts[k + 1],
            &g,
            &mut grads.post[k],
        );
    }
    let (dv, df) = fuse_multiply_backward(&trace.voice.normalized, &trace.face.normalized, &g);
    let dvoice = branch_backward(&model.voice_branch, &trace.voice, &dv, &mut grads.voice);
    let dface = branch_backward(&model.face_branch, &trace.face, &df, &mut grads.face);
    (dvoice, dface)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    CrossEntropy,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub learning_rate: f64,
    /// Clamped to the number of training pairs.
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    pub loss: LossKind,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 0.04,
            batch_size: 2048,
            epochs: 30,
            seed: 7,
            loss: LossKind::CrossEntropy,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "learning_rate must be > 0, got {}",
                self.learning_rate
            )));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidConfig("batch_size must be >= 1".into()));
        }
        Ok(())
    }

    pub fn effective_batch_size(&self, n: usize) -> usize {
        self.batch_size.min(n).max(1)
    }
}

pub(crate) fn to_real<T: Real>(x: &[f32]) -> Vec<T> {
    x.iter().map(|&v| T::of(v as f64)).collect()
}

/// Mini-batch Adam on mean cross-entropy; returns the model and one mean loss per epoch.
pub fn train<T: Real>(
    mut model: TwoBranchModel<T>,
    pairs: &[PairedSample],
    cfg: &TrainConfig,
) -> Result<(TwoBranchModel<T>, Vec<f64>)> {
    cfg.validate()?;
    if pairs.is_empty() {
        return Err(Error::EmptyDataset("no training pairs".into()));
    }
    let c = model.spec.num_classes;
    let data: Vec<(Vec<T>, Vec<T>, LabelOneHot)> = pairs
        .iter()
        .map(|p| {
            let label = LabelOneHot::new(p.speaker_index, c)?;
            let (v, f) = (to_real(&p.voice), to_real(&p.face));
            model.check_inputs(&v, &f)?;
            Ok((v, f, label))
        })
        .collect::<Result<_>>()?;

    let shapes: Vec<usize> = model
        .layers()
        .flat_map(|l| [l.weights.len(), l.bias.len()])
        .collect();
    let mut adam = AdamState::new(
        &shapes,
        AdamConfig {
            lr: cfg.learning_rate,
            ..AdamConfig::default()
        },
    );
    let mut grads = ModelGrads::zeros_like(&model);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let batch_size = cfg.effective_batch_size(data.len());
    let mut history = Vec::with_capacity(cfg.epochs);

    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0f64;
        for batch in order.chunks(batch_size) {
            grads.clear();
            for &i in batch {
                let (v, f, label) = &data[i];
                let trace = forward_trace(&model, v, f, true, &mut rng)?;
                let p = softmax(&trace.logits);
                total += cross_entropy(&p, label).to_f64().unwrap_or(f64::NAN);
                let dlogits = softmax_cross_entropy_backward(&p, label);
                backward(&model, &trace, &dlogits, &mut grads);
            }
            grads.scale(T::one() / T::of(batch.len() as f64));
            let mut params: Vec<&mut [T]> = model
                .layers_mut()
                .flat_map(|l| [l.weights.as_mut_slice(), l.bias.as_mut_slice()])
                .collect();
            let g: Vec<&[T]> = grads
                .iter()
                .flat_map(|g| [g.weights.as_slice(), g.bias.as_slice()])
                .collect();
            adam_step(&mut params, &g, &mut adam)?;
        }
        let mean = total / data.len() as f64;
        if !mean.is_finite() || !model.is_finite() {
            return Err(Error::Diverged { epoch, loss: mean });
        }
        history.push(mean);
    }
    Ok((model, history))
}

/// Fusion-layer feature of one clip.
#[derive(Debug, Clone, PartialEq)]
pub struct FusedFeature<T = f32> {
    pub vector: Vec<T>,
    pub speaker_index: Option<usize>,
    /// The face input was absent and replaced by zeros.
    pub masked: bool,
}

/// Inference-mode fused feature; an absent face is replaced by the zero vector.
pub fn extract_features<T: Real>(
    model: &TwoBranchModel<T>,
    voice: &[T],
    face: Option<&[T]>,
) -> Result<FusedFeature<T>> {
    let zeros;
    let (face, masked) = match face {
        Some(f) => (f, false),
        None => {
            zeros = vec![T::zero(); model.spec.face_in_dim];
            (zeros.as_slice(), true)
        }
    };
    // Inference draws nothing from the generator.
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let (_, fused) = forward(model, voice, face, false, &mut rng)?;
    Ok(FusedFeature {
        vector: fused,
        speaker_index: None,
        masked,
    })
}

/// Extracts labelled features for every pair, optionally masking the face input.
pub fn extract_pairs(
    model: &TwoBranchModel<f32>,
    pairs: &[PairedSample],
    mask_face: bool,
) -> Result<Vec<FusedFeature>> {
    pairs
        .iter()
        .map(|p| {
            let face = (!mask_face).then_some(p.face.as_slice());
            let mut f = extract_features(model, &p.voice, face)?;
            f.speaker_index = Some(p.speaker_index);
            Ok(f)
        })
        .collect()
}
