//! Shared-latent synthetic embeddings.
//!
//! Each identity owns a latent vector; both modalities are fixed linear views
//! of it (one mixing matrix per modality per dataset) plus per-clip Gaussian
//! noise, L2-normalized. Voice and face therefore share learnable structure
//! and their noise levels can be dialled independently.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{EmbeddingRecord, Modality, Split};
use crate::nn::l2_normalize;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub num_identities: usize,
    pub latent_dim: usize,
    pub voice_dim: usize,
    pub face_dim: usize,
    pub clips_per_identity_train: usize,
    pub clips_per_identity_test: usize,
    pub voice_noise_sigma: f64,
    pub face_noise_sigma: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            num_identities: 50,
            latent_dim: 16,
            voice_dim: 64,
            face_dim: 64,
            clips_per_identity_train: 20,
            clips_per_identity_test: 8,
            voice_noise_sigma: 0.8,
            face_noise_sigma: 0.2,
            seed: 7,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let counts = [
            ("num_identities", self.num_identities),
            ("latent_dim", self.latent_dim),
            ("voice_dim", self.voice_dim),
            ("face_dim", self.face_dim),
            ("clips_per_identity_train", self.clips_per_identity_train),
            ("clips_per_identity_test", self.clips_per_identity_test),
        ];
        if let Some((name, _)) = counts.iter().find(|(_, v)| *v == 0) {
            return Err(Error::InvalidConfig(format!("synth.{name} must be >= 1")));
        }
        for (name, s) in [
            ("voice_noise_sigma", self.voice_noise_sigma),
            ("face_noise_sigma", self.face_noise_sigma),
        ] {
            if !(s >= 0.0 && s.is_finite()) {
                return Err(Error::InvalidConfig(format!(
                    "synth.{name} must be a finite value >= 0, got {s}"
                )));
            }
        }
        if self.latent_dim > self.voice_dim.min(self.face_dim) {
            return Err(Error::InvalidConfig(format!(
                "synth.latent_dim ({}) exceeds min(voice_dim, face_dim) ({})",
                self.latent_dim,
                self.voice_dim.min(self.face_dim)
            )));
        }
        Ok(())
    }
}

fn gaussian(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| StandardNormal.sample(rng)).collect()
}

/// Row-major `rows x cols` matrix with N(0, 1/cols) entries.
fn mixing_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Vec<f64> {
    let scale = 1.0 / (cols as f64).sqrt();
    gaussian(rng, rows * cols)
        .into_iter()
        .map(|x| x * scale)
        .collect()
}

fn noisy_view(rng: &mut ChaCha8Rng, mixing: &[f64], latent: &[f64], sigma: f64) -> Vec<f32> {
    let v: Vec<f64> = mixing
        .chunks_exact(latent.len())
        .map(|row| {
            let clean: f64 = row.iter().zip(latent).map(|(w, z)| w * z).sum();
            let eps: f64 = StandardNormal.sample(rng);
            clean + sigma * eps
        })
        .collect();
    l2_normalize(&v).into_iter().map(|x| x as f32).collect()
}

/// Deterministic for a given config (including seed).
///
/// Speaker ids are `id0000, id0001, ...`; clip ids `clip0000, ...` run over the
/// train clips first and continue through the test clips. Every clip carries
/// both modalities.
pub fn generate_synthetic(cfg: &SynthConfig) -> Result<Vec<EmbeddingRecord>> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let w_voice = mixing_matrix(&mut rng, cfg.voice_dim, cfg.latent_dim);
    let w_face = mixing_matrix(&mut rng, cfg.face_dim, cfg.latent_dim);
    let latents: Vec<Vec<f64>> = (0..cfg.num_identities)
        .map(|_| gaussian(&mut rng, cfg.latent_dim))
        .collect();

    let clips = cfg.clips_per_identity_train + cfg.clips_per_identity_test;
    let mut records = Vec::with_capacity(cfg.num_identities * clips * 2);
    for (k, z) in latents.iter().enumerate() {
        let speaker_id = format!("id{k:04}");
        for c in 0..clips {
            let clip_id = format!("clip{c:04}");
            let split = if c < cfg.clips_per_identity_train {
                Split::Train
            } else {
                Split::Test
            };
            let voice = noisy_view(&mut rng, &w_voice, z, cfg.voice_noise_sigma);
            let face = noisy_view(&mut rng, &w_face, z, cfg.face_noise_sigma);
            for (modality, vector) in [(Modality::Voice, voice), (Modality::Face, face)] {
                records.push(EmbeddingRecord {
                    speaker_id: speaker_id.clone(),
                    clip_id: clip_id.clone(),
                    split,
                    modality,
                    vector,
                });
            }
        }
    }
    Ok(records)
}
