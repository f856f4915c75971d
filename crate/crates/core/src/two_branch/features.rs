//! `FUSEFEA1` feature files: the interchange between extraction and the SVM.
//!
//! Layout: magic `FUSEFEA1`, u32 little-endian header length, JSON header
//! (`dim`, `count`, `masked`, `split`, `condition`, `labels`), then per
//! feature a u32 speaker index followed by `dim` little-endian f32.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::binio::{self, Cursor};
use crate::eval::Condition;
use crate::store::Split;
use crate::{Error, Result};

pub const MAGIC: &[u8; 8] = b"FUSEFEA1";

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSet {
    pub dim: usize,
    pub masked: bool,
    pub split: Split,
    pub condition: Condition,
    /// Speaker ids ordered by speaker index.
    pub labels: Vec<String>,
    pub features: Vec<Vec<f32>>,
    pub speaker_indices: Vec<usize>,
}

impl FeatureSet {
    pub fn num_classes(&self) -> usize {
        self.labels.len()
    }

    pub fn features_f64(&self) -> Vec<Vec<f64>> {
        self.features
            .iter()
            .map(|f| f.iter().map(|&x| x as f64).collect())
            .collect()
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    dim: usize,
    count: usize,
    masked: bool,
    split: Split,
    condition: Condition,
    labels: Vec<String>,
}

pub fn encode_features(set: &FeatureSet) -> Result<Vec<u8>> {
    if set.features.len() != set.speaker_indices.len() {
        return Err(Error::dim(
            "feature labels",
            set.features.len(),
            set.speaker_indices.len(),
        ));
    }
    let mut out = Vec::with_capacity(64 + set.features.len() * (4 + 4 * set.dim));
    out.extend_from_slice(MAGIC);
    binio::put_json_header(
        &mut out,
        &Header {
            dim: set.dim,
            count: set.features.len(),
            masked: set.masked,
            split: set.split,
            condition: set.condition,
            labels: set.labels.clone(),
        },
    );
    for (f, &idx) in set.features.iter().zip(&set.speaker_indices) {
        if f.len() != set.dim {
            return Err(Error::dim("feature vector", set.dim, f.len()));
        }
        out.extend_from_slice(&(idx as u32).to_le_bytes());
        binio::put_f32s(&mut out, f);
    }
    Ok(out)
}

pub fn decode_features(bytes: &[u8]) -> Result<FeatureSet> {
    let mut cur = Cursor::new(bytes, "FUSEFEA1");
    cur.expect_magic(MAGIC)?;
    let h: Header = cur.json_header()?;
    let mut features = Vec::with_capacity(h.count.min(1 << 20));
    let mut speaker_indices = Vec::with_capacity(h.count.min(1 << 20));
    for _ in 0..h.count {
        let idx = cur.u32()? as usize;
        if idx >= h.labels.len() {
            return Err(Error::Corrupt(format!(
                "FUSEFEA1: speaker index {idx} outside label table of {}",
                h.labels.len()
            )));
        }
        speaker_indices.push(idx);
        features.push(cur.f32s(h.dim)?);
    }
    cur.finish()?;
    Ok(FeatureSet {
        dim: h.dim,
        masked: h.masked,
        split: h.split,
        condition: h.condition,
        labels: h.labels,
        features,
        speaker_indices,
    })
}

pub fn write_features(set: &FeatureSet, path: impl AsRef<Path>) -> Result<()> {
    binio::write_file(path.as_ref(), &encode_features(set)?)
}

pub fn read_features(path: impl AsRef<Path>) -> Result<FeatureSet> {
    decode_features(&binio::read_file(path.as_ref())?)
}
