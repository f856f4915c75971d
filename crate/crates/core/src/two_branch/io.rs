//! `FUSEMDL1` model files.
//!
//! Layout: magic `FUSEMDL1`, one version byte, u32 little-endian header
//! length, JSON header (architecture, feature tap, layer table), then for each
//! layer in table order its weights (row-major) and bias as little-endian f32.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{build_model, ArchitectureSpec, TwoBranchModel, FEATURE_TAP};
use crate::binio::{self, Cursor};
use crate::nn::{Activation, DenseLayer};
use crate::{Error, Result};

pub const MAGIC: &[u8; 8] = b"FUSEMDL1";
pub const FORMAT_VERSION: u8 = 1;

#[derive(Debug, Serialize, Deserialize, PartialEq)]
struct LayerEntry {
    stack: String,
    in_dim: usize,
    out_dim: usize,
    activation: Activation,
}

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    spec: ArchitectureSpec,
    feature_tap: String,
    layers: Vec<LayerEntry>,
}

fn layer_table(model: &TwoBranchModel<f32>) -> Vec<LayerEntry> {
    let entry = |stack: &str, l: &DenseLayer<f32>| LayerEntry {
        stack: stack.to_string(),
        in_dim: l.in_dim,
        out_dim: l.out_dim,
        activation: l.activation,
    };
    let mut table: Vec<LayerEntry> = Vec::new();
    table.extend(model.voice_branch.iter().map(|l| entry("voice", l)));
    table.extend(model.face_branch.iter().map(|l| entry("face", l)));
    table.extend(model.post_fusion.iter().map(|l| entry("post_fusion", l)));
    table.push(entry("head", &model.classifier_head));
    table
}

pub fn encode_model(model: &TwoBranchModel<f32>) -> Vec<u8> {
    let mut out = Vec::with_capacity(64 + 4 * model.param_count());
    out.extend_from_slice(MAGIC);
    out.push(FORMAT_VERSION);
    binio::put_json_header(
        &mut out,
        &Header {
            spec: model.spec.clone(),
            feature_tap: FEATURE_TAP.to_string(),
            layers: layer_table(model),
        },
    );
    for l in model.layers() {
        binio::put_f32s(&mut out, &l.weights);
        binio::put_f32s(&mut out, &l.bias);
    }
    out
}

pub fn decode_model(bytes: &[u8]) -> Result<TwoBranchModel<f32>> {
    let mut cur = Cursor::new(bytes, "FUSEMDL1");
    cur.expect_magic(MAGIC)?;
    let version = cur.u8()?;
    if version != FORMAT_VERSION {
        return Err(Error::UnsupportedVersion {
            found: version,
            supported: FORMAT_VERSION,
        });
    }
    let header: Header = cur.json_header()?;
    if header.feature_tap != FEATURE_TAP {
        return Err(Error::Corrupt(format!(
            "FUSEMDL1: unknown feature tap {:?}",
            header.feature_tap
        )));
    }
    let mut model = build_model::<f32>(&header.spec, 0)
        .map_err(|e| Error::Corrupt(format!("FUSEMDL1: invalid architecture: {e}")))?;
    if layer_table(&model) != header.layers {
        return Err(Error::Corrupt(
            "FUSEMDL1: layer table disagrees with architecture".into(),
        ));
    }
    for l in model.layers_mut() {
        l.weights = cur.f32s(l.weights.len())?;
        l.bias = cur.f32s(l.bias.len())?;
    }
    cur.finish()?;
    if !model.is_finite() {
        return Err(Error::Corrupt("FUSEMDL1: non-finite parameter".into()));
    }
    Ok(model)
}

pub fn save_model(model: &TwoBranchModel<f32>, path: impl AsRef<Path>) -> Result<()> {
    binio::write_file(path.as_ref(), &encode_model(model))
}

pub fn load_model(path: impl AsRef<Path>) -> Result<TwoBranchModel<f32>> {
    decode_model(&binio::read_file(path.as_ref())?)
}
