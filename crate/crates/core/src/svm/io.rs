//! `FUSESVM1` files.
//!
//! Layout: magic `FUSESVM1`, u32 little-endian header length, JSON header
//! (classes, kernel, regularization, normalization stats, machine table),
//! then per machine: bias, dual coefficients, and support vectors
//! (row-major), all little-endian f64.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{BinarySvm, FeatureStats, KernelSpec, SvmModel};
use crate::binio::{self, Cursor};
use crate::{Error, Result};

pub const MAGIC: &[u8; 8] = b"FUSESVM1";

#[derive(Debug, Serialize, Deserialize)]
struct MachineEntry {
    pair: (usize, usize),
    n_sv: usize,
    converged: bool,
    iterations: usize,
    objective: f64,
}

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    num_classes: usize,
    kernel: KernelSpec,
    regularization: f64,
    stats: FeatureStats,
    machines: Vec<MachineEntry>,
}

pub fn encode_svm(model: &SvmModel) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    binio::put_json_header(
        &mut out,
        &Header {
            num_classes: model.num_classes,
            kernel: model.kernel,
            regularization: model.regularization,
            stats: model.stats.clone(),
            machines: model
                .machines
                .iter()
                .map(|m| MachineEntry {
                    pair: m.pair,
                    n_sv: m.dual_coef.len(),
                    converged: m.converged,
                    iterations: m.iterations,
                    objective: m.objective,
                })
                .collect(),
        },
    );
    for m in &model.machines {
        binio::put_f64s(&mut out, &[m.bias]);
        binio::put_f64s(&mut out, &m.dual_coef);
        for sv in &m.support_vectors {
            binio::put_f64s(&mut out, sv);
        }
    }
    out
}

pub fn decode_svm(bytes: &[u8]) -> Result<SvmModel> {
    let mut cur = Cursor::new(bytes, "FUSESVM1");
    cur.expect_magic(MAGIC)?;
    let h: Header = cur.json_header()?;
    let dim = h.stats.dim();
    if h.stats.scale.len() != dim {
        return Err(Error::Corrupt("FUSESVM1: stats length mismatch".into()));
    }
    let expected = h.num_classes * h.num_classes.saturating_sub(1) / 2;
    if h.machines.len() != expected {
        return Err(Error::Corrupt(format!(
            "FUSESVM1: {} machines for {} classes (expected {expected})",
            h.machines.len(),
            h.num_classes
        )));
    }
    let mut machines = Vec::with_capacity(h.machines.len());
    for e in h.machines {
        let bias = cur.f64s(1)?[0];
        let dual_coef = cur.f64s(e.n_sv)?;
        let support_vectors = (0..e.n_sv)
            .map(|_| cur.f64s(dim))
            .collect::<Result<Vec<_>>>()?;
        machines.push(BinarySvm {
            support_vectors,
            dual_coef,
            bias,
            kernel: h.kernel,
            pair: e.pair,
            converged: e.converged,
            iterations: e.iterations,
            objective: e.objective,
        });
    }
    cur.finish()?;
    Ok(SvmModel {
        machines,
        num_classes: h.num_classes,
        stats: h.stats,
        kernel: h.kernel,
        regularization: h.regularization,
    })
}

pub fn save_svm(model: &SvmModel, path: impl AsRef<Path>) -> Result<()> {
    binio::write_file(path.as_ref(), &encode_svm(model))
}

pub fn load_svm(path: impl AsRef<Path>) -> Result<SvmModel> {
    decode_svm(&binio::read_file(path.as_ref())?)
}
