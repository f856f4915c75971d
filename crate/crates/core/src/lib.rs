//! Face-aided speaker identification.
//!
//! A two-branch network learns a joint representation from paired voice and
//! face embeddings (element-wise product fusion, softmax cross-entropy head).
//! Features tapped from the fusion layer, optionally with the face input
//! masked to zero, are classified by a one-vs-one polynomial-kernel SVM and
//! compared against an SVM trained on the raw voice embeddings.
//!
//! Module map:
//!
//! * [`store`]: embedding records, the `FUSEID1` container, pairing, and the
//!   shared-latent synthetic generator.
//! * [`nn`]: dense layers, L2 normalization, dropout, fusion, softmax,
//!   cross-entropy, their gradients, and Adam.
//! * [`two_branch`]: the fusion model, its trainer, feature extraction and
//!   the `FUSEMDL1` / `FUSEFEA1` files.
//! * [`svm`]: SMO binary solver, one-vs-one ensemble, `FUSESVM1` files.
//! * [`eval`]: top-1 accuracy, confusion matrices, condition comparison.
//! * [`pipeline`]: end-to-end experiment runner shared by the CLI and demo.

pub mod error;
pub mod eval;
pub mod nn;
pub mod pipeline;
pub mod store;
pub mod svm;
pub mod two_branch;

mod binio;

pub use error::{Error, Result};
