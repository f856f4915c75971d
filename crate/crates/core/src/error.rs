use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    DimensionMismatch {
        context: String,
        expected: usize,
        actual: usize,
    },
    #[error("non-finite value in record ({speaker_id}, {clip_id})")]
    NonFinite { speaker_id: String, clip_id: String },
    #[error("duplicate record ({speaker_id}, {clip_id}, {modality}, {split})")]
    DuplicateRecord {
        speaker_id: String,
        clip_id: String,
        modality: String,
        split: String,
    },
    #[error("empty dataset: {0}")]
    EmptyDataset(String),
    #[error("corrupt file: {0}")]
    Corrupt(String),
    #[error("unsupported format version {found} (this build reads up to {supported})")]
    UnsupportedVersion { found: u8, supported: u8 },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("invalid label: {0}")]
    InvalidLabel(String),
    #[error("training diverged at epoch {epoch}: mean loss {loss}")]
    Diverged { epoch: usize, loss: f64 },
    #[error("single-class input: binary SVM needs both +1 and -1 labels")]
    SingleClass,
    #[error("class {0} has no training samples")]
    EmptyClass(usize),
    #[error("mismatched test sets: {0}")]
    MismatchedTestSets(String),
}

impl Error {
    pub(crate) fn dim(context: impl Into<String>, expected: usize, actual: usize) -> Self {
        Error::DimensionMismatch {
            context: context.into(),
            expected,
            actual,
        }
    }

    /// Stable short code used as the CLI error prefix.
    pub fn code(&self) -> &'static str {
        match self {
            Error::Io { .. } => "E_IO",
            Error::DimensionMismatch { .. } => "E_DIM",
            Error::NonFinite { .. } | Error::DuplicateRecord { .. } => "E_DATA",
            Error::EmptyDataset(_) => "E_EMPTY",
            Error::Corrupt(_) => "E_CORRUPT",
            Error::UnsupportedVersion { .. } => "E_VERSION",
            Error::InvalidConfig(_) => "E_CONFIG",
            Error::InvalidLabel(_) => "E_LABEL",
            Error::Diverged { .. } => "E_DIVERGED",
            Error::SingleClass | Error::EmptyClass(_) => "E_CLASS",
            Error::MismatchedTestSets(_) => "E_MISMATCH",
        }
    }
}
