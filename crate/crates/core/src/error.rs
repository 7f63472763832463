use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("obj parse error at line {line}: {message}")]
    ObjParse { line: usize, message: String },

    #[error("mesh has no faces")]
    EmptyMesh,

    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(String),

    #[error("occlusion fraction must lie in [0, 1), got {0}")]
    InvalidFraction(f64),

    #[error("unsupported shape class `{0}`")]
    UnsupportedClass(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("modality mismatch: expected {expected}, got {actual}")]
    Modality { expected: String, actual: String },

    #[error("validation failed: {0}")]
    Validation(String),

    #[error("degenerate dataset: {0}")]
    DegenerateDataset(String),

    #[error("training diverged: non-finite loss in epoch {epoch}")]
    Divergence { epoch: usize },

    #[error("duplicate model id `{0}`")]
    Conflict(String),

    #[error("rank error: need at least {needed} vectors, got {got}")]
    Rank { needed: usize, got: usize },

    #[error("format error in {what}: {message}")]
    Format { what: String, message: String },

    #[error("manifest error at row {row}: {message}")]
    Manifest { row: usize, message: String },

    #[error("dataset layout error: {0}")]
    Layout(String),

    #[error("stage `{stage}` requires `{missing}` to have completed")]
    Dependency { stage: String, missing: String },

    #[error("stale artifacts for stage `{0}`: upstream inputs changed")]
    Stale(String),

    #[error("corpus contamination: model ids present in both corpora: {0}")]
    Contamination(String),

    #[error("config error: {0}")]
    Config(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(what: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Format {
            what: what.into(),
            message: message.into(),
        }
    }

    /// Short machine-readable tag used in CLI error JSON.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Io { .. } => "io",
            Error::ObjParse { .. } => "obj_parse",
            Error::EmptyMesh => "empty_mesh",
            Error::DegenerateGeometry(_) => "degenerate_geometry",
            Error::InvalidFraction(_) => "invalid_fraction",
            Error::UnsupportedClass(_) => "unsupported_class",
            Error::Shape(_) => "shape",
            Error::Modality { .. } => "modality",
            Error::Validation(_) => "validation",
            Error::DegenerateDataset(_) => "degenerate_dataset",
            Error::Divergence { .. } => "divergence",
            Error::Conflict(_) => "conflict",
            Error::Rank { .. } => "rank",
            Error::Format { .. } => "format",
            Error::Manifest { .. } => "manifest",
            Error::Layout(_) => "layout",
            Error::Dependency { .. } => "dependency",
            Error::Stale(_) => "stale",
            Error::Contamination(_) => "contamination",
            Error::Config(_) => "config",
        }
    }
}
