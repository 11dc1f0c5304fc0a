use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("file not found: {0}")]
    NotFound(PathBuf),

    #[error("unsupported audio format in {path}: {reason}")]
    UnsupportedFormat { path: PathBuf, reason: String },

    #[error("input `{0}` is silent (zero RMS)")]
    SilentInput(&'static str),

    #[error("no WAV files found in {0}")]
    EmptyDirectory(PathBuf),

    #[error("invalid window length {0} (must be even and >= 2)")]
    InvalidLength(usize),

    #[error("signal too short: {samples} samples, need at least {needed}")]
    TooShort { samples: usize, needed: usize },

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("bin count mismatch: expected {expected}, got {actual}")]
    BinCountMismatch { expected: usize, actual: usize },

    #[error("shape mismatch: expected {expected:?}, got {actual:?}")]
    ShapeMismatch {
        expected: (usize, usize),
        actual: (usize, usize),
    },

    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),

    #[error("clean reference is silent; labels are undefined")]
    AllSilent,

    #[error("invalid dimensions n={n}, h={h}")]
    InvalidDims { n: usize, h: usize },

    #[error("backward called with a cache from different parameters")]
    StaleCache,

    #[error("bin {bin} out of range for {bins} bins")]
    BinOutOfRange { bin: usize, bins: usize },

    #[error("training manifest is empty")]
    EmptyManifest,

    #[error("loss diverged (non-finite) at epoch {epoch}, bin {bin:?}")]
    DivergedLoss { epoch: usize, bin: Option<usize> },

    #[error("unsupported bundle format version {found} (expected {expected})")]
    VersionMismatch { found: u32, expected: u32 },

    #[error("corrupt model bundle: {0}")]
    CorruptFile(String),

    #[error("labels contain a single class; ROC is undefined")]
    SingleClass,

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Process exit code: 1 for I/O, 2 for validation, 3 for numerical failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::NotFound(_) | Error::Io(_) | Error::EmptyDirectory(_) => 1,
            Error::DivergedLoss { .. } => 3,
            _ => 2,
        }
    }
}
