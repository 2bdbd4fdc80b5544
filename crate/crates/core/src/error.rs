//! Crate-wide error type.

use std::path::PathBuf;

use crate::raster::BandName;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("malformed header: {0}")]
    MalformedHeader(String),

    #[error("payload length mismatch: header declares {expected} bytes, found {actual}")]
    LengthMismatch { expected: u64, actual: u64 },

    #[error("unsupported dtype `{0}`")]
    UnsupportedDtype(String),

    #[error("unsupported container version {0}")]
    UnsupportedVersion(u64),

    #[error("value {value} exceeds the declared {bit_depth}-bit range")]
    ValueOutOfRange { value: u64, bit_depth: u8 },

    #[error("I/O failure on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("duplicate band name {0}")]
    DuplicateBandName(BandName),

    #[error("missing band {0}")]
    MissingBand(BandName),

    #[error("band mismatch: {0}")]
    BandMismatch(String),

    #[error("pan resolution is not an integer multiple of the multispectral resolution: {0}")]
    ResolutionMismatch(String),

    #[error("square input required, got {width}x{height}")]
    NonSquareInput { width: usize, height: usize },

    #[error("image {width}x{height} is smaller than the required {required}x{required}")]
    ImageTooSmall {
        width: usize,
        height: usize,
        required: usize,
    },

    #[error("reflection margin {margin} must be smaller than the smallest dimension {min_dim}")]
    MarginTooLarge { margin: usize, min_dim: usize },

    #[error("stitched output has {missing} uncovered pixel(s), first at ({x}, {y})")]
    CoverageGap { missing: usize, x: usize, y: usize },

    #[error("conflicting values written to pixel ({x}, {y})")]
    CoverageOverlapConflict { x: usize, y: usize },

    #[error("non-finite gradient in parameter `{param}`")]
    NaNGradient { param: String },

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),
}

/// Broad failure category, used to pick a process exit code.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ErrorKind {
    Config,
    Data,
    Numerical,
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Config(_) | Error::InvalidArgument(_) => ErrorKind::Config,
            Error::NaNGradient { .. } | Error::NonFinite(_) => ErrorKind::Numerical,
            _ => ErrorKind::Data,
        }
    }

    /// Exit code convention of the command-line tool: 2 config, 3 data, 4 numerical.
    pub fn exit_code(&self) -> i32 {
        match self.kind() {
            ErrorKind::Config => 2,
            ErrorKind::Data => 3,
            ErrorKind::Numerical => 4,
        }
    }
}
