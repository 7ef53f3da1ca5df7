use std::fmt;

/// Crate-wide error type.
#[derive(Debug)]
pub enum Error {
    /// Operation requires at least one point.
    EmptyCloud,
    /// No rank-3 displacement triple exists (collinear/coplanar cloud, or n < 3).
    DegenerateCloud { sample: Option<String> },
    /// An orthogonalization residual fell below the configured tolerance.
    NumericallyDegenerate,
    /// Tensor/parameter dimensions do not line up.
    Shape(String),
    /// Nearest-neighbor query against a bank with no vectors.
    EmptyBank,
    /// Query dimension differs from the bank dimension.
    DimMismatch { expected: usize, got: usize },
    /// Metric is undefined for the given inputs (e.g. single-class labels).
    UndefinedMetric(&'static str),
    /// Rejected configuration value.
    InvalidConfig(String),
    /// Text parse failure; `line` is 1-based (0 when not line-oriented).
    Parse { line: usize, msg: String },
    /// Container magic bytes did not match.
    BadMagic,
    /// Recognized container but unsupported variant (format/version).
    UnsupportedFormat(String),
    /// Input ended before the declared payload.
    Truncated(String),
    /// Weight container is missing a required tensor.
    MissingTensor(String),
    Io(std::io::Error),
    Internal(String),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::EmptyCloud => write!(f, "empty point cloud"),
            Error::DegenerateCloud { sample: Some(id) } => {
                write!(f, "DegenerateCloud: no rank-3 key-vector triple (sample {id})")
            }
            Error::DegenerateCloud { sample: None } => {
                write!(f, "DegenerateCloud: no rank-3 key-vector triple")
            }
            Error::NumericallyDegenerate => {
                write!(f, "numerically degenerate: orthogonalization residual below tolerance")
            }
            Error::Shape(msg) => write!(f, "shape error: {msg}"),
            Error::EmptyBank => write!(f, "memory bank is empty"),
            Error::DimMismatch { expected, got } => {
                write!(f, "dimension mismatch: expected {expected}, got {got}")
            }
            Error::UndefinedMetric(what) => write!(f, "metric undefined: {what}"),
            Error::InvalidConfig(msg) => write!(f, "invalid config: {msg}"),
            Error::Parse { line: 0, msg } => write!(f, "parse error: {msg}"),
            Error::Parse { line, msg } => write!(f, "parse error at line {line}: {msg}"),
            Error::BadMagic => write!(f, "bad magic bytes"),
            Error::UnsupportedFormat(what) => write!(f, "unsupported format: {what}"),
            Error::Truncated(what) => write!(f, "truncated input: {what}"),
            Error::MissingTensor(name) => write!(f, "missing tensor: {name}"),
            Error::Io(e) => write!(f, "io error: {e}"),
            Error::Internal(msg) => write!(f, "internal error: {msg}"),
        }
    }
}

impl std::error::Error for Error {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        match self {
            Error::Io(e) => Some(e),
            _ => None,
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e)
    }
}

pub type Result<T> = std::result::Result<T, Error>;
