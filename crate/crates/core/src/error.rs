use std::path::PathBuf;

use crate::partition::expr::ParseError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("bad file format: {0}")]
    Format(String),
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error("parameter set mismatch in run {run:?}")]
    ParameterMismatch { run: String },
    #[error("duplicate run name {0:?}")]
    DuplicateRun(String),
    #[error("field dims mismatch in run {run:?}: expected {expected:?}, got {found:?}")]
    DimsMismatch {
        run: String,
        expected: Vec<usize>,
        found: Vec<usize>,
    },
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("seed position {0:?} lies outside the field domain")]
    SeedOutOfDomain(Vec<f64>),
    #[error("runs {0:?} and {1:?} have no overlapping time interval")]
    EmptyOverlap(String, String),
    #[error("time {t} outside the span [{start}, {end}] of run {run:?}")]
    TimeOutOfSpan {
        run: String,
        t: f64,
        start: f64,
        end: f64,
    },
    #[error("training data contains a single class")]
    SingleClass,
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("axis {0} out of range")]
    AxisOutOfRange(usize),
    #[error(transparent)]
    Parse(#[from] ParseError),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by the caller's input rather than the environment.
    pub fn is_validation(&self) -> bool {
        !matches!(self, Error::Io { .. })
    }
}
