use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{op}: shape mismatch {left:?} vs {right:?}")]
    Shape {
        op: &'static str,
        left: Vec<usize>,
        right: Vec<usize>,
    },

    #[error("backward requires a scalar output of shape [1], got {0:?}")]
    NonScalarOutput(Vec<usize>),

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("invalid label path {0:?}: paths look like \"/a\" or \"/a/b\"")]
    InvalidLabel(String),

    #[error("unknown label {0:?}")]
    UnknownLabel(String),

    #[error("empty label set")]
    EmptyLabels,

    #[error("mention has no positive labels")]
    NoPositiveLabels,

    #[error("corpus has no POS tags (sentence {0}); supply a \"pos\" array for every sentence")]
    MissingPos(usize),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid configuration:\n  {}", .0.join("\n  "))]
    InvalidConfig(Vec<String>),

    #[error("missing tensor {0}")]
    MissingTensor(String),

    #[error("tensor {name}: expected shape {expected:?}, found {found:?}")]
    TensorShape {
        name: String,
        expected: Vec<usize>,
        found: Vec<usize>,
    },

    #[error("checkpoint format version {found} is not supported (expected {expected})")]
    FormatVersion { expected: u32, found: u32 },

    #[error("non-finite objective in epoch {epoch}, batch {batch}")]
    NonFiniteLoss { epoch: usize, batch: usize },

    #[error("empty training corpus")]
    EmptyTrainingCorpus,

    #[error("gradient check failed for {tensor}[{index}]: analytic {analytic:e}, numeric {numeric:e}")]
    GradientCheck {
        tensor: String,
        index: usize,
        analytic: f64,
        numeric: f64,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn shape(op: &'static str, left: &[usize], right: &[usize]) -> Self {
        Error::Shape {
            op,
            left: left.to_vec(),
            right: right.to_vec(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code: 2 for I/O and configuration problems, 1 for everything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Io { .. } | Error::InvalidConfig(_) | Error::Json(_) | Error::Parse { .. } => 2,
            _ => 1,
        }
    }
}
