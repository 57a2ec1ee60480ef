use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A CSV row failed validation. `row` is the 1-based line number, header included.
    #[error("{message} at row {row}")]
    Parse { row: usize, message: String },

    #[error("malformed csv header: expected `{expected}`, found `{found}`")]
    Header { expected: String, found: String },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("degenerate target: training targets have zero variance")]
    DegenerateTarget,

    #[error("degenerate reference: reference values have zero variance")]
    DegenerateReference,

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("empty input")]
    EmptyInput,

    #[error("distributions do not share bin edges")]
    MismatchedEdges,

    #[error("reference value {0} is not positive")]
    NonPositiveReference(f64),

    #[error("model file: {0}")]
    ModelFormat(String),

    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] io::Error),
}

impl Error {
    pub(crate) fn parse(row: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            row,
            message: message.into(),
        }
    }

    /// Wraps the error with the name of the pipeline stage that produced it.
    pub fn in_stage(self, stage: &'static str) -> Self {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }

    /// True when the root cause is an I/O failure.
    pub fn is_io(&self) -> bool {
        match self {
            Error::Io(_) => true,
            Error::Stage { source, .. } => source.is_io(),
            _ => false,
        }
    }
}
