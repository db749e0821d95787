use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed density header: {0}")]
    MalformedHeader(String),

    #[error("non-uniform {axis} grid: {detail}")]
    NonUniformGrid { axis: &'static str, detail: String },

    #[error("non-numeric cell at line {line}, column {column}: {text:?}")]
    NonNumeric {
        line: usize,
        column: usize,
        text: String,
    },

    #[error("dimension mismatch at line {line}: expected {expected} cells, found {found}")]
    DimensionMismatch {
        line: usize,
        expected: usize,
        found: usize,
    },

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid density field: {0}")]
    InvalidField(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("need at least {needed} points along {axis}, found {found}")]
    InsufficientPoints {
        axis: &'static str,
        needed: usize,
        found: usize,
    },

    #[error("basis {basis} is not admissible for {process}")]
    BasisNotAllowed { process: String, basis: String },

    #[error("basis catalog is empty for {0}")]
    EmptyCatalog(String),

    #[error("length mismatch: expected {expected}, found {found}")]
    LengthMismatch { expected: usize, found: usize },

    #[error("column {0} cannot be resolved through the symbolic vector")]
    UnresolvableColumn(String),

    #[error("solution pool is empty")]
    EmptyPool,

    #[error("derivative vector has zero norm; the data carries no dynamics")]
    DegenerateData,

    #[error("breakage birth term present but the breakage rate is identically zero")]
    ZeroBreakageRate,

    #[error("unknown benchmark case {0:?}")]
    UnknownCase(String),

    #[error("time step collapsed to {step:e} at t = {time}")]
    StepCollapse { time: f64, step: f64 },

    #[error("density went negative ({value:e}) at x index {index}, t = {time}")]
    NegativeDensity { value: f64, index: usize, time: f64 },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }

    /// Wraps the error with the pipeline stage it came from.
    pub fn at_stage(self, stage: &'static str) -> Self {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }
}

pub(crate) trait StageExt<T> {
    fn stage(self, stage: &'static str) -> Result<T>;
}

impl<T> StageExt<T> for Result<T> {
    fn stage(self, stage: &'static str) -> Result<T> {
        self.map_err(|e| e.at_stage(stage))
    }
}
