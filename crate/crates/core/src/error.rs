use thiserror::Error;

/// Errors raised by the approximation pipelines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("no site within radius {delta} of ({x}, {y})")]
    EmptyNeighborhood { x: f64, y: f64, delta: f64 },

    #[error("local Gram matrix is not unisolvent (condition estimate {condition:.3e})")]
    NonUnisolvent { condition: f64 },

    #[error("logarithm undefined: rotation angle {angle} is at the cut locus")]
    CutLocus { angle: f64 },

    #[error("Karcher iteration did not converge after {iterations} steps (last step {residual:.3e})")]
    NonConvergence { iterations: usize, residual: f64 },

    #[error("matrix is not symmetric positive definite: {0}")]
    NotSpd(String),

    #[error("matrix is not a rotation: {0}")]
    NotRotation(String),

    #[error("evaluation grid has {count} uncovered nodes")]
    MissingValues { count: usize },

    #[error("level {level}, site {site}: {source}")]
    AtLevel {
        level: usize,
        site: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("{stage}: {source}")]
    Stage {
        stage: String,
        #[source]
        source: Box<Error>,
    },

    #[error("parse error at byte {offset}: {message}")]
    Parse { offset: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub(crate) fn at_level(self, level: usize, site: usize) -> Self {
        Error::AtLevel {
            level,
            site,
            source: Box::new(self),
        }
    }

    /// Tags the error with the pipeline stage that raised it.
    pub fn in_stage(self, stage: impl Into<String>) -> Self {
        Error::Stage { stage: stage.into(), source: Box::new(self) }
    }

    /// Process exit code: 2 configuration, 3 numerical failure, 4 I/O or input data.
    pub fn exit_code(&self) -> i32 {
        match self.root() {
            e if e.is_numerical() => 3,
            Error::Io(_) | Error::Parse { .. } => 4,
            _ => 2,
        }
    }

    /// True for failures of the numerics (as opposed to bad configuration or I/O).
    pub fn is_numerical(&self) -> bool {
        match self {
            Error::EmptyNeighborhood { .. }
            | Error::NonUnisolvent { .. }
            | Error::CutLocus { .. }
            | Error::NonConvergence { .. }
            | Error::NotSpd(_)
            | Error::NotRotation(_)
            | Error::MissingValues { .. } => true,
            Error::AtLevel { source, .. } | Error::Stage { source, .. } => source.is_numerical(),
            _ => false,
        }
    }

    /// The innermost error, with level and stage context stripped.
    pub fn root(&self) -> &Error {
        match self {
            Error::AtLevel { source, .. } | Error::Stage { source, .. } => source.root(),
            e => e,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
