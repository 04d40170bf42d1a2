use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("malformed input: {0}")]
    Malformed(String),

    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("presentation rejected: piece `{piece}` has ratio {ratio:.4} >= 1/6")]
    PresentationRejected { piece: String, ratio: f64 },

    #[error("vertex budget of {budget} exceeded; completed radius {completed_radius}")]
    BudgetExceeded {
        budget: usize,
        completed_radius: usize,
    },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("exactness violated: {0}")]
    Exactness(String),

    #[error("inconsistent metric: distances {0:?} violate the triangle inequality")]
    InconsistentMetric([u32; 3]),

    #[error("degenerate series: {0}")]
    Degenerate(String),

    #[error("power iteration did not converge after {iterations} iterations (enclosure width {width:e})")]
    NonConvergence { iterations: usize, width: f64 },

    #[error("not found within budget: {0}")]
    NotFound(String),

    #[error("graph too large to export: {vertices} vertices (limit {limit})")]
    Oversize { vertices: usize, limit: usize },

    #[error("internal invariant breached: {0}")]
    Invariant(String),

    #[error("{module}/{stage}: {source}")]
    Stage {
        module: &'static str,
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    pub fn in_stage(self, module: &'static str, stage: &'static str) -> Error {
        Error::Stage {
            module,
            stage,
            source: Box::new(self),
        }
    }

    /// Process exit code: 2 for bad input, precondition and gate failures, 3 for
    /// budget exhaustion, 4 for internal invariant breaches, 1 for i/o.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Stage { source, .. } => source.exit_code(),
            Error::Malformed(_)
            | Error::Parse { .. }
            | Error::Precondition(_)
            | Error::Exactness(_)
            | Error::PresentationRejected { .. }
            | Error::Oversize { .. } => 2,
            Error::BudgetExceeded { .. } | Error::NotFound(_) | Error::NonConvergence { .. } => 3,
            Error::Invariant(_) | Error::InconsistentMetric(_) => 4,
            Error::Degenerate(_) => 3,
            Error::Io(_) => 1,
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
