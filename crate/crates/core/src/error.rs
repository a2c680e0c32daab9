use thiserror::Error;

pub type Result<T> = std::result::Result<T, GrridgeError>;

#[derive(Debug, Error)]
pub enum GrridgeError {
    #[error("dimension mismatch in {what}: expected {expected}, got {got}")]
    DimensionMismatch { what: &'static str, expected: usize, got: usize },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("numerically singular penalized core (condition estimate {condition:.3e})")]
    SingularCore { condition: f64 },

    #[error("singular group coefficient system (condition estimate {condition:.3e}); use the iterative route")]
    SingularSystem { condition: f64 },

    #[error("single-class response")]
    SingleClass,

    #[error("invalid response: {0}")]
    InvalidResponse(String),

    #[error("invalid penalty: {0}")]
    InvalidPenalty(String),

    #[error("invalid partition: {0}")]
    InvalidPartition(String),

    #[error("group {0} has a zero within-group denominator (empty or degenerate group)")]
    EmptyGroup(usize),

    #[error("all variances degenerate: {0}")]
    DegenerateVariance(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("infeasible: {0}")]
    Infeasible(String),

    #[error("{path}:{line}: {msg}")]
    Parse { path: String, line: usize, msg: String },

    #[error("{context}: {source}")]
    Context {
        context: String,
        #[source]
        source: Box<GrridgeError>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl GrridgeError {
    pub fn context(self, context: impl Into<String>) -> Self {
        GrridgeError::Context { context: context.into(), source: Box::new(self) }
    }

    /// Innermost error, skipping any context wrappers.
    pub fn root(&self) -> &GrridgeError {
        match self {
            GrridgeError::Context { source, .. } => source.root(),
            other => other,
        }
    }
}
