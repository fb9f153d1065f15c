use thiserror::Error;

/// Errors produced anywhere in the estimation pipeline.
#[derive(Debug, Error)]
pub enum GlenError {
    #[error("invalid graph: {0}")]
    InvalidGraph(String),

    #[error("invalid laplacian: {0}")]
    InvalidLaplacian(String),

    #[error("cannot normalize a laplacian with trace {0}")]
    ZeroTrace(f64),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("graph generation failed after {0} attempts to draw a connected topology")]
    Generation(usize),

    #[error("natural parameter {eta} outside the domain of {family}")]
    Domain { family: String, eta: f64 },

    #[error("observation {value} outside the support of {family}")]
    Support { family: String, value: f64 },

    #[error("domain violation in objective at entry ({row}, {col}): natural parameter {eta}")]
    ObjectiveDomain { row: usize, col: usize, eta: f64 },

    #[error("statistic matrix is not symmetric positive semidefinite: {0}")]
    Statistic(String),

    #[error("singular KKT system")]
    SingularKkt,

    #[error("eigendecomposition failed: {0}")]
    Eigen(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("initialization failed: {0}")]
    Initialization(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("parse error at row {row}, column {col}: {msg}")]
    Parse { row: usize, col: usize, msg: String },

    #[error("empty input: {0}")]
    Empty(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, GlenError>;

impl GlenError {
    /// Stable snake_case tag, used in machine-readable error output.
    pub fn kind(&self) -> &'static str {
        match self {
            GlenError::InvalidGraph(_) => "invalid_graph",
            GlenError::InvalidLaplacian(_) => "invalid_laplacian",
            GlenError::ZeroTrace(_) => "zero_trace",
            GlenError::Dimension(_) => "dimension",
            GlenError::Generation(_) => "generation",
            GlenError::Domain { .. } => "domain",
            GlenError::Support { .. } => "support",
            GlenError::ObjectiveDomain { .. } => "objective_domain",
            GlenError::Statistic(_) => "statistic",
            GlenError::SingularKkt => "singular_kkt",
            GlenError::Eigen(_) => "eigen",
            GlenError::Unsupported(_) => "unsupported",
            GlenError::Initialization(_) => "initialization",
            GlenError::Config(_) => "config",
            GlenError::Parse { .. } => "parse",
            GlenError::Empty(_) => "empty",
            GlenError::Io(_) => "io",
            GlenError::Csv(_) => "csv",
            GlenError::Json(_) => "json",
        }
    }
}
