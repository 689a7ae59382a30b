use thiserror::Error;

/// Everything that can go wrong while building a domain, evolving a slice or
/// running a configured experiment.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid domain: {0}")]
    InvalidDomain(String),

    #[error("chart point {coords:?} lies outside the chart (radius {radius})")]
    OutOfChart { coords: Vec<f64>, radius: f64 },

    #[error("conormal requested at an interior point {0:?}")]
    NotBoundary(Vec<f64>),

    #[error("invalid flow parameters: {0}")]
    InvalidParams(String),

    #[error("invalid initial data: {0}")]
    InvalidInitialData(String),

    #[error("spacelike condition violated at {} node(s), max |Dphi| = {max_grad:.6e}", nodes.len())]
    Spacelike { nodes: Vec<usize>, max_grad: f64 },

    #[error("mean convexity lost at {} node(s), min denominator = {min_denominator:.6e}", nodes.len())]
    MeanConvexity { nodes: Vec<usize>, min_denominator: f64 },

    #[error("non-finite values at {} node(s)", nodes.len())]
    NonFinite { nodes: Vec<usize> },

    #[error("mean curvature routes disagree by {0:.3e}")]
    CurvatureMismatch(f64),

    #[error("config error in `{field}`: {message}")]
    Config { field: String, message: String },

    #[error("malformed snapshot: {0}")]
    Snapshot(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            message: message.into(),
        }
    }

    /// True for failures of the evolving state itself (as opposed to bad input).
    pub fn is_flow_failure(&self) -> bool {
        matches!(
            self,
            Error::Spacelike { .. } | Error::MeanConvexity { .. } | Error::NonFinite { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
