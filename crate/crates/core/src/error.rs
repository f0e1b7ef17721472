use alloc::string::String;

/// Errors raised by the estimation core.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("insufficient data: need at least {needed} observations, got {got}")]
    InsufficientData { needed: usize, got: usize },
    #[error("record `{id}`: response time {value} is not positive")]
    NonPositiveTime { id: String, value: f64 },
    #[error("duplicate record id `{0}`")]
    DuplicateId(String),
    #[error("invalid `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },
    #[error("infeasible configuration: {0}")]
    Config(String),
    #[error("singular design: column `{column}` is constant or collinear with earlier columns")]
    Singular { column: String },
    #[error("critical boundary undefined: threshold {epsilon} is not below baseline {tau0}")]
    BoundaryUndefined { epsilon: f64, tau0: f64 },
    #[error("decay rate {lambda} is not positive; negative decay signals confounding")]
    NonPositiveDecay { lambda: f64 },
    #[error("group `{group}` has {size} members, at least {needed} required")]
    GroupTooSmall { group: String, size: usize, needed: usize },
    #[error("zero variance in {0}")]
    ZeroVariance(String),
    #[error("empty cell: {0}")]
    EmptyCell(String),
    #[error("no post-treatment records")]
    NoPostPeriod,
    #[error("parameter not identified: {0}")]
    Unidentified(String),
    #[error("unstable time step {dt}: explicit stepping requires dt < {bound}")]
    UnstableStep { dt: f64, bound: f64 },
    #[error("linear solver stopped after {iterations} iterations with relative residual {residual:e}")]
    NoConvergence { iterations: usize, residual: f64 },
    #[error("no decay (kappa = 0): the coverage boundary is infinite")]
    InfiniteBoundary,
    #[error("unknown node `{0}`")]
    UnknownNode(String),
}

pub type Result<T> = core::result::Result<T, Error>;

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter { name, reason: reason.into() }
    }
}
