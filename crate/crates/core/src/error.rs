use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid domain: {0}")]
    InvalidDomain(String),

    #[error("invalid dataset: {0}")]
    InvalidDataset(String),

    #[error("invalid policy: {0}")]
    InvalidPolicy(String),

    #[error("point does not belong to this domain: {0}")]
    PointMismatch(String),

    #[error("enumeration budget exceeded: {needed} databases needed, budget is {budget}")]
    BudgetExceeded { needed: u128, budget: u64 },

    #[error("constraint answers are inconsistent: no database satisfies them")]
    InconsistentConstraints,

    #[error("constraints are not sparse w.r.t. the secret graph: pair ({0}, {1}) {2}")]
    NotSparse(usize, usize, String),

    #[error("policy graph has {0} vertices, at most {1} are supported")]
    TooManyVertices(usize, usize),

    #[error("closed forms require an unconstrained policy (found general count constraints)")]
    ConstrainedPolicy,

    #[error("constraint set does not match a recognised specialisation: {0}")]
    UnrecognizedShape(String),

    #[error("invalid query: {0}")]
    InvalidQuery(String),

    #[error("invalid privacy parameter: {0}")]
    InvalidParameter(String),

    #[error("sensitivity is infinite; this query cannot be released with finite noise")]
    InfiniteSensitivity,

    #[error("parallel group `{0}` has no decomposition certificate")]
    UncertifiedParallelGroup(String),

    #[error("invalid experiment config: {0}")]
    InvalidExperiment(String),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}
