use thiserror::Error;

/// Every failure the simulator can report.
///
/// Numerical failures (`SingularSystem`, `BoundaryContact`, `NonPositiveWeight`)
/// usually indicate a configuration that is too aggressive for the instance
/// rather than a bug.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("graph is disconnected")]
    DisconnectedGraph,
    #[error("self-loop on node {0}")]
    SelfLoop(usize),
    #[error("duplicate edge {{{0}, {1}}}")]
    DuplicateEdge(usize, usize),
    #[error("edge list is empty")]
    EmptyGraph,
    #[error("node id {id} out of range for {n} nodes")]
    NodeOutOfRange { id: usize, n: usize },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("domain error: {0}")]
    DomainError(String),
    #[error("singular system (relative residual {residual:.3e})")]
    SingularSystem { residual: f64 },
    #[error("rank deficient constraint matrix (rank {rank}, need {cols})")]
    RankDeficient { rank: usize, cols: usize },
    #[error("no t in [0, 1] selects this prefix")]
    EmptyInterval,
    #[error("non-positive weight at row {0}")]
    NonPositiveWeight(usize),
    #[error("iterate touches the boundary at row {0}")]
    BoundaryContact(usize),
    #[error("infeasible start: {0}")]
    InfeasibleStart(String),
    #[error("invalid LP: {0}")]
    InvalidLp(String),
    #[error("invalid flow instance: {0}")]
    InvalidInstance(String),
    #[error("rounded flow is infeasible: {0}")]
    InfeasibleRounding(String),
    #[error("all {attempts} attempts ended in infeasible rounding (last: {last})")]
    RetriesExhausted { attempts: usize, last: String },
    #[error("constant does not fit the extended precision budget: {0}")]
    Overflow(String),
    #[error("parse error on line {line}: {msg}")]
    ParseError { line: usize, msg: String },
    #[error("unsupported feature: {0}")]
    UnsupportedFeature(String),
    #[error("invalid generator spec: {0}")]
    InvalidSpec(String),
}

impl Error {
    /// The variant name, for machine-readable reports.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::DisconnectedGraph => "DisconnectedGraph",
            Error::SelfLoop(_) => "SelfLoop",
            Error::DuplicateEdge(..) => "DuplicateEdge",
            Error::EmptyGraph => "EmptyGraph",
            Error::NodeOutOfRange { .. } => "NodeOutOfRange",
            Error::DimensionMismatch { .. } => "DimensionMismatch",
            Error::DomainError(_) => "DomainError",
            Error::SingularSystem { .. } => "SingularSystem",
            Error::RankDeficient { .. } => "RankDeficient",
            Error::EmptyInterval => "EmptyInterval",
            Error::NonPositiveWeight(_) => "NonPositiveWeight",
            Error::BoundaryContact(_) => "BoundaryContact",
            Error::InfeasibleStart(_) => "InfeasibleStart",
            Error::InvalidLp(_) => "InvalidLp",
            Error::InvalidInstance(_) => "InvalidInstance",
            Error::InfeasibleRounding(_) => "InfeasibleRounding",
            Error::RetriesExhausted { .. } => "RetriesExhausted",
            Error::Overflow(_) => "Overflow",
            Error::ParseError { .. } => "ParseError",
            Error::UnsupportedFeature(_) => "UnsupportedFeature",
            Error::InvalidSpec(_) => "InvalidSpec",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
