use thiserror::Error;

/// Failures of the dense linear-algebra layer.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum NumericError {
    #[error("EmptyInput: at least one point is required")]
    EmptyInput,
    #[error("DimensionMismatch: expected length {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("DimensionMismatch: row {row} has {found} entries, expected {expected}")]
    RaggedRows { row: usize, expected: usize, found: usize },
    #[error("ParseError: `{0}` is not an integer or p/q rational")]
    Parse(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BoundSide {
    Lower,
    Upper,
}

impl std::fmt::Display for BoundSide {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            BoundSide::Lower => "lower",
            BoundSide::Upper => "upper",
        })
    }
}

/// Crate-wide error. Display strings start with the variant name so that
/// callers (CLI, service) can surface a stable error kind.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error(transparent)]
    Numeric(#[from] NumericError),
    #[error("DimensionMismatch: {context}: expected {expected}, found {found}")]
    DimensionMismatch { context: String, expected: usize, found: usize },
    #[error("InvalidBounds: lower bound exceeds upper bound for variable {index}")]
    InvalidBounds { index: usize },
    #[error("ParseError: {0}")]
    Parse(String),
    #[error("InvalidParameter: {0}")]
    InvalidParameter(String),
    #[error("RankDeficient: the constraint matrix must have full row rank")]
    RankDeficient,
    #[error("InvalidSupport: {0}")]
    InvalidSupport(String),
    #[error("IterationLimit: no optimality certificate after {0} iterations")]
    IterationLimit(usize),
    #[error("InfeasibleRegion: {0}")]
    InfeasibleRegion(String),
    #[error("InfeasibleInitialPoint: {0}")]
    InfeasibleInitialPoint(String),
    #[error("AuxiliaryInfeasible: the weight-elicitation problem has no feasible point")]
    AuxiliaryInfeasible,
    #[error("AuxiliaryUnboundedAfterRetries: artificial variable box still binding at {0}")]
    AuxiliaryUnboundedAfterRetries(String),
    #[error("UnboundedPolytope: the feasible set is not bounded")]
    UnboundedPolytope,
    #[error("EmptyPolytope: the feasible set has no points")]
    EmptyPolytope,
    #[error("EmptyCompromiseSet: no point is efficient for every level")]
    EmptyCompromiseSet,
    #[error("EmptySortingSet: the sorting set has no extreme points")]
    EmptySortingSet,
    #[error("AssumptionViolated: {assumption} ({detail})")]
    AssumptionViolated { assumption: String, detail: String },
    #[error("InvalidSortingIndex: {index} is not in 1..={available}")]
    InvalidSortingIndex { index: usize, available: usize },
    #[error("WrongPhase: {action} requires phase {expected}, session is in {found}")]
    WrongPhase { action: String, expected: String, found: String },
    #[error("NonPositiveSlack: component {component} of the {side} slack is {value}, must be > 0")]
    NonPositiveSlack { side: BoundSide, component: usize, value: String },
    #[error(
        "DmBoundsViolation: variable x{} {side} bound {value} lies outside the initial bound {limit} by {excess}",
        variable + 1
    )]
    DmBoundsViolation { variable: usize, side: BoundSide, value: String, limit: String, excess: String },
    #[error("{step}: {source}")]
    InStep { step: String, source: Box<Error> },
}

impl Error {
    /// Stable short name of the underlying error (annotations stripped).
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Numeric(NumericError::EmptyInput) => "EmptyInput",
            Error::Numeric(NumericError::Parse(_)) => "ParseError",
            Error::Numeric(_) | Error::DimensionMismatch { .. } => "DimensionMismatch",
            Error::InvalidBounds { .. } => "InvalidBounds",
            Error::Parse(_) => "ParseError",
            Error::InvalidParameter(_) => "InvalidParameter",
            Error::RankDeficient => "RankDeficient",
            Error::InvalidSupport(_) => "InvalidSupport",
            Error::IterationLimit(_) => "IterationLimit",
            Error::InfeasibleRegion(_) => "InfeasibleRegion",
            Error::InfeasibleInitialPoint(_) => "InfeasibleInitialPoint",
            Error::AuxiliaryInfeasible => "AuxiliaryInfeasible",
            Error::AuxiliaryUnboundedAfterRetries(_) => "AuxiliaryUnboundedAfterRetries",
            Error::UnboundedPolytope => "UnboundedPolytope",
            Error::EmptyPolytope => "EmptyPolytope",
            Error::EmptyCompromiseSet => "EmptyCompromiseSet",
            Error::EmptySortingSet => "EmptySortingSet",
            Error::AssumptionViolated { .. } => "AssumptionViolated",
            Error::InvalidSortingIndex { .. } => "InvalidSortingIndex",
            Error::WrongPhase { .. } => "WrongPhase",
            Error::NonPositiveSlack { .. } => "NonPositiveSlack",
            Error::DmBoundsViolation { .. } => "DmBoundsViolation",
            Error::InStep { source, .. } => source.kind(),
        }
    }

    /// The error with step annotations removed.
    pub fn root(&self) -> &Error {
        match self {
            Error::InStep { source, .. } => source.root(),
            other => other,
        }
    }

    pub fn in_step(self, step: impl Into<String>) -> Error {
        Error::InStep { step: step.into(), source: Box::new(self) }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
