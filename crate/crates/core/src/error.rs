use thiserror::Error;

/// Every failure the library can report.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("operator is not Hermitian (max asymmetry {violation:.3e})")]
    NonHermitian { violation: f64 },
    #[error("dimension {dim} exceeds the dense cap {cap}")]
    DimensionCap { dim: usize, cap: usize },
    #[error("joint dimension {dim} exceeds the dense cap {cap}")]
    DenseCap { dim: usize, cap: usize },
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("invalid dimension {0}")]
    InvalidDimension(usize),
    #[error("level {level} is outside 1..={levels}")]
    LevelOutOfRange { level: usize, levels: usize },
    #[error("invalid size: {0}")]
    InvalidSize(String),
    #[error("base {a} is not coprime to {z}")]
    NotCoprime { a: u64, z: u64 },
    #[error("{n} qubits cannot index {z} values")]
    InsufficientQubits { n: u32, z: u64 },
    #[error("domain error: {0}")]
    DomainError(String),
    #[error("no levels supplied")]
    EmptyLevels,
    #[error("ordering violated: {0}")]
    OrderingViolation(String),
    #[error("iteration budget exhausted after {iterations} trials{}", step_suffix(*.step))]
    BudgetExhausted { step: Option<usize>, iterations: u64 },
    #[error("assumption violated: {0}")]
    AssumptionViolated(String),
    #[error("gap has no interior minimum on [0, 1] (stationary point at s = {s_star})")]
    NoInteriorMinimum { s_star: f64 },
    #[error("eigensolver did not converge")]
    NoConvergence,
}

fn step_suffix(step: Option<usize>) -> String {
    match step {
        Some(l) => format!(" in step {l}"),
        None => String::new(),
    }
}

impl Error {
    /// Variant name, used by the command line on standard error.
    pub fn name(&self) -> &'static str {
        match self {
            Error::NonHermitian { .. } => "NonHermitian",
            Error::DimensionCap { .. } => "DimensionCap",
            Error::DenseCap { .. } => "DenseCap",
            Error::DimensionMismatch { .. } => "DimensionMismatch",
            Error::InvalidDimension(_) => "InvalidDimension",
            Error::LevelOutOfRange { .. } => "LevelOutOfRange",
            Error::InvalidSize(_) => "InvalidSize",
            Error::NotCoprime { .. } => "NotCoprime",
            Error::InsufficientQubits { .. } => "InsufficientQubits",
            Error::DomainError(_) => "DomainError",
            Error::EmptyLevels => "EmptyLevels",
            Error::OrderingViolation(_) => "OrderingViolation",
            Error::BudgetExhausted { .. } => "BudgetExhausted",
            Error::AssumptionViolated(_) => "AssumptionViolated",
            Error::NoInteriorMinimum { .. } => "NoInteriorMinimum",
            Error::NoConvergence => "NoConvergence",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
