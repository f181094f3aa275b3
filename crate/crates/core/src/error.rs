use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Errors raised by the library. The variant name is part of the message so
/// that front ends can report which invariant was violated.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("NonHermitianInput: ‖M − M†‖_max = {0:e}")]
    NonHermitianInput(f64),
    #[error("IndefiniteInput: minimum eigenvalue {0:e}")]
    IndefiniteInput(f64),
    #[error("NonSquareInput: {rows}×{cols}")]
    NonSquareInput { rows: usize, cols: usize },
    #[error("DimensionMismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("NonFiniteInput: matrix contains NaN or infinite entries")]
    NonFiniteInput,
    #[error("InvalidState: {0}")]
    InvalidState(String),
    #[error("NonUnitaryTarget: unitarity defect {0:e}")]
    NonUnitaryTarget(f64),
    #[error("AncillaTooSmall: rank {rank} exceeds ancilla dimension {ancilla}")]
    AncillaTooSmall { rank: usize, ancilla: usize },
    #[error("InvalidKraus: {0}")]
    InvalidKraus(String),
    #[error("InvalidChoi: {0}")]
    InvalidChoi(String),
    #[error("BadBasis: {0}")]
    BadBasis(String),
    #[error("NoUnitaryBasis: dimension {0} is not a power of two")]
    NoUnitaryBasis(usize),
    #[error("DegenerateSpanningSet: Gram condition number {0:e}")]
    DegenerateSpanningSet(f64),
    #[error("NonPhysicalInput: {0}")]
    NonPhysicalInput(String),
    #[error("InvalidDistribution: {0}")]
    InvalidDistribution(String),
    #[error("ConvergenceFailure: duality gap {gap:e} after {iterations} iterations")]
    ConvergenceFailure { gap: f64, iterations: usize },
    #[error("Parse: {0}")]
    Parse(String),
}

impl Error {
    /// The variant name, used by the CLI when naming the violated invariant.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::NonHermitianInput(_) => "NonHermitianInput",
            Error::IndefiniteInput(_) => "IndefiniteInput",
            Error::NonSquareInput { .. } => "NonSquareInput",
            Error::DimensionMismatch { .. } => "DimensionMismatch",
            Error::NonFiniteInput => "NonFiniteInput",
            Error::InvalidState(_) => "InvalidState",
            Error::NonUnitaryTarget(_) => "NonUnitaryTarget",
            Error::AncillaTooSmall { .. } => "AncillaTooSmall",
            Error::InvalidKraus(_) => "InvalidKraus",
            Error::InvalidChoi(_) => "InvalidChoi",
            Error::BadBasis(_) => "BadBasis",
            Error::NoUnitaryBasis(_) => "NoUnitaryBasis",
            Error::DegenerateSpanningSet(_) => "DegenerateSpanningSet",
            Error::NonPhysicalInput(_) => "NonPhysicalInput",
            Error::InvalidDistribution(_) => "InvalidDistribution",
            Error::ConvergenceFailure { .. } => "ConvergenceFailure",
            Error::Parse(_) => "Parse",
        }
    }
}
