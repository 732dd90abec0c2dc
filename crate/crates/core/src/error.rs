use thiserror::Error;

/// Errors raised by the solvers, verifier and file loaders.
#[derive(Debug, Error)]
pub enum Error {
    #[error("state is not normalizable or not normalized (norm {norm})")]
    NotNormalized { norm: f64 },
    #[error("operator is not Hermitian (anti-Hermitian part {deviation:e})")]
    NotHermitian { deviation: f64 },
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("initial and final states lie on the same ray")]
    DegenerateEndpoints,
    #[error("time step too coarse: |H|*dt = {product} exceeds {limit}")]
    StepTooCoarse { product: f64, limit: f64 },
    #[error("time {t} outside [0, {duration}]")]
    OutOfRange { t: f64, duration: f64 },
    #[error("sample grid too sparse: z gap {gap} exceeds {limit}")]
    DensityTooLow { gap: f64, limit: f64 },
    #[error("no listed family reaches the target ray")]
    TargetUnreachable,
    #[error("multipliers are indeterminate: {0}")]
    IndeterminateMultipliers(String),
    #[error("shooting did not converge (best infidelity {best_infidelity:e})")]
    NoConvergence { best_infidelity: f64 },
    #[error("constraint set admits no Hamiltonian: {0}")]
    ConstraintInfeasible(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("malformed data: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Stable variant name, used in CLI diagnostics.
    pub fn name(&self) -> &'static str {
        match self {
            Error::NotNormalized { .. } => "NotNormalized",
            Error::NotHermitian { .. } => "NotHermitian",
            Error::DimensionMismatch { .. } => "DimensionMismatch",
            Error::DegenerateEndpoints => "DegenerateEndpoints",
            Error::StepTooCoarse { .. } => "StepTooCoarse",
            Error::OutOfRange { .. } => "OutOfRange",
            Error::DensityTooLow { .. } => "DensityTooLow",
            Error::TargetUnreachable => "TargetUnreachable",
            Error::IndeterminateMultipliers(_) => "IndeterminateMultipliers",
            Error::NoConvergence { .. } => "NoConvergence",
            Error::ConstraintInfeasible(_) => "ConstraintInfeasible",
            Error::InvalidArgument(_) => "InvalidArgument",
            Error::Format(_) => "Format",
            Error::Io(_) => "Io",
            Error::Json(_) => "Json",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
