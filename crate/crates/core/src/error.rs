use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Every failure the library can report. `code()` gives the stable,
/// machine-readable identifier used in reports.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("point {re},{im} lies outside the map domain")]
    OutOfDomain { re: f64, im: f64 },
    #[error("invalid domain: {0}")]
    InvalidDomain(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("unknown map identifier `{0}`")]
    UnknownMap(String),
    #[error("sampled map: {0}")]
    SampledMap(String),
    #[error("seed cell {0} is not in the cell set")]
    SeedNotInSet(usize),
    #[error("empty input to {0}")]
    EmptyInput(&'static str),
    #[error("no normal radius found at {re},{im}: every neighbourhood boundary meets the fiber")]
    NoRadiusFound { re: f64, im: f64 },
    #[error("normal domain verification failed: {0}")]
    VerificationFailed(String),
    #[error("lift modulus not found: {0}")]
    ModulusNotFound(String),
    #[error("component chain broken at level {level}, interval {interval}")]
    ChainBroken { level: usize, interval: usize },
    #[error("nesting violated between levels {coarse} and {fine} at interval {interval}")]
    NestingViolated { coarse: usize, fine: usize, interval: usize },
    #[error("tolerance not met: {0}")]
    ToleranceNotMet(String),
    #[error("precondition failed: {0}")]
    PreconditionFailed(String),
    #[error("more than {cap} distinct ray lifts found")]
    InfiniteLiftSuspect { cap: usize },
    #[error("degenerate probe loop: min image gap {gap:e}")]
    DegenerateLoop { gap: f64 },
    #[error("winding number unresolved after {samples} samples")]
    Unresolved { samples: usize },
    #[error("branch points not isolated: {0}")]
    NonIsolatedBranch(String),
    #[error("monodromy mismatch: {0}")]
    MonodromyMismatch(String),
    #[error("normal form residual {residual:e} exceeds {tol:e}")]
    ResidualExceeded { residual: f64, tol: f64 },
    #[error("io: {0}")]
    Io(String),
}

impl Error {
    pub fn code(&self) -> &'static str {
        match self {
            Error::OutOfDomain { .. } => "OutOfDomain",
            Error::InvalidDomain(_) => "InvalidDomain",
            Error::InvalidArgument(_) => "InvalidArgument",
            Error::UnknownMap(_) => "UnknownMap",
            Error::SampledMap(_) => "SampledMapParse",
            Error::SeedNotInSet(_) => "SeedNotInSet",
            Error::EmptyInput(_) => "EmptyInput",
            Error::NoRadiusFound { .. } => "NoRadiusFound",
            Error::VerificationFailed(_) => "VerificationFailed",
            Error::ModulusNotFound(_) => "ModulusNotFound",
            Error::ChainBroken { .. } => "ChainBroken",
            Error::NestingViolated { .. } => "NestingViolated",
            Error::ToleranceNotMet(_) => "ToleranceNotMet",
            Error::PreconditionFailed(_) => "PreconditionFailed",
            Error::InfiniteLiftSuspect { .. } => "InfiniteLiftSuspect",
            Error::DegenerateLoop { .. } => "DegenerateLoop",
            Error::Unresolved { .. } => "Unresolved",
            Error::NonIsolatedBranch(_) => "NonIsolatedBranch",
            Error::MonodromyMismatch(_) => "MonodromyMismatch",
            Error::ResidualExceeded { .. } => "ResidualExceeded",
            Error::Io(_) => "Io",
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
