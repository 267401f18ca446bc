use std::io;

/// Errors raised anywhere in the library.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid potential: {0}")]
    InvalidPotential(String),
    #[error("hessian requested on the kink |z| = 1 with q < 2")]
    DegenerateKink,
    #[error("potential is not elliptic outside B_(1+{delta}): sampled minimum eigenvalue {min_eig}")]
    NotElliptic { delta: f64, min_eig: f64 },
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("could not invert the force map at |a| = {0}")]
    InversionFailed(f64),

    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("field does not live on this grid")]
    GridMismatch,
    #[error("source is not compatible with the zero-flux boundary: integral {0:e}")]
    IncompatibleSource(f64),
    #[error("conjugate gradient stagnated after {iterations} iterations (residual {residual:e})")]
    SolverStagnation { iterations: usize, residual: f64 },
    #[error("region does not fit inside the domain")]
    RegionOutOfDomain,
    #[error("region contains no cells")]
    EmptyRegion,

    #[error("line search failed at newton iteration {0}")]
    LineSearchFailure(usize),
    #[error("iteration cap of {0} reached before convergence")]
    MaxIterations(usize),

    #[error("log-modulus fit is degenerate: {0}")]
    DegenerateFit(String),
    #[error("composition function does not vanish on the unit ball (g = {value} at |z| = {radius})")]
    NotVanishingOnBall { radius: f64, value: f64 },

    #[error("point ({0}, {1}) is outside the domain")]
    OutOfDomain(f64, f64),
    #[error("flux is not feasible: ||div s - f|| = {0:e}")]
    InfeasibleFlux(f64),
    #[error("integration step exceeded one cell after the allowed refinements")]
    StepTooLarge,
    #[error("traffic plan has no curves")]
    EmptyPlan,
    #[error("metric must be strictly positive (found {0})")]
    NonpositiveMetric(f64),

    #[error("unknown source `{0}`")]
    UnknownSource(String),
    #[error("invalid configuration: {0}")]
    ConfigInvalid(String),
    #[error("malformed field file: {0}")]
    FieldFormat(String),
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error("stage `{stage}` failed: {source}")]
    Stage { stage: String, source: Box<Error> },
}

impl Error {
    /// Whether the error stems from the configuration or its inputs rather
    /// than from a numerical failure.
    pub fn is_config_error(&self) -> bool {
        match self {
            Error::Stage { source, .. } => source.is_config_error(),
            Error::InvalidPotential(_)
            | Error::Unsupported(_)
            | Error::InvalidGrid(_)
            | Error::GridMismatch
            | Error::IncompatibleSource(_)
            | Error::RegionOutOfDomain
            | Error::UnknownSource(_)
            | Error::ConfigInvalid(_)
            | Error::FieldFormat(_)
            | Error::Io(_)
            | Error::Json(_) => true,
            _ => false,
        }
    }

    /// Short machine-readable name of the variant.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidPotential(_) => "InvalidPotential",
            Error::DegenerateKink => "DegenerateKink",
            Error::NotElliptic { .. } => "NotElliptic",
            Error::Unsupported(_) => "Unsupported",
            Error::InversionFailed(_) => "InversionFailed",
            Error::InvalidGrid(_) => "InvalidGrid",
            Error::GridMismatch => "GridMismatch",
            Error::IncompatibleSource(_) => "IncompatibleSource",
            Error::SolverStagnation { .. } => "SolverStagnation",
            Error::RegionOutOfDomain => "RegionOutOfDomain",
            Error::EmptyRegion => "EmptyRegion",
            Error::LineSearchFailure(_) => "LineSearchFailure",
            Error::MaxIterations(_) => "MaxIterations",
            Error::DegenerateFit(_) => "DegenerateFit",
            Error::NotVanishingOnBall { .. } => "NotVanishingOnBall",
            Error::OutOfDomain(..) => "OutOfDomain",
            Error::InfeasibleFlux(_) => "InfeasibleFlux",
            Error::StepTooLarge => "StepTooLarge",
            Error::EmptyPlan => "EmptyPlan",
            Error::NonpositiveMetric(_) => "NonpositiveMetric",
            Error::UnknownSource(_) => "UnknownSource",
            Error::ConfigInvalid(_) => "ConfigInvalid",
            Error::FieldFormat(_) => "FieldFormat",
            Error::Io(_) => "Io",
            Error::Json(_) => "Json",
            Error::Stage { source, .. } => source.kind(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
