use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("matrix is not Hermitian (max asymmetry {0:e})")]
    NotHermitian(f64),
    #[error("matrix is not positive semidefinite (min eigenvalue {0:e})")]
    NotPsd(f64),
    #[error("invalid parameter: {0}")]
    InvalidParam(String),
}

/// Failures of the log-det barrier solver.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum InnerError {
    #[error("program has no strictly feasible point")]
    Infeasible,
    #[error("numerical failure: {0}")]
    NumericalFailure(String),
    #[error("malformed program: {0}")]
    Malformed(String),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DinkelbachError {
    #[error("parametric subproblem failed: {0}")]
    SubproblemFailed(#[from] InnerError),
    #[error("no convergence within {0} iterations")]
    MaxIterExceeded(usize),
    #[error(
        "objective decreased from {previous} to {current}: surrogate is not a valid minorizer"
    )]
    NonMonotoneObjective { previous: f64, current: f64 },
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum UnderlayError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("primary rate target exceeds the interference-free primary capacity; underlay is not applicable")]
    R1StarExceedsDirectCapacity,
    #[error("secondary rate target is not attainable under the primary protection constraints")]
    R2StarInfeasible,
    #[error("could not bracket the rate-splitting factor: r12(0)-R1*={at_zero:e}, r12(K)-R1*={at_one:e}")]
    GammaBracketFailure { at_zero: f64, at_one: f64 },
    #[error(transparent)]
    Solver(#[from] DinkelbachError),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OverlayError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("degenerate channel: {0}")]
    DegenerateChannel(&'static str),
    #[error("primary rate target is not above the direct-link rate; use underlay")]
    UnderlayRegime,
    #[error("primary rate target {r1_star:e} exceeds the maximum relayed rate {r_bar:e}")]
    InfeasibleR1Star { r1_star: f64, r_bar: f64 },
    #[error("rank-one relay cannot meet the primary target at any amplification")]
    Rank1Infeasible,
    #[error("no feasible starting point for the sequential loop")]
    InitInfeasible,
    #[error("secondary rate target is not attainable")]
    R2StarInfeasible,
    #[error(transparent)]
    Solver(#[from] DinkelbachError),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ChannelError {
    #[error("invalid drop configuration: {0}")]
    InvalidConfig(String),
    #[error("placement rule not met after {0} attempts")]
    PlacementFailed(usize),
    #[error("drop file: {0}")]
    Io(String),
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("invalid configuration: {0}")]
    Invalid(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Channel(#[from] ChannelError),
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("nothing to write: result set is empty")]
    EmptyResults,
    #[error("{0}")]
    Unsupported(String),
}
