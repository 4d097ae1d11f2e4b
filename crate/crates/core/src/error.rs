use thiserror::Error;

/// Errors raised by the GEV routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum GevError {
    #[error("scale must be positive and finite, got {0}")]
    InvalidScale(f64),
    #[error("parameter `{name}` must be finite, got {value}")]
    NonFiniteParameter { name: &'static str, value: f64 },
    #[error("x = {x} lies outside the support of theta = {theta}")]
    OutOfSupport { x: f64, theta: String },
    #[error("probability must lie in (0, 1), got {0}")]
    InvalidProbability(f64),
    #[error("Fisher information undefined for shape {gamma} <= -1/2")]
    InformationUndefined { gamma: f64 },
    #[error("exponent a = {a} requires shape > {limit}, got {gamma}")]
    PowerExponentRange { a: f64, gamma: f64, limit: f64 },
    #[error("epsilon = {epsilon} too large: {constraint}")]
    EpsilonTooLarge { epsilon: f64, constraint: String },
    #[error("shape {gamma} outside the admissible range {range}")]
    ShapeOutOfRange { gamma: f64, range: &'static str },
    #[error("empty sample")]
    EmptySample,
    #[error("degenerate sample: {0}")]
    DegenerateSample(String),
    #[error("no admissible parameter in the box: {0}")]
    Infeasible(String),
    #[error("invalid parameter box: {0}")]
    InvalidBox(String),
    #[error("fit cannot provide standard errors: {0}")]
    NoStandardErrors(String),
    #[error("invalid configuration field `{field}`: {reason}")]
    InvalidConfig { field: String, reason: String },
    #[error("singular matrix: {0}")]
    Singular(String),
    #[error("i/o error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, GevError>;
