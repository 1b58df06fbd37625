use thiserror::Error;

/// Failure modes of the solvers and validators in this crate.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid exponent p = {0} (need p > 1)")]
    InvalidExponent(f64),
    #[error("grid too small: n = {n}, need at least {min}")]
    GridTooSmall { n: usize, min: usize },
    #[error("grid mismatch: {left} vs {right} nodes")]
    GridMismatch { left: usize, right: usize },
    #[error("grid function contains non-finite values")]
    NonFinite,
    #[error("weighted denominator {0:e} is numerically zero")]
    ZeroDenominator(f64),

    #[error("weight schema error: {0}")]
    Schema(String),
    #[error("piecewise weight jumps by {jump:e} at x = {at}")]
    DiscontinuousWeight { at: f64, jump: f64 },
    #[error("weight is not admissible: it is nonpositive on the whole interval")]
    NotAdmissible,
    #[error("x = {0} lies outside [0, 1]")]
    OutOfDomain(f64),

    #[error("trajectory overflow at x = {x} (|state| > 1e12)")]
    Overflow { x: f64 },
    #[error("Newton iteration did not converge after {iterations} steps (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },
    #[error("shooting Jacobian is singular (condition estimate {condition:e})")]
    SingularJacobian { condition: f64 },
    #[error("continuation step underflow; last good p = {last_p}")]
    StepUnderflow { last_p: f64 },
    #[error("branch jump at p = {p}: expected {expected} interior zeros, found {found}")]
    BranchJump { p: f64, expected: usize, found: usize },

    #[error("all weight samples vanish")]
    DegenerateWeight,
    #[error("starting vector has nonpositive weighted p-norm")]
    InfeasibleStart,
    #[error("mu1 never became negative below lambda = {cap:e}")]
    BracketFailure { cap: f64 },

    #[error("adjacent nodal domains share the same sign near x = {at}")]
    NonAlternating { at: f64 },
    #[error("subdomain solve failed on ({a}, {b}): {reason}")]
    SubsolveFailure { a: f64, b: f64, reason: String },
}

pub type Result<T> = std::result::Result<T, Error>;
