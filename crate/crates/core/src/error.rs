use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Failure modes across the fractal, energy and solver layers.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("malformed fractal spec: {0}")]
    MalformedSpec(String),
    #[error("fixed point violation: map {map} sends P{point} to `{got}`")]
    FixedPointViolation { map: usize, point: usize, got: String },
    #[error("boundary collision: P{point} lies in the image of map {map}")]
    BoundaryCollision { point: usize, map: usize },
    #[error("map {map} is not injective on the boundary (label `{label}` repeated)")]
    NonInjectiveMap { map: usize, label: String },
    #[error("level-1 cells are disconnected: cell {unreachable} cannot be reached from cell 1")]
    Disconnected { unreachable: usize },

    #[error("word of length {word} is longer than the function level {level}")]
    WordTooLong { word: usize, level: usize },
    #[error("invalid word: index {index} is out of range for {maps} maps")]
    InvalidWord { index: usize, maps: usize },
    #[error("dimension mismatch: expected {expected} values, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("level mismatch: expected a function on level {expected}, got level {got}")]
    LevelMismatch { expected: usize, got: usize },
    #[error("non-finite value encountered: {0}")]
    NonFinite(String),

    #[error("negative coefficient {value} on pair ({a}, {b})")]
    NegativeCoefficient { a: usize, b: usize, value: f64 },
    #[error("form is reducible: positive-coefficient graph on the boundary is disconnected")]
    ReducibleForm,
    #[error("bad exponent {0}: need p > 1")]
    BadExponent(f64),
    #[error("energy ratio E/E_ref does not approach 1 near zero (last deviation {deviation:e})")]
    RatioDivergence { deviation: f64 },
    #[error("missing reference-form metadata (p, rho) needed for a constant boundary function")]
    MissingA2Metadata,

    #[error("solver diverged: {0}")]
    SolverDivergence(String),
    #[error("tolerance not reached after {iterations} coordinate updates (last move {last_move:e})")]
    ToleranceUnreached { iterations: usize, last_move: f64 },
    #[error("renormalized value is not increasing in theta between {lo} and {hi}")]
    MonotonicityViolation { lo: f64, hi: f64 },
    #[error("fixed-point iteration did not converge after {iterations} steps (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },
    #[error("energy drift {drift:e} at level {level} exceeds budget {budget:e}")]
    ConservationDrift { level: usize, drift: f64, budget: f64 },
    #[error("trace depth {depth} is too shallow: need at least {required} levels")]
    InsufficientDepth { depth: usize, required: usize },

    #[error("hypothesis violated: {0}")]
    HypothesisViolation(String),
    #[error("config error: {0}")]
    Config(String),
}

impl Error {
    /// Coarse classification used by the command line front end.
    pub fn kind(&self) -> ErrorKind {
        use Error::*;
        match self {
            SolverDivergence(_)
            | ToleranceUnreached { .. }
            | MonotonicityViolation { .. }
            | NoConvergence { .. }
            | ConservationDrift { .. }
            | NonFinite(_) => ErrorKind::Solver,
            HypothesisViolation(_) | MissingA2Metadata | RatioDivergence { .. } => {
                ErrorKind::Hypothesis
            }
            _ => ErrorKind::Validation,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Validation,
    Solver,
    Hypothesis,
}
