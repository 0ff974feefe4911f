use thiserror::Error;

use crate::combinatorics::DetectionDiagnostics;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A point or parameter outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// Malformed input data (non-finite samples, bad grid sizes, ...).
    #[error("invalid input: {0}")]
    Input(String),

    #[error("degenerate interval [{lo}, {hi}]")]
    DegenerateInterval { lo: f64, hi: f64 },

    /// An orbit came within the collision tolerance of the critical point.
    #[error("orbit hit the critical point at step {step} (x = {x})")]
    CriticalCollision { step: usize, x: f64 },

    #[error("map is not renormalizable of type ({n},{m}): {diagnostics}")]
    NotRenormalizable {
        n: usize,
        m: usize,
        diagnostics: Box<DetectionDiagnostics>,
    },

    /// Formula-built and orbit-built renormalizations disagree.
    #[error("renormalization inconsistency: residual {residual:.3e} exceeds {tolerance:.3e}")]
    Inconsistency { residual: f64, tolerance: f64 },

    /// A refitted or composed map failed to be an increasing bijection.
    #[error("representation error: {0}")]
    Representation(String),

    #[error("combinatorics lost at iteration {iteration}: {source}")]
    CombinatoricsLost {
        iteration: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("no convergence after {iterations} iterations (last distance {last:.3e})")]
    NoConvergence { iterations: usize, last: f64, trace: Vec<f64> },

    #[error("island search failed at level {level}: {reason}")]
    SearchFailure { level: usize, reason: String },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("degenerate map: {0}")]
    DegenerateMap(String),

    #[error("interval is not nice: {0}")]
    NotNice(String),
}

impl Error {
    /// Errors that describe the mathematics of the input rather than misuse.
    pub fn is_domain_failure(&self) -> bool {
        !matches!(self, Error::Input(_))
    }
}
