//! Error type shared by all modules.

use thiserror::Error;

/// Errors produced by solvers, samplers and evaluators.
#[derive(Debug, Error)]
pub enum CoreError {
    /// A precondition on an argument was violated.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// The fixed-point iteration diverged or ran out of iterations.
    #[error("solver did not converge after {iterations} iterations (last relative change {last_change:.3e})")]
    NonConvergence { iterations: usize, last_change: f64 },

    /// The density support is empty at termination; the cutoff energy is too low.
    #[error("empty shell: the support of the density is empty (E0 too negative)")]
    EmptyShell,

    /// Fixed-mass mode could not bracket the target mass.
    #[error("bracketing failure: {0}")]
    BracketingFailure(String),

    /// Rejection sampling acceptance rate fell below the usability threshold.
    #[error("sampling failure: acceptance rate {acceptance:.3e} below 1e-4")]
    SamplingFailure { acceptance: f64 },

    /// A state violated a structural invariant (membership in the constraint set,
    /// monotonicity of the enclosed mass, ...).
    #[error("invariant violation: {0}")]
    InvariantViolation(String),

    /// A state violated the constraint set of admissible perturbations.
    #[error("constraint violation: {0}")]
    ConstraintViolation(String),

    /// A state on which a functional is undefined (support below the angular
    /// momentum cutoff).
    #[error("invalid state: {0}")]
    InvalidState(String),

    /// The particle integrator produced a non-finite or non-positive radius.
    #[error("integrator blow-up at t = {time}: {detail}")]
    IntegratorBlowup { time: f64, detail: String },

    /// The negative-energy witness search underflowed.
    #[error("witness failure: H_C still nonnegative at b = {b:.3e}")]
    WitnessFailure { b: f64 },

    /// Record (de)serialization failure.
    #[error("record error: {0}")]
    Record(String),

    /// I/O failure while reading or writing record files.
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
