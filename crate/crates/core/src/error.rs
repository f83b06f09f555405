use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("sector dimension {required} exceeds addressable capacity")]
    Capacity { required: u128 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error(
        "basis mismatch: (L={left_sites}, n_up={left_up}) vs (L={right_sites}, n_up={right_up})"
    )]
    BasisMismatch {
        left_sites: usize,
        left_up: usize,
        right_sites: usize,
        right_up: usize,
    },

    #[error("degenerate gap E1 - E0 = {gap:e} below threshold {threshold:e}")]
    DegenerateGap { gap: f64, threshold: f64 },

    #[error("eigensolver did not converge after {iterations} iterations (residual {residual:e})")]
    EigenSolver { iterations: usize, residual: f64 },

    #[error("Krylov propagation did not converge (residual estimate {residual:e})")]
    Propagation { residual: f64 },

    #[error(
        "ramp integrator not converged at {steps} steps (infidelity change {change:e}); use a larger step count"
    )]
    StepRefinement { steps: usize, change: f64 },

    #[error("ramp search exceeded T_A cap {cap}; best infidelity {best_infidelity:e}")]
    RampSearchFailed { cap: f64, best_infidelity: f64 },

    #[error("rodeo annihilated the input state (p_total = {probability:e})")]
    RodeoAnnihilation { probability: f64 },

    #[error("success probability must lie in (0, 1], got {0}")]
    InvalidProbability(f64),

    #[error("target infidelity {target:e} not reached within {max_superiterations} superiterations (best {best:e})")]
    TargetNotReached {
        target: f64,
        max_superiterations: usize,
        best: f64,
    },
}
