use thiserror::Error;

/// Errors produced by model construction, spectral analysis and dynamics.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("parameter `{name}` = {value} violates {bound}")]
    Parameter {
        name: &'static str,
        value: f64,
        bound: &'static str,
    },

    #[error("degenerate spectrum: {0}")]
    Degenerate(&'static str),

    #[error("zero-frequency channel requested (omega = 0)")]
    ZeroFrequency,

    #[error("virtual temperature undefined: E2/Tw equals E1/Th")]
    DegenerateTemperature,

    #[error("block `{block}` is not diagonalizable within tolerance ({detail})")]
    Defective { block: String, detail: String },

    #[error("block structure violated: coupling {value:e} from {from:?} to {to:?}")]
    BlockLeak {
        from: (usize, usize),
        to: (usize, usize),
        value: f64,
    },

    #[error("eigenvalue iteration did not converge for block `{0}`")]
    NoConvergence(String),

    #[error("steady state is not unique (second singular value {0:e})")]
    NonErgodic(f64),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("invalid density matrix: {0}")]
    InvalidState(String),

    #[error("basis mismatch: {0:?} vs {1:?}")]
    BasisMismatch(crate::model::Basis, crate::model::Basis),

    #[error("expected {expected} parameters, got {got}")]
    Arity { expected: usize, got: usize },

    #[error("invalid time grid: {0}")]
    Grid(String),

    #[error("distance never reached {epsilon:e}; final distance {final_distance:e}")]
    NotConverged { epsilon: f64, final_distance: f64 },

    #[error(
        "candidate is not initially farther from the steady state ({candidate:e} <= {reference:e})"
    )]
    Ordering { candidate: f64, reference: f64 },

    #[error("Mpemba verification failed: {0}")]
    Verification(String),
}

pub type Result<T> = std::result::Result<T, Error>;
