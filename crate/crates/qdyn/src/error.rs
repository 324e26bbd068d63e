use thiserror::Error;

/// Errors produced by the solver, spectral, and sampling layers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid bounds: expected x_max > x_min and n_points >= 3, got [{x_min}, {x_max}] with {n_points} points")]
    InvalidBounds {
        x_min: f64,
        x_max: f64,
        n_points: usize,
    },

    #[error("potential is not finite at x = {x} (index {index})")]
    NonFinitePotential { index: usize, x: f64 },

    #[error("grid mismatch: operands were built on different grids")]
    GridMismatch,

    #[error("instability detected: non-finite amplitude at step {step}")]
    InstabilityDetected { step: usize },

    #[error("eigensolver failed to converge for level {level}")]
    ConvergenceFailure { level: usize },

    #[error("state expansion has no nonzero coefficient")]
    EmptyExpansion,

    #[error("evaluation budget exhausted ({limit} evaluations)")]
    BudgetExhausted { limit: usize },

    #[error("walker population went extinct; decrease dtau or re-check e_ref")]
    PopulationExtinction,

    #[error("unknown benchmark function `{name}`")]
    UnknownFunction { name: String },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

pub type Result<T> = std::result::Result<T, Error>;
