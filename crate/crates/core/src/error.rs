//! Error taxonomy shared across the toolkit.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("expression parse error: {0}")]
    Parse(String),

    #[error("time step {tau} violates the CFL bound {bound} for this grid and dynamics")]
    CflViolation { tau: f64, bound: f64 },

    #[error("solver did not converge within {sweeps} sweeps (residual {residual:.3e})")]
    SolverBudget { sweeps: usize, residual: f64 },

    #[error("degenerate costate: the Hamiltonian gradient needs p != 0")]
    DegenerateCostate,

    #[error("costate collapsed below 1e-12 at t = {time}")]
    CostateCollapse { time: f64 },

    #[error("insufficient sampling: {found} cloud points in the search ball, need at least {needed}")]
    InsufficientSampling { found: usize, needed: usize },

    #[error("point {point:?} is outside the grid domain")]
    OutOfDomain { point: Vec<f64> },

    #[error("unknown scenario '{0}'")]
    UnknownScenario(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("serialization error: {0}")]
    Serde(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Process exit code for the CLI: 2 config, 3 solver budget, 4 is
    /// reserved for verification failures (not an `Error`).
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::SolverBudget { .. } => 3,
            _ => 2,
        }
    }
}
