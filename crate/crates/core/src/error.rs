use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("empty support")]
    EmptySupport,

    /// The orthogonalized new column fell below the rank threshold.
    #[error("degenerate selection: column {index} is numerically dependent on the current support")]
    DegenerateSelection { index: usize },

    #[error("iterative solver did not converge after {iterations} iterations")]
    NotConverged { iterations: usize },

    #[error("singular system: relative pivot {pivot:e} at row {row}")]
    SingularSystem { row: usize, pivot: f64 },

    #[error("infeasible constraints: residual {residual:e}")]
    Infeasible { residual: f64 },

    #[error("simplex iteration guard exceeded ({0} pivots)")]
    CyclingGuard(usize),

    #[error("combinatorial budget exceeded: {subsets} subsets > {budget}")]
    BudgetExceeded { subsets: u128, budget: u128 },

    #[error("parse error: {0}")]
    Parse(String),
}

impl Error {
    /// Solver-side failures, as opposed to malformed input.
    pub fn is_degeneracy(&self) -> bool {
        matches!(
            self,
            Error::DegenerateSelection { .. }
                | Error::SingularSystem { .. }
                | Error::NotConverged { .. }
                | Error::CyclingGuard(_)
        )
    }
}
