use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid superstar parameters: {0}")]
    InvalidSpec(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid graph: {0}")]
    InvalidGraph(String),

    #[error("state is already absorbed (mutant count {mutants} of {n})")]
    AbsorbedState { mutants: usize, n: usize },

    #[error("inconsistent state: {0}")]
    InconsistentState(String),

    #[error("step budget of {budget} exceeded before absorption")]
    StepBudgetExceeded { budget: u64 },

    #[error("graph has {n} vertices, above the cap of {cap} for {mode} solving")]
    CapExceeded {
        n: usize,
        cap: usize,
        mode: &'static str,
    },

    #[error("linear system is singular at column {column}")]
    SingularSystem { column: usize },

    #[error("residual {residual:e} exceeds tolerance {tolerance:e}")]
    ResidualTooLarge { residual: f64, tolerance: f64 },

    #[error("engine mismatch: {0}")]
    EngineMismatch(String),

    #[error("parse error: {0}")]
    Parse(String),
}
