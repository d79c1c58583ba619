use thiserror::Error;

/// Errors produced across the workbench.
#[derive(Debug, Error)]
pub enum Error {
    #[error("format error on line {line}: {msg}")]
    Format { line: usize, msg: String },
    #[error("index out of range on line {line}: {index} exceeds {bound}")]
    Bounds { line: usize, index: usize, bound: usize },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("no convergence after {iterations} iterations (last energy delta {last_delta:e})")]
    Convergence { iterations: usize, last_delta: f64 },
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("embedding inconsistency: projected electron count {0:.4} is not close to an integer")]
    Embedding(f64),
    #[error("objective returned a non-finite value at evaluation {evaluation}")]
    NonFinite {
        evaluation: usize,
        /// Records gathered before the failure.
        partial: Box<crate::vqe::OptHistory>,
    },
    #[error("no feasible refinement candidate with sigma <= {c}; try a larger threshold")]
    Infeasible { c: f64 },
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
