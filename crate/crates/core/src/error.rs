use thiserror::Error;

/// Errors produced by the discretization, solvers and diagnostics.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("grid does not match domain: {0}")]
    Consistency(String),

    #[error("dimension mismatch in {what}: expected {expected}, got {got}")]
    Dimension {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("degenerate system: {reason} (collar nodes {nodes:?})")]
    Degenerate { reason: String, nodes: Vec<usize> },

    #[error("linear solve failed: {0}")]
    LinearSolve(String),

    #[error("conjugate gradient did not converge after {iterations} iterations (gradient norm {grad_norm:e})")]
    NotConverged {
        iterations: usize,
        grad_norm: f64,
        last_iterate: Vec<f64>,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_len(what: &'static str, expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::Dimension {
            what,
            expected,
            got,
        })
    }
}
