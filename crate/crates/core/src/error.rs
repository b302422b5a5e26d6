use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// The document does not follow the model/portfolio schema.
    #[error("schema violation: {0}")]
    Schema(String),

    #[error("invariant violated{}: {message}", step_suffix(*.step))]
    Invariant {
        step: Option<usize>,
        message: String,
    },

    #[error("dimension mismatch{}: expected {expected}, found {found}", step_suffix(*.step))]
    DimensionMismatch {
        step: Option<usize>,
        expected: usize,
        found: usize,
    },

    /// A point left the admissible set `1 + v·x > 0`.
    #[error("point outside the admissible domain: 1 + v·x = {margin:e} for atom {atom}")]
    DomainViolation { atom: usize, margin: f64 },

    /// Ψ keeps increasing along an unbounded ray; the normalised direction is
    /// an immediate-arbitrage candidate.
    #[error("solver diverged along direction {direction:?} (|v| = {radius:e})")]
    Diverged { direction: Vec<f64>, radius: f64 },

    #[error("no convergence after {iterations} iterations (gradient norm {grad_norm:e})")]
    NotConverged { iterations: usize, grad_norm: f64 },

    #[error("numerically indeterminate: {0}")]
    Indeterminate(String),

    #[error("strategy inadmissible on path {path}, step {step}: 1 + f·ΔS = {margin:e}")]
    Inadmissible { path: usize, step: usize, margin: f64 },

    #[error("requested simulation needs {required} bytes, budget is {budget}")]
    MemoryBudget { required: u128, budget: u128 },

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("path dump: {0}")]
    Dump(String),

    /// Per-step failures collected by model-level operations.
    #[error("{} step(s) failed: {}", .0.len(), summarize(.0))]
    Steps(Vec<(usize, Error)>),
}

fn step_suffix(step: Option<usize>) -> String {
    match step {
        Some(m) => format!(" at step {m}"),
        None => String::new(),
    }
}

fn summarize(errors: &[(usize, Error)]) -> String {
    errors
        .iter()
        .map(|(m, e)| format!("[step {m}] {e}"))
        .collect::<Vec<_>>()
        .join("; ")
}

impl Error {
    pub(crate) fn invariant(step: impl Into<Option<usize>>, message: impl Into<String>) -> Self {
        Error::Invariant {
            step: step.into(),
            message: message.into(),
        }
    }

    /// Step indices named by this error, if any.
    pub fn steps(&self) -> Vec<usize> {
        match self {
            Error::Invariant { step: Some(m), .. } | Error::DimensionMismatch { step: Some(m), .. } => {
                vec![*m]
            }
            Error::Inadmissible { step, .. } => vec![*step],
            Error::Steps(list) => list.iter().map(|(m, _)| *m).collect(),
            _ => Vec::new(),
        }
    }
}
