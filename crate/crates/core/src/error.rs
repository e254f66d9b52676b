use thiserror::Error;

use crate::params::Violation;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },

    #[error("singular matrix: pivot magnitude {pivot:e} at column {column}")]
    SingularMatrix { column: usize, pivot: f64 },

    #[error("degenerate invariant form: |Tr(H)| = {trace:e}")]
    DegenerateForm { trace: f64 },

    #[error("m = {m} exceeds the supported maximum {max}")]
    MTooLarge { m: usize, max: usize },

    #[error("block structure violated: max off-block magnitude {max_off_block:e}")]
    BlockStructureViolation { max_off_block: f64 },

    #[error("series or continuation did not converge after {terms} terms")]
    NoConvergence { terms: usize },

    #[error("continuation step {step:e} below the underflow threshold")]
    StepUnderflow { step: f64 },

    #[error("eigenvector solve is singular")]
    EigenvectorDegenerate,

    #[error("eigenvector component {index} vanishes (|v| = {magnitude:e})")]
    VanishingComponent { index: usize, magnitude: f64 },

    #[error("invalid parameters: {}", format_violations(.0))]
    InvalidParams(Vec<Violation>),

    #[error("outside the supported domain: {0}")]
    Domain(String),

    #[error("malformed input: {0}")]
    Parse(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for failures of the numerical machinery rather than of the input.
    pub fn is_numeric(&self) -> bool {
        matches!(
            self,
            Error::NoConvergence { .. }
                | Error::StepUnderflow { .. }
                | Error::SingularMatrix { .. }
                | Error::EigenvectorDegenerate
                | Error::VanishingComponent { .. }
                | Error::DegenerateForm { .. }
        )
    }
}

fn format_violations(v: &[Violation]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join("; ")
}

pub type Result<T> = std::result::Result<T, Error>;
