use std::path::PathBuf;

use thiserror::Error;

use crate::cgm::IterationTrace;

/// Errors produced by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("{name} = {value} is outside its valid range {range}")]
    Domain {
        name: &'static str,
        value: f64,
        range: String,
    },

    #[error("shape mismatch for {what}: expected {expected}, got {actual}")]
    Shape {
        what: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("direction has nonzero entries in both the source and initial-temperature blocks")]
    MixedDirection,

    #[error("search direction in the {block} block has zero line curvature")]
    DegenerateDirection { block: Block },

    #[error("normal matrix is singular (rank deficient design with alpha = 0)")]
    Singular,

    #[error("iteration diverged at step {iteration}: non-finite {quantity}")]
    Divergence {
        iteration: usize,
        quantity: &'static str,
        trace: Box<IterationTrace>,
    },

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// One of the two unknown coefficient blocks.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Block {
    /// Source coefficients (phi).
    Source,
    /// Initial-temperature coefficients (theta).
    Initial,
}

impl std::fmt::Display for Block {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Block::Source => f.write_str("source"),
            Block::Initial => f.write_str("initial-temperature"),
        }
    }
}

pub(crate) fn check_range(
    name: &'static str,
    value: f64,
    ok: bool,
    range: impl Into<String>,
) -> Result<()> {
    if ok && !value.is_nan() {
        Ok(())
    } else {
        Err(Error::Domain {
            name,
            value,
            range: range.into(),
        })
    }
}
