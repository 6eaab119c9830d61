use std::path::PathBuf;

use crate::sparse::Layout;

/// Errors produced by matrix construction, convolution and file I/O.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("matrix must have at least one row and one column, got {rows}x{cols}")]
    EmptyShape { rows: usize, cols: usize },

    #[error("entry ({row}, {col}) is outside a {rows}x{cols} matrix")]
    IndexOutOfRange {
        row: usize,
        col: usize,
        rows: usize,
        cols: usize,
    },

    #[error("duplicate entry at ({row}, {col})")]
    DuplicateEntry { row: usize, col: usize },

    #[error("dimension mismatch in {op}: {left} vs {right}")]
    DimensionMismatch {
        op: &'static str,
        left: String,
        right: String,
    },

    #[error("block {index} is {rows}x{cols}, expected {expected} along the shared axis")]
    RaggedBlock {
        index: usize,
        rows: usize,
        cols: usize,
        expected: usize,
    },

    #[error("no blocks given")]
    NoBlocks,

    #[error("invalid convolution spec (m={m}, n={n}, k={k}, s={s}, p={p}): {reason}")]
    InvalidSpec {
        m: usize,
        n: usize,
        k: usize,
        s: usize,
        p: usize,
        reason: &'static str,
    },

    #[error("kernel side {kernel} does not match spec kernel side {spec}")]
    KernelMismatch { kernel: usize, spec: usize },

    #[error("slide index {index} out of range (0..{limit})")]
    SlideOutOfRange { index: usize, limit: usize },

    #[error("expected {expected} layout, found {found}")]
    WrongLayout { expected: Layout, found: Layout },

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("layer {name}: {source}")]
    Layer {
        name: String,
        #[source]
        source: Box<Error>,
    },

    #[error(
        "cross-check failed for layer {layer}: {method} deviates from reference by {max_abs_dev:e}"
    )]
    CrossCheck {
        layer: String,
        method: String,
        max_abs_dev: f64,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn mismatch(op: &'static str, left: impl ToString, right: impl ToString) -> Self {
        Error::DimensionMismatch {
            op,
            left: left.to_string(),
            right: right.to_string(),
        }
    }

    pub(crate) fn parse(line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            line,
            message: message.into(),
        }
    }
}
