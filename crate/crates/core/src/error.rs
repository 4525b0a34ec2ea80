use thiserror::Error;

use crate::formatbook::Violation;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("non-finite input at element {index}")]
    NonFinite { index: usize },

    #[error("block length {len} outside [1, {max}]")]
    BlockLength { len: usize, max: usize },

    #[error("shared exponent {0} does not fit the signed 8-bit range [-127, 127]")]
    ExponentOutOfRange(i32),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("zero block has no dialect pair")]
    ZeroBlock,

    #[error("length mismatch: expected {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("dimension {dim} is not divisible by block size {block_size}")]
    NotDivisible { dim: usize, block_size: usize },

    #[error("format mismatch: {0}")]
    FormatMismatch(String),

    #[error("formatbook parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("invalid formatbook: {}", join_violations(.0))]
    Validation(Vec<Violation>),
}

fn join_violations(v: &[Violation]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join("; ")
}
