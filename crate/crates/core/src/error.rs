use alloc::string::String;

use crate::scalar::Field;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid dimensions: {0}")]
    Dimension(String),
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error("input is not orthonormal (deviation {deviation:.3e})")]
    NotOrthonormal { deviation: f64 },
    #[error("length mismatch: expected {expected}, found {found}")]
    LengthMismatch { expected: usize, found: usize },
    #[error("shape mismatch: expected {expected:?}, found {found:?}")]
    ShapeMismatch {
        expected: (usize, usize),
        found: (usize, usize),
    },
    #[error("partition {tau} out of range 0..={max}")]
    PartitionOutOfRange { tau: usize, max: usize },
    #[error("{solver} does not support the {field} field")]
    UnsupportedField { solver: &'static str, field: Field },
    #[error("sensing matrix is ill-conditioned: numerical rank {rank} < {dim}")]
    IllConditioned { rank: usize, dim: usize },
    #[error("under-determined problem: {m} measurements for {d} unknowns")]
    UnderDetermined { m: usize, d: usize },
    #[error("rank collapse: numerical rank {rank} < {expected}")]
    RankCollapse { rank: usize, expected: usize },
    #[error("no rank detected: no eigenvalue gap reaches the threshold")]
    NoRankDetected,
    #[error("degenerate data: {0}")]
    DegenerateData(String),
}
