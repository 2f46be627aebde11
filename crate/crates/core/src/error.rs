use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("scale needs at least one weight")]
    EmptyScale,
    #[error("weight below 1: a_{index} = {value} violates a_j >= 1")]
    WeightBelowOne { index: usize, value: f64 },
    #[error("non-finite weight at position {index}")]
    NonFiniteWeight { index: usize },
    #[error("weight a_{index} = {value} exceeds the supported maximum {max}")]
    WeightTooLarge { index: usize, value: f64, max: f64 },
    #[error("explicit weight list has {found} entries but the truncation is {expected}")]
    TruncationMismatch { expected: usize, found: usize },
    #[error("space index {index} is out of range for this scale (|p| <= {limit}, powers must stay finite)")]
    IndexOutOfRange { index: i32, limit: i32 },
    #[error("length mismatch: expected {expected}, found {found}")]
    LengthMismatch { expected: usize, found: usize },
    #[error("not an inclusion direction: r = {r} > p = {p}")]
    NotInclusionDirection { r: i32, p: i32 },
    #[error("indices must be ordered {what}")]
    UnorderedIndices { what: String },
    #[error("operator is near-singular (condition number {condition:e} > {threshold:e})")]
    NearSingular { condition: f64, threshold: f64 },
    #[error("operator must be square and declared on (m, m)")]
    NotEndomorphism,
    #[error("singular frame operator: sequence is incomplete and the spectral cutoff is zero")]
    SingularFrameOperator,
    #[error("sequence is incomplete (rank {rank} < {n})")]
    IncompleteSequence { rank: usize, n: usize },
    #[error("sequence must contain at least one vector")]
    EmptySequence,
    #[error("families differ in length ({left} vs {right})")]
    CountMismatch { left: usize, right: usize },
    #[error("invalid truncations: {0}")]
    InvalidTruncations(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("config error at {pointer}: {message}")]
    Config { pointer: String, message: String },
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
