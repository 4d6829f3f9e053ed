use thiserror::Error;

/// Errors produced while reading graph files.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParseError {
    #[error("line {line}: malformed header, expected `n m`")]
    MalformedHeader { line: usize },
    #[error("line {line}: malformed edge record")]
    MalformedRecord { line: usize },
    #[error("line {line}: node index {index} out of range for n = {n}")]
    IndexOutOfRange { line: usize, index: i64, n: usize },
    #[error("line {line}: self-loop on node {node}")]
    SelfLoop { line: usize, node: usize },
    #[error("line {line}: duplicate edge ({i}, {j})")]
    DuplicateEdge { line: usize, i: usize, j: usize },
    #[error("header declares {expected} edges but {found} were read")]
    EdgeCountMismatch { expected: usize, found: usize },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("alphabet size must be at least 2, got {0}")]
    InvalidAlphabet(usize),
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("label {label} out of range for K = {k}")]
    InvalidLabel { label: usize, k: usize },
    #[error("matrix is not Hermitian (defect {0:e})")]
    NotHermitian(f64),
    #[error("rank {r} out of range for dimension {n}")]
    RankOutOfRange { r: usize, n: usize },
    #[error("eigensolver did not converge after {0} iterations")]
    NonConvergence(usize),
    #[error("instance too large for exhaustive search: {0} evaluations exceed the limit of {1}")]
    InstanceTooLarge(u128, u128),
    #[error("infeasible request: {0}")]
    Infeasible(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error(transparent)]
    Parse(#[from] ParseError),
}

pub type Result<T> = std::result::Result<T, Error>;
