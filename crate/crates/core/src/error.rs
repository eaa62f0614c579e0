use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Errors raised by the sampling toolkit.
///
/// Variants are split into usage errors (bad parameters, misuse of an API)
/// and ingestion/estimation errors (bad input data); see [`Error::is_usage`].
#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum Error {
    #[error(
        "hash range q = {q} out of bounds: need 1 <= q <= {max} to keep the mod-q bias below 2^-20"
    )]
    HashRange { q: u64, max: u64 },

    #[error("element {0} does not fit the hash field (must be < 2^61 - 1)")]
    ElementOutOfField(u64),

    #[error("elements must be strictly increasing")]
    NotSorted,

    #[error("expected a subset of size {expected}, got {actual}")]
    SubsetSize { expected: usize, actual: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("value {requested} requested after the enumerator already passed {frontier}")]
    Frontier { requested: u64, frontier: u64 },

    #[error("malformed bucket range [{start}, {end}) for q = {q}")]
    BucketRange { start: u64, end: u64, q: u64 },

    #[error("worker index {worker} out of range (workers = {workers})")]
    WorkerIndex { worker: usize, workers: usize },

    #[error("line {line}: set of size {size} exceeds the declared maximum {max}")]
    Oversize {
        line: usize,
        size: usize,
        max: usize,
    },

    #[error("line {line}, column {column}: cannot parse {token:?} as an element id")]
    Parse {
        line: usize,
        column: usize,
        token: String,
    },

    #[error("line {line}: vertex {vertex} listed more than once")]
    DuplicateVertex { line: usize, vertex: u64 },

    #[error("line {line}: vertex {vertex} lists itself as a neighbor")]
    SelfLoop { line: usize, vertex: u64 },

    #[error("stream holds more than the declared {declared} sets")]
    StreamTooLong { declared: usize },

    #[error("exact count exceeds the configured cap of {cap} distinct subsets")]
    OracleTooLarge { cap: usize },

    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    /// True for errors caused by how the API or CLI was invoked rather than by
    /// the data being processed.
    pub fn is_usage(&self) -> bool {
        matches!(
            self,
            Error::HashRange { .. }
                | Error::SubsetSize { .. }
                | Error::InvalidParameter(_)
                | Error::Frontier { .. }
                | Error::BucketRange { .. }
                | Error::WorkerIndex { .. }
        )
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
