use thiserror::Error;

/// Errors raised anywhere in the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("unknown vertex `{0}`")]
    UnknownVertex(String),
    #[error("empty vertex list")]
    EmptyVertices,
    #[error("too many vertices ({0}); at most 128 are supported")]
    TooManyVertices(usize),
    #[error("vertex subset is not contained in the vertex set")]
    NotSubset,
    #[error("clique enumeration cap {0} exceeded")]
    CliqueCap(usize),
    #[error("grid metadata required")]
    NoGrid,
    #[error("no observations")]
    NoObservations,
    #[error("unknown label `{label}` for variable `{var}`")]
    UnknownLabel { var: String, label: String },
    #[error("missing column `{0}`")]
    MissingColumn(String),
    #[error("malformed record: {0}")]
    Malformed(String),
    #[error("negative count {0}")]
    NegativeCount(i64),
    #[error("cell space of size {size} exceeds the explicit cap {cap}")]
    CapExceeded { size: u128, cap: u64 },
    #[error("index {0} out of range")]
    OutOfRange(u64),
    #[error("parameter count {0} exceeds the configured limit {1}")]
    TooManyParams(usize, usize),
    #[error("empty cell set")]
    EmptySet,
    #[error("LP failure: {0}")]
    Lp(String),
    #[error("certificate verification failed: {0}")]
    Verification(String),
    #[error("split is not a complete separator: {0}")]
    NotCompleteSeparator(String),
    #[error("split is not a separator: {0}")]
    NotSeparator(String),
    #[error("cover does not contain generator {0}")]
    CoverMissesGenerator(String),
    #[error("invariant violated: {0}")]
    Invariant(String),
    #[error("mismatched covers")]
    CoverMismatch,
    #[error("cover is not a chain: {0}")]
    NotChain(String),
    #[error("division by a zero fitted marginal on generator {0}")]
    IpfZeroDivision(String),
    #[error("moment matching failed: residual {0:e}")]
    MomentMismatch(f64),
    #[error("line search failed at iteration {0}")]
    LineSearch(usize),
    #[error("numeric overflow in likelihood evaluation")]
    Overflow,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("singular matrix: {0}")]
    Singular(String),
    #[error("k = {k} larger than the number of vertices {n}")]
    KTooLarge { k: usize, n: usize },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
