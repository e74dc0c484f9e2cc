use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("atom has zero or non-finite norm")]
    ZeroAtom,

    #[error("dictionary must contain at least one atom")]
    EmptyDictionary,

    #[error("model must contain at least one layer")]
    EmptyModel,

    #[error("input vector has zero norm")]
    ZeroInput,

    #[error("basis is not orthogonal: <atom {0}, atom {1}> is non-zero")]
    NotOrthogonal(usize, usize),

    #[error("a complete basis needs {dim} atoms, found {count}")]
    NotComplete { dim: usize, count: usize },

    #[error("cluster has no members")]
    EmptyCluster,

    #[error("cluster cosine weights sum to {0:e}")]
    DegenerateCluster(f64),

    #[error("every cluster member is orthogonal to the atom")]
    NearOrthogonalMember,

    #[error("atom update collapsed to norm {0:e}")]
    DegenerateUpdate(f64),

    #[error("need at least {k} samples, found {n}")]
    InsufficientSamples { n: usize, k: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("dataset is empty")]
    EmptyDataset,

    #[error("row {row}: expected {expected} columns, found {found}")]
    RaggedRow { row: usize, expected: usize, found: usize },

    #[error("row {row}, column {column}: cannot parse {token:?} as a number")]
    ParseNumber { row: usize, column: usize, token: String },

    #[error("IDX label file (magic 0x00000801); pass the matching image file (magic 0x00000803)")]
    IdxLabelFile,

    #[error("bad magic number 0x{0:08x}")]
    BadMagic(u32),

    #[error("truncated input: {0}")]
    Truncated(String),

    #[error("unsupported model format version {found} (expected {expected})")]
    VersionMismatch { found: u32, expected: u32 },

    #[error("checksum mismatch: stored {stored:016x}, computed {computed:016x}")]
    ChecksumMismatch { stored: u64, computed: u64 },

    #[error("code row {row}: {message}")]
    BadCode { row: usize, message: String },

    #[error("malformed model header: {0}")]
    Header(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
