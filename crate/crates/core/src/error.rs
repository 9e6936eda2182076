use thiserror::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, TmError>;

/// Errors produced by the model/dataset formats, the pipelines and the
/// benchmark harness.
#[derive(Debug, Error)]
pub enum TmError {
    #[error("bad magic: expected {expected:?}, found {found:?}")]
    BadMagic { expected: [u8; 4], found: [u8; 4] },

    #[error("unsupported format version {found} (expected {expected})")]
    VersionMismatch { expected: u8, found: u8 },

    #[error("truncated payload while reading {0}")]
    Truncated(&'static str),

    /// Header fields, stored flags or row contents that contradict each
    /// other (word counts, padding bits, nonempty flags, label ranges...).
    #[error("shape inconsistency: {0}")]
    Shape(String),

    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("sample {sample}: label {label} out of range for {n_classes} classes")]
    LabelOutOfRange {
        sample: usize,
        label: u32,
        n_classes: u32,
    },

    #[error("permutation is not a bijection on [0, {len})")]
    InvalidPermutation { len: usize },

    #[error("model is already permuted")]
    AlreadyPermuted,

    #[error("permutation mismatch between model and dataset: {0}")]
    PermutationMismatch(String),

    #[error("dataset is empty")]
    EmptyDataset,

    #[error("row {row}, column {col}: {msg}")]
    CsvCell { row: usize, col: usize, msg: String },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("idx magic mismatch: expected {expected:#010x}, found {found:#010x}")]
    IdxMagic { expected: u32, found: u32 },

    /// Engines returned different predictions for the same input. This is
    /// an internal invariant violation, never a benchmark result.
    #[error("engine disagreement on sample {sample}: {details}")]
    EngineDisagreement { sample: usize, details: String },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
