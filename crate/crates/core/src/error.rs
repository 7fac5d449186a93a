use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("{op}: dimension mismatch between {left_rows}x{left_cols} and {right_rows}x{right_cols}")]
    DimensionMismatch {
        op: &'static str,
        left_rows: usize,
        left_cols: usize,
        right_rows: usize,
        right_cols: usize,
    },
    #[error("matrix data length {len} does not match {rows}x{cols}")]
    BadLength { rows: usize, cols: usize, len: usize },
    #[error("non-finite value at index {index}")]
    NonFinite { index: usize },
    #[error("empty matrix")]
    Empty,
    #[error("svd did not converge after {sweeps} sweeps (off-diagonal measure {off_diagonal:e})")]
    SvdNoConvergence { sweeps: usize, off_diagonal: f64 },
    #[error("component range {start}..{end} is invalid for {k} components")]
    InvalidRange { start: usize, end: usize, k: usize },
    #[error("rank {rank} out of range 1..={max}")]
    InvalidRank { rank: usize, max: usize },
    #[error("weight matrix has no spectrum above the rank tolerance")]
    NoSpectrum,
    #[error("group count must be at least 1 and at most the number of values ({len}), got {groups}")]
    InvalidGroups { groups: usize, len: usize },
    #[error("label {label} out of range for {classes} classes")]
    LabelOutOfRange { label: usize, classes: usize },
    #[error("non-finite gradient in {param}")]
    NonFiniteGradient { param: String },
    #[error("training diverged at step {step}")]
    Diverged { step: usize },
    #[error("gradient cache does not match the model: {0}")]
    CacheMismatch(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("layer {0} is not a plain weight")]
    NotPlain(String),
    #[error("foundation under-trained: mean accuracy {accuracy:.4} < {required}")]
    UnderTrained { accuracy: f64, required: f64 },
    #[error("empty dataset")]
    EmptyData,
}
