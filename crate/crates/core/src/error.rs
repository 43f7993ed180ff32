use std::io;

/// Errors produced by the compressor, the model loader, and the codecs.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("I/O error: {0}")]
    Io(#[from] io::Error),

    #[error("dims {dims:?} need {expected} bytes but input has {actual}")]
    SizeMismatch {
        dims: Vec<usize>,
        expected: usize,
        actual: usize,
    },

    #[error("field must have 1 to 3 axes, got {0}")]
    BadRank(usize),

    #[error("axis {axis} has zero extent")]
    ZeroExtent { axis: usize },

    #[error("non-finite value {value} at index {index}")]
    NonFinite { index: usize, value: f64 },

    #[error("value range is degenerate (vmin == vmax == {0})")]
    DegenerateRange(f64),

    #[error("invalid error bound: {0}")]
    InvalidBound(String),

    #[error("invalid block size {0}")]
    InvalidBlockSize(usize),

    #[error("invalid quantizer configuration: {0}")]
    InvalidQuantizer(String),

    #[error("sentinel code passed to dequantize")]
    SentinelCode,

    #[error("unpredictable values exhausted after {consumed} entries")]
    UnpredictableExhausted { consumed: usize },

    #[error("code stream length {actual} does not match block size {expected}")]
    CodeCountMismatch { expected: usize, actual: usize },

    #[error("invalid weight file: {0}")]
    InvalidWeights(String),

    #[error("network configuration error: {0}")]
    InvalidConfig(String),

    #[error("input is not a complete block of the network's size")]
    IncompleteBlock,

    #[error("latent length {actual} does not match the network's latent size {expected}")]
    LatentLength { expected: usize, actual: usize },

    #[error("corrupt stream: {0}")]
    CorruptStream(String),

    #[error("corrupt container: {0}")]
    CorruptContainer(String),

    #[error("model digest does not match the one recorded in the container")]
    ModelMismatch,

    #[error("container has {0} autoencoder blocks but no model was supplied")]
    ModelRequired(u64),

    #[error("field dimensionality {field} does not match the model's {model}")]
    DimensionalityMismatch { field: usize, model: usize },

    #[error("block size {requested} does not match the model's block size {model}")]
    BlockSizeMismatch { requested: usize, model: usize },

    #[error("fields have different dims: {left:?} vs {right:?}")]
    DimsMismatch { left: Vec<usize>, right: Vec<usize> },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
