use std::io;

use thiserror::Error;

/// Errors produced anywhere in the codec.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension {dim} = {size} is not divisible by scale factor {k}")]
    Indivisible { dim: &'static str, size: usize, k: usize },

    #[error("expected {expected} channels, found {found}")]
    ChannelMismatch { expected: usize, found: usize },

    #[error("shape mismatch: expected {expected:?}, found {found:?}")]
    ShapeMismatch { expected: Vec<usize>, found: Vec<usize> },

    #[error("index {index} out of range (limit {limit})")]
    IndexOutOfRange { index: usize, limit: usize },

    #[error("{num_symbols} symbols do not fit in a {precision}-bit table")]
    TableCapacity { num_symbols: usize, precision: u32 },

    #[error("invalid probability vector: {0}")]
    InvalidPmf(String),

    #[error("invalid model configuration: {0}")]
    InvalidConfig(String),

    #[error("sub-block {subblock} of the data variable may not see latent context when split is {split}")]
    CausalityViolation { subblock: usize, split: usize },

    #[error("ANS stack underflow and no auxiliary source is attached")]
    Underflow,

    #[error("compressed stream is corrupt: {0}")]
    CorruptStream(String),

    #[error("weight file: {0}")]
    WeightFormat(String),

    #[error("bad magic number")]
    BadMagic,

    #[error("unsupported version {0}")]
    BadVersion(u8),

    #[error("container was produced with a different model (hash {expected:#018x}, model {found:#018x})")]
    ModelHashMismatch { expected: u64, found: u64 },

    #[error("payload checksum mismatch (stored {stored:#010x}, computed {computed:#010x})")]
    CrcMismatch { stored: u32, computed: u32 },

    #[error("chained stream must be decoded in reverse order: requested image {requested}, next available is {next}")]
    ChainOrder { requested: usize, next: usize },

    #[error("unsupported image: {0}")]
    UnsupportedImage(String),

    #[error(transparent)]
    Io(#[from] io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
