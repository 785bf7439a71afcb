//! Error types shared across the crate.

use thiserror::Error;

/// Training failures.
#[derive(Debug, Error)]
pub enum TrainError {
    /// The loss or a gradient stopped being finite; reports the step at
    /// which training had to abort.
    #[error("non-finite loss or gradient at step {step}")]
    NonFinite { step: u32 },
}

/// Bitstream parsing and decoding failures.
#[derive(Debug, Error, PartialEq, Eq)]
pub enum FormatError {
    #[error("bad magic bytes (expected \"SPNR\")")]
    BadMagic,
    #[error("unsupported version {0}")]
    BadVersion(u8),
    #[error("unknown quantization mode {0}")]
    BadQuantMode(u8),
    #[error("unknown model family {0}")]
    BadFamily(u8),
    #[error("invalid header field: {0}")]
    BadHeader(&'static str),
    #[error("stream truncated at byte {offset}")]
    Truncated { offset: usize },
    #[error("trailing bytes after final chunk at offset {offset}")]
    TrailingBytes { offset: usize },
    #[error("CRC mismatch in chunk {chunk_id}")]
    CrcMismatch { chunk_id: u8 },
    #[error("missing chunks: {0:?}")]
    MissingChunks(Vec<u8>),
    #[error("cannot decode: {0}")]
    Undecodable(&'static str),
}

/// Raster file I/O failures.
#[derive(Debug, Error)]
pub enum ImageIoError {
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed header at byte {offset}: {what}")]
    BadHeader { offset: usize, what: &'static str },
    #[error("unsupported maxval {0} (only 255)")]
    UnsupportedMaxval(u32),
    #[error("payload truncated at byte {offset}: expected {expected} samples")]
    TruncatedPayload { offset: usize, expected: usize },
    #[error("unsupported format (want P6 portable pixmap)")]
    UnsupportedFormat,
}
