//! Lossless block codecs.
//!
//! [`Snappy`] produces and consumes the public Snappy *raw block* format: a
//! varint preamble with the uncompressed length followed by literal and copy
//! elements. There is no stream container and no checksum; framing belongs to
//! the transport.
//!
//! Any type implementing [`Codec`] can be plugged into the bench harness.

mod decode;
mod encode;

use alloc::vec::Vec;
use core::time::Duration;

pub use decode::{decompress, decompress_into, decompressed_len};
pub use encode::compress;

/// Largest input the format preamble can describe.
pub const MAX_INPUT_LEN: usize = u32::MAX as usize;

/// Upper bound on the size of a compressed block for an `n`-byte input.
///
/// Covers the worst case of all-literal output, including tag bytes and the
/// preamble.
pub const fn max_compressed_length(n: usize) -> usize {
    32 + n + n / 6
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CodecError {
    #[error("input of {len} bytes exceeds the {max}-byte block limit", max = MAX_INPUT_LEN)]
    InputTooLarge { len: usize },
    #[error("corrupt block: length preamble is not a valid 32-bit varint")]
    BadPreamble,
    #[error("corrupt block: stream truncated at byte {at}")]
    Truncated { at: usize },
    #[error("corrupt block: copy offset {offset} out of range with {produced} bytes produced")]
    OffsetOutOfRange { offset: usize, produced: usize },
    #[error("corrupt block: element at byte {at} writes past the declared length {declared}")]
    Overrun { at: usize, declared: usize },
    #[error("corrupt block: declared {declared} bytes but stream produced {produced}")]
    LengthMismatch { declared: usize, produced: usize },
    #[error("output buffer of {have} bytes cannot hold {need} decompressed bytes")]
    BufferTooSmall { need: usize, have: usize },
}

impl CodecError {
    /// True for errors caused by a malformed compressed block.
    pub fn is_corruption(&self) -> bool {
        !matches!(
            self,
            CodecError::InputTooLarge { .. } | CodecError::BufferTooSmall { .. }
        )
    }
}

/// A pluggable lossless codec.
///
/// Implementations may keep scratch state between calls, hence `&mut self`;
/// share one instance per caller.
pub trait Codec {
    fn name(&self) -> &str;

    fn compress(&mut self, input: &[u8]) -> Result<Vec<u8>, CodecError>;

    fn decompress(&mut self, input: &[u8]) -> Result<Vec<u8>, CodecError>;
}

/// Snappy raw-block codec with a reusable match table.
#[derive(Debug, Clone)]
pub struct Snappy {
    table: Vec<u16>,
}

impl Snappy {
    pub const NAME: &'static str = "snappy";

    pub fn new() -> Self {
        Snappy {
            table: alloc::vec![0; encode::TABLE_SIZE],
        }
    }

    /// Appends the compressed form of `input` to `out`.
    pub fn compress_into(&mut self, input: &[u8], out: &mut Vec<u8>) -> Result<(), CodecError> {
        encode::compress_with_table(input, out, &mut self.table)
    }
}

impl Default for Snappy {
    fn default() -> Self {
        Self::new()
    }
}

impl Codec for Snappy {
    fn name(&self) -> &str {
        Self::NAME
    }

    fn compress(&mut self, input: &[u8]) -> Result<Vec<u8>, CodecError> {
        let mut out = Vec::with_capacity(max_compressed_length(input.len()));
        self.compress_into(input, &mut out)?;
        Ok(out)
    }

    fn decompress(&mut self, input: &[u8]) -> Result<Vec<u8>, CodecError> {
        decompress(input)
    }
}

/// Pass-through codec; the baseline for codec comparisons.
#[derive(Debug, Clone, Copy, Default)]
pub struct Identity;

impl Identity {
    pub const NAME: &'static str = "identity";
}

impl Codec for Identity {
    fn name(&self) -> &str {
        Self::NAME
    }

    fn compress(&mut self, input: &[u8]) -> Result<Vec<u8>, CodecError> {
        if input.len() > MAX_INPUT_LEN {
            return Err(CodecError::InputTooLarge { len: input.len() });
        }
        Ok(input.to_vec())
    }

    fn decompress(&mut self, input: &[u8]) -> Result<Vec<u8>, CodecError> {
        Ok(input.to_vec())
    }
}

/// Size and timing of one codec measurement.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CodecStats {
    pub input_bytes: usize,
    pub output_bytes: usize,
    pub elapsed: Duration,
}

impl CodecStats {
    /// `input_bytes / output_bytes`, or `None` for an empty input where the
    /// ratio is undefined.
    pub fn ratio(&self) -> Option<f64> {
        if self.input_bytes == 0 || self.output_bytes == 0 {
            None
        } else {
            Some(self.input_bytes as f64 / self.output_bytes as f64)
        }
    }

    /// Ratio for reporting: 0 when undefined (check [`CodecStats::ratio`]).
    pub fn reported_ratio(&self) -> f64 {
        self.ratio().unwrap_or(0.0)
    }

    /// Input consumed per second, in bits.
    pub fn bits_per_second(&self) -> f64 {
        let secs = self.elapsed.as_secs_f64();
        if secs == 0.0 {
            f64::INFINITY
        } else {
            self.input_bytes as f64 * 8.0 / secs
        }
    }
}
