//! Codecs selectable by name, and codec throughput measurement.

use std::time::{Duration, Instant};

use icb_core::{Codec, CodecError, CodecStats, Identity, Snappy};

/// Names accepted by [`by_name`].
pub const NAMES: [&str; 2] = [Snappy::NAME, Identity::NAME];

#[derive(Debug, thiserror::Error)]
#[error("unknown codec {0:?} (known: snappy, identity)")]
pub struct UnknownCodec(pub String);

pub fn by_name(name: &str) -> Result<Box<dyn Codec + Send>, UnknownCodec> {
    match name {
        Snappy::NAME => Ok(Box::new(Snappy::new())),
        Identity::NAME => Ok(Box::new(Identity)),
        other => Err(UnknownCodec(other.to_string())),
    }
}

/// Compresses every block once per repetition and keeps the fastest
/// repetition. Sizes are those of one pass.
pub fn codec_throughput(
    codec: &mut dyn Codec,
    blocks: &[&[u8]],
    repetitions: usize,
) -> Result<CodecStats, CodecError> {
    assert!(repetitions >= 1, "repetitions must be at least 1");
    let input_bytes = blocks.iter().map(|b| b.len()).sum();
    let mut output_bytes = 0;
    let mut best = Duration::MAX;
    for _ in 0..repetitions {
        let mut out = 0;
        let start = Instant::now();
        for block in blocks {
            out += std::hint::black_box(codec.compress(block)?).len();
        }
        best = best.min(start.elapsed());
        output_bytes = out;
    }
    Ok(CodecStats {
        input_bytes,
        output_bytes,
        elapsed: best,
    })
}
