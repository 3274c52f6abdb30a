//! Allocation-only building blocks for compressing and shipping power-meter
//! telemetry from a sensor node to a sink.
//!
//! Everything here is pure: no clocks, sockets or files. Time enters as plain
//! numbers (see [`pacing`]) so the same code drives a real link emulator in the
//! `icb` crate and deterministic unit tests here.
//!
//! * [`record`]: readings, fixed-size batches and their 16-byte binary layout.
//! * [`synth`]: deterministic REDD-like reading generator.
//! * [`codec`]: Snappy raw-block compressor/decompressor and the [`Codec`] seam.
//! * [`frame`]: `[u32 len][u8 flags][payload]` wire frames.
//! * [`pacing`]: token bucket and transfer-time floor for a rate-limited link.
//! * [`energy`]: transmit-vs-compute energy break-even model.
#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod codec;
pub mod energy;
pub mod frame;
pub mod pacing;
pub mod record;
pub mod synth;
pub mod varint;

pub use codec::{max_compressed_length, Codec, CodecError, CodecStats, Identity, Snappy};
pub use energy::{EnergyError, EnergyEstimate, EnergyParams};
pub use frame::{Frame, FrameError, FrameFlags};
pub use pacing::{throttled_elapsed, TokenBucket};
pub use record::{Batch, Reading, RecordError};
pub use synth::{ApplianceProfile, Synthetic};
