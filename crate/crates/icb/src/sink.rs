//! The validating sink.
//!
//! Frames are only stored while a peer is streaming, so the sink's drain
//! receipt is not delayed by validation. Once the peer has finished, the sink
//! decodes every frame, rebuilds the reading sequence and answers with a
//! [`Verdict`]: the length and SHA-256 of the reconstructed raw bytes.

use std::collections::HashMap;

use icb_core::record::deserialize_all;
use icb_core::{Codec, Frame, Reading};
use sha2::{Digest, Sha256};

use crate::transport::{Delivery, DrainReceipt, PeerId, PullEndpoint, TransportError};

pub type Sha256Digest = [u8; 32];

pub fn sha256(bytes: &[u8]) -> Sha256Digest {
    Sha256::digest(bytes).into()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum VerdictStatus {
    Ok = 0,
    /// A compressed payload failed to decode.
    Corrupt = 1,
    /// Decoded bytes are not a whole number of valid readings.
    BadRecords = 2,
}

/// The sink's account of one finished peer.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Verdict {
    pub status: VerdictStatus,
    /// Reconstructed raw bytes (readings × 16).
    pub raw_len: u64,
    pub digest: Sha256Digest,
    /// Cause when `status` is not `Ok`.
    pub detail: String,
}

impl Verdict {
    const FIXED_LEN: usize = 1 + 8 + 32;

    /// `[u8 status][u64 LE raw_len][32-byte SHA-256][UTF-8 detail]`.
    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(Self::FIXED_LEN + self.detail.len());
        out.push(self.status as u8);
        out.extend_from_slice(&self.raw_len.to_le_bytes());
        out.extend_from_slice(&self.digest);
        out.extend_from_slice(self.detail.as_bytes());
        out
    }

    pub fn decode(raw: &[u8]) -> Option<Self> {
        if raw.len() < Self::FIXED_LEN {
            return None;
        }
        let status = match raw[0] {
            0 => VerdictStatus::Ok,
            1 => VerdictStatus::Corrupt,
            2 => VerdictStatus::BadRecords,
            _ => return None,
        };
        Some(Verdict {
            status,
            raw_len: u64::from_le_bytes(raw[1..9].try_into().ok()?),
            digest: raw[9..41].try_into().ok()?,
            detail: String::from_utf8_lossy(&raw[41..]).into_owned(),
        })
    }
}

/// Decodes `frames` in order into raw batch bytes and readings.
pub fn reconstruct(frames: &[Frame], codec: &mut dyn Codec) -> (Verdict, Vec<Reading>) {
    let mut raw = Vec::new();
    for (i, frame) in frames.iter().enumerate() {
        if frame.flags.is_compressed() {
            match codec.decompress(&frame.payload) {
                Ok(block) => raw.extend_from_slice(&block),
                Err(e) => return (verdict_for(VerdictStatus::Corrupt, &raw, format!("frame {i}: {e}")), Vec::new()),
            }
        } else {
            raw.extend_from_slice(&frame.payload);
        }
    }
    match deserialize_all(&raw) {
        Ok(readings) => (verdict_for(VerdictStatus::Ok, &raw, String::new()), readings),
        Err(e) => (verdict_for(VerdictStatus::BadRecords, &raw, e.to_string()), Vec::new()),
    }
}

fn verdict_for(status: VerdictStatus, raw: &[u8], detail: String) -> Verdict {
    Verdict {
        status,
        raw_len: raw.len() as u64,
        digest: sha256(raw),
        detail,
    }
}

/// What the sink observed for one peer.
#[derive(Debug)]
pub enum SinkEvent {
    Session {
        peer: PeerId,
        receipt: DrainReceipt,
        verdict: Verdict,
        /// The reconstructed readings, when the sink keeps them.
        readings: Option<Vec<Reading>>,
    },
    PeerFailed {
        peer: PeerId,
        error: String,
    },
}

/// Serves peers until the endpoint reports end of stream.
///
/// Each finished peer gets its verdict as the follow-up reply, then `report`
/// is called. With `keep_readings`, sessions carry the reconstructed readings.
pub fn run(
    pull: &mut PullEndpoint,
    codec: &mut dyn Codec,
    keep_readings: bool,
    mut report: impl FnMut(SinkEvent),
) -> Result<(), TransportError> {
    let mut streams: HashMap<PeerId, Vec<Frame>> = HashMap::new();
    loop {
        match pull.recv_event() {
            Ok(Delivery::Frame { peer, frame }) => streams.entry(peer).or_default().push(frame),
            Ok(Delivery::PeerClosed { peer, receipt, replier }) => {
                let frames = streams.remove(&peer).unwrap_or_default();
                let (verdict, readings) = reconstruct(&frames, codec);
                drop(frames);
                // A peer that left without waiting for its verdict is fine.
                let _ = replier.reply(verdict.encode());
                report(SinkEvent::Session {
                    peer,
                    receipt,
                    verdict,
                    readings: keep_readings.then_some(readings),
                });
            }
            Ok(Delivery::PeerError { peer, error }) => {
                streams.remove(&peer);
                report(SinkEvent::PeerFailed {
                    peer,
                    error: error.to_string(),
                });
            }
            Err(TransportError::EndOfStream) => return Ok(()),
            Err(e) => return Err(e),
        }
    }
}
