//! One-way push/pull message delivery between a sensor and a sink.
//!
//! A [`PushEndpoint`] accepts frames into a bounded queue and returns at once;
//! a background writer drains the queue onto the link in order. A
//! [`PullEndpoint`] receives frames from any number of push peers, preserving
//! per-peer order.
//!
//! Two link kinds share the same API and wire accounting:
//!
//! * `tcp`: real stream sockets carrying `[u32 LE len][u8 flags][payload]`.
//! * `inproc`: named in-process channels, for single-process benchmarks.
//!
//! Both are paced by a token bucket at the configured bit rate, so the wire
//! time of every frame is emulated even over loopback.
//!
//! When a push endpoint finishes, the sink answers with a [`DrainReceipt`]
//! once it has dequeued every frame from that peer, optionally followed by
//! one application reply (see [`Replier`]).

mod inproc;
mod pacer;
mod pull;
mod push;
mod tcp;

use std::fmt;
use std::io;
use std::num::NonZeroU64;
use std::str::FromStr;
use std::time::Duration;

use icb_core::frame::{FrameError, DEFAULT_MAX_FRAME_LEN};
use serde::{Deserialize, Serialize};

pub use pull::{Delivery, PullEndpoint, Replier, ShutdownHandle};
pub use push::{Finished, PushEndpoint};

/// The rate of the original sensor-to-sink cable.
pub const DEFAULT_RATE_BITS_PER_S: u64 = 100_000_000;
/// Traffic a link may send ahead of its rate after being idle. Zero: like a
/// real wire, time spent idle is not banked for later frames.
pub const PACING_BURST: Duration = Duration::ZERO;

#[derive(Debug, thiserror::Error)]
pub enum TransportError {
    #[error("invalid link spec: {0}")]
    InvalidSpec(String),
    #[error("address {0} already in use")]
    AddressInUse(String),
    #[error("could not reach {target} after {attempts} attempts")]
    ConnectFailed { target: String, attempts: u32 },
    #[error("send queue stayed full for {0:?}")]
    Backpressure(Duration),
    #[error("endpoint closed")]
    Closed,
    #[error("end of stream")]
    EndOfStream,
    #[error("protocol error from peer {peer}: {source}")]
    Protocol { peer: PeerId, source: FrameError },
    #[error("peer {peer} disconnected mid-frame")]
    Truncated { peer: PeerId },
    #[error("frame rejected: {0}")]
    Frame(#[from] FrameError),
    #[error("link failed: {0}")]
    LinkFailed(String),
    #[error("timed out after {0:?}")]
    Timeout(Duration),
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Identifies one push connection as seen by a pull endpoint.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PeerId(pub u64);

impl fmt::Display for PeerId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Push,
    Pull,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum LinkKind {
    /// TCP to or from `host:port`.
    Tcp { addr: String },
    /// In-process channel registered under `channel`.
    Inproc { channel: String },
}

impl LinkKind {
    pub fn name(&self) -> &'static str {
        match self {
            LinkKind::Tcp { .. } => "tcp",
            LinkKind::Inproc { .. } => "inproc",
        }
    }

    pub fn target(&self) -> &str {
        match self {
            LinkKind::Tcp { addr } => addr,
            LinkKind::Inproc { channel } => channel,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LinkSpec {
    #[serde(flatten)]
    pub kind: LinkKind,
    pub rate_bits_per_s: u64,
    pub send_queue_capacity: usize,
    pub max_frame_len: u32,
    /// How long `send` may block on a full queue.
    #[serde(with = "millis")]
    pub send_timeout: Duration,
    /// Connection attempts before `connect_push` gives up.
    pub connect_attempts: u32,
    #[serde(with = "millis")]
    pub retry_interval: Duration,
    /// How long `finish` waits for the sink's receipt.
    #[serde(with = "millis")]
    pub drain_timeout: Duration,
}

impl LinkSpec {
    pub fn new(kind: LinkKind) -> Self {
        LinkSpec {
            kind,
            rate_bits_per_s: DEFAULT_RATE_BITS_PER_S,
            send_queue_capacity: 64,
            max_frame_len: DEFAULT_MAX_FRAME_LEN,
            send_timeout: Duration::from_secs(10),
            connect_attempts: 50,
            retry_interval: Duration::from_millis(100),
            drain_timeout: Duration::from_secs(60),
        }
    }

    pub fn inproc(channel: impl Into<String>) -> Self {
        LinkSpec::new(LinkKind::Inproc {
            channel: channel.into(),
        })
    }

    pub fn tcp(addr: impl Into<String>) -> Self {
        LinkSpec::new(LinkKind::Tcp { addr: addr.into() })
    }

    pub fn with_rate(mut self, rate_bits_per_s: u64) -> Self {
        self.rate_bits_per_s = rate_bits_per_s;
        self
    }

    pub fn with_capacity(mut self, capacity: usize) -> Self {
        self.send_queue_capacity = capacity;
        self
    }

    pub fn with_kind(mut self, kind: LinkKind) -> Self {
        self.kind = kind;
        self
    }

    pub fn validate(&self) -> Result<(), TransportError> {
        let invalid = |m: &str| Err(TransportError::InvalidSpec(m.to_string()));
        if self.rate_bits_per_s == 0 {
            return invalid("rate must be positive");
        }
        if self.send_queue_capacity == 0 {
            return invalid("send queue capacity must be at least 1");
        }
        if self.max_frame_len == 0 {
            return invalid("max frame length must be positive");
        }
        if self.connect_attempts == 0 {
            return invalid("connect attempts must be at least 1");
        }
        if self.kind.target().is_empty() {
            return invalid("empty address or channel name");
        }
        Ok(())
    }

    pub fn rate(&self) -> Result<NonZeroU64, TransportError> {
        NonZeroU64::new(self.rate_bits_per_s)
            .ok_or_else(|| TransportError::InvalidSpec("rate must be positive".into()))
    }
}

/// Frames and wire bytes moved by an endpoint. Both only grow.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counters {
    pub frames: u64,
    pub bytes: u64,
}

/// The sink's count of what it dequeued from one push peer.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct DrainReceipt {
    pub frames: u64,
    pub bytes: u64,
}

impl DrainReceipt {
    pub(crate) const LEN: usize = 16;

    pub(crate) fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(Self::LEN);
        out.extend_from_slice(&self.frames.to_le_bytes());
        out.extend_from_slice(&self.bytes.to_le_bytes());
        out
    }

    pub(crate) fn decode(raw: &[u8]) -> Option<Self> {
        if raw.len() != Self::LEN {
            return None;
        }
        Some(DrainReceipt {
            frames: u64::from_le_bytes(raw[..8].try_into().ok()?),
            bytes: u64::from_le_bytes(raw[8..].try_into().ok()?),
        })
    }
}

pub fn bind_pull(link: &LinkSpec) -> Result<PullEndpoint, TransportError> {
    link.validate()?;
    PullEndpoint::bind(link)
}

pub fn connect_push(link: &LinkSpec) -> Result<PushEndpoint, TransportError> {
    link.validate()?;
    PushEndpoint::connect(link)
}

/// Parses a bit rate such as `100M`, `2.5G`, `64k` or `9600` (decimal
/// multipliers, bits per second).
pub fn parse_rate(text: &str) -> Result<u64, TransportError> {
    let bad = || TransportError::InvalidSpec(format!("bad rate {text:?}"));
    let t = text.trim();
    let (num, mult) = match t.chars().last().ok_or_else(bad)? {
        'k' | 'K' => (&t[..t.len() - 1], 1e3),
        'm' | 'M' => (&t[..t.len() - 1], 1e6),
        'g' | 'G' => (&t[..t.len() - 1], 1e9),
        _ => (t, 1.0),
    };
    if mult == 1.0 {
        let v: u64 = num.parse().map_err(|_| bad())?;
        return if v == 0 { Err(bad()) } else { Ok(v) };
    }
    let v: f64 = num.parse().map_err(|_| bad())?;
    let bits = (v * mult).round();
    if !(bits.is_finite() && bits >= 1.0 && bits <= u64::MAX as f64) {
        return Err(bad());
    }
    Ok(bits as u64)
}

impl FromStr for LinkKind {
    type Err = TransportError;

    /// `inproc:<channel>` or `tcp:<host:port>`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.split_once(':') {
            Some(("inproc", ch)) => Ok(LinkKind::Inproc { channel: ch.into() }),
            Some(("tcp", addr)) => Ok(LinkKind::Tcp { addr: addr.into() }),
            _ => Err(TransportError::InvalidSpec(format!("bad link {s:?}"))),
        }
    }
}

mod millis {
    use std::time::Duration;

    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(d: &Duration, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_u64(d.as_millis() as u64)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Duration, D::Error> {
        u64::deserialize(d).map(Duration::from_millis)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rate_suffixes() {
        assert_eq!(parse_rate("100M").unwrap(), 100_000_000);
        assert_eq!(parse_rate("2.5G").unwrap(), 2_500_000_000);
        assert_eq!(parse_rate("64k").unwrap(), 64_000);
        assert_eq!(parse_rate("9600").unwrap(), 9600);
        for bad in ["0", "", "M", "-1M", "abc", "0.0001"] {
            assert!(parse_rate(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn spec_validation() {
        assert!(LinkSpec::inproc("a").validate().is_ok());
        assert!(matches!(
            LinkSpec::inproc("a").with_rate(0).validate(),
            Err(TransportError::InvalidSpec(_))
        ));
        assert!(LinkSpec::inproc("a").with_capacity(0).validate().is_err());
        assert!(LinkSpec::inproc("").validate().is_err());
    }

    #[test]
    fn receipt_bytes() {
        let r = DrainReceipt {
            frames: 3,
            bytes: 300,
        };
        assert_eq!(DrainReceipt::decode(&r.encode()), Some(r));
        assert_eq!(DrainReceipt::decode(&[0; 15]), None);
    }

    #[test]
    fn spec_serializes() {
        let spec = LinkSpec::tcp("127.0.0.1:5555");
        let json = serde_json::to_string(&spec).unwrap();
        assert!(json.contains(r#""kind":"tcp""#), "{json}");
        assert_eq!(serde_json::from_str::<LinkSpec>(&json).unwrap(), spec);
    }
}
