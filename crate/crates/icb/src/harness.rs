//! The three timing modes, run over a sweep of batch sizes.
//!
//! The dataset volume is fixed: the batch size only changes how many frames
//! carry it. A partial final batch is sent as a shorter frame.
//!
//! By default the sensor side is one sequential pipeline: each frame is
//! serialized, compressed and handed to the link before work on the next one
//! begins. The pipelined option lets the link's writer carry frame `k` while
//! frame `k + 1` is being compressed.
//!
//! Every window closes when the sink acknowledges that it has dequeued the
//! last frame. The sink then validates the stream; that happens after the
//! window has closed.

use std::fmt;
use std::str::FromStr;
use std::sync::atomic::{AtomicU64, Ordering};
use std::thread::{self, JoinHandle};
use std::time::{Duration, Instant};

use crossbeam_channel::{Receiver, RecvTimeoutError};
use icb_core::record::serialize_into;
use icb_core::{Codec, CodecError, Frame, Reading};
use serde::{Deserialize, Serialize};

use crate::codecs::{self, UnknownCodec};
use crate::sink::{self, sha256, SinkEvent, Verdict, VerdictStatus};
use crate::transport::{bind_pull, connect_push, LinkKind, LinkSpec, ShutdownHandle, TransportError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// Serialize, compress and send each batch inside the window.
    CompressAndTransmit,
    /// Batches are compressed beforehand; only sending is timed.
    #[serde(rename = "precompressed_transmit")]
    PreCompressedTransmit,
    /// Raw batches are sent uncompressed.
    RawTransmit,
}

impl Mode {
    pub const ALL: [Mode; 3] = [Mode::CompressAndTransmit, Mode::PreCompressedTransmit, Mode::RawTransmit];

    pub fn as_str(self) -> &'static str {
        match self {
            Mode::CompressAndTransmit => "compress_and_transmit",
            Mode::PreCompressedTransmit => "precompressed_transmit",
            Mode::RawTransmit => "raw_transmit",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Mode {
    type Err = HarnessError;

    /// Full names or the short forms `compress`, `pre` and `raw`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "compress_and_transmit" | "compress" | "cat" => Ok(Mode::CompressAndTransmit),
            "precompressed_transmit" | "precompressed" | "pre" => Ok(Mode::PreCompressedTransmit),
            "raw_transmit" | "raw" => Ok(Mode::RawTransmit),
            _ => Err(HarnessError::Invalid(format!(
                "unknown mode {s:?} (use compress, pre or raw)"
            ))),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("{0}")]
    Invalid(String),
    #[error(transparent)]
    UnknownCodec(#[from] UnknownCodec),
    #[error("{mode} at batch size {batch_size}: {source}")]
    Transport {
        mode: Mode,
        batch_size: usize,
        source: TransportError,
    },
    #[error("sink setup: {0}")]
    Sink(TransportError),
    #[error("{mode} at batch size {batch_size}: compression failed: {source}")]
    Codec {
        mode: Mode,
        batch_size: usize,
        source: CodecError,
    },
    #[error("{mode} at batch size {batch_size}: integrity failure: {detail}")]
    Integrity {
        mode: Mode,
        batch_size: usize,
        detail: String,
    },
}

/// One timed run of one mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TimingSample {
    pub mode: Mode,
    pub batch_size: usize,
    /// Frames sent.
    pub batches: u64,
    #[serde(with = "secs")]
    pub elapsed: Duration,
    /// Serialized reading bytes (16 per reading).
    pub raw_bytes: u64,
    /// Bytes on the wire, frame headers included.
    pub wire_bytes: u64,
    /// Frame payload bytes.
    pub payload_bytes: u64,
}

impl TimingSample {
    /// Raw bytes per payload byte.
    pub fn compression_ratio(&self) -> f64 {
        self.raw_bytes as f64 / self.payload_bytes as f64
    }
}

/// One (mode, batch size) cell of a sweep: the median of its repetitions.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SweepRow {
    pub mode: Mode,
    pub batch_size: usize,
    pub repetitions: usize,
    pub batches: u64,
    #[serde(with = "secs")]
    pub elapsed: Duration,
    #[serde(with = "secs")]
    pub elapsed_min: Duration,
    #[serde(with = "secs")]
    pub elapsed_max: Duration,
    pub raw_bytes: u64,
    pub wire_bytes: u64,
    pub payload_bytes: u64,
}

impl SweepRow {
    pub fn compression_ratio(&self) -> f64 {
        self.raw_bytes as f64 / self.payload_bytes as f64
    }
}

/// What a sweep ran on.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Environment {
    pub link_kind: String,
    pub rate_bits_per_s: u64,
    pub batch_sizes: Vec<usize>,
    pub modes: Vec<Mode>,
    pub repetitions: usize,
    pub codec: String,
    pub pipelined: bool,
    pub tuples: usize,
    pub os: String,
    pub arch: String,
    pub cpus: usize,
    pub version: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SweepReport {
    pub rows: Vec<SweepRow>,
    pub environment: Environment,
}

impl SweepReport {
    pub fn row(&self, mode: Mode, batch_size: usize) -> Option<&SweepRow> {
        self.rows.iter().find(|r| r.mode == mode && r.batch_size == batch_size)
    }
}

/// Parameters of a sweep.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SweepPlan {
    pub batch_sizes: Vec<usize>,
    pub modes: Vec<Mode>,
    pub repetitions: usize,
    /// Runs every mode once, untimed, before the sweep.
    pub warmup: bool,
}

impl SweepPlan {
    pub fn new(batch_sizes: Vec<usize>, repetitions: usize) -> Self {
        SweepPlan {
            batch_sizes,
            modes: Mode::ALL.to_vec(),
            repetitions,
            warmup: true,
        }
    }
}

/// Batch sizes used when none are given.
pub const DEFAULT_BATCH_SIZES: [usize; 4] = [1000, 200, 100, 20];

static NEXT_CHANNEL: AtomicU64 = AtomicU64::new(0);

struct LocalSink {
    events: Receiver<SinkEvent>,
    shutdown: ShutdownHandle,
    thread: Option<JoinHandle<Result<(), TransportError>>>,
}

impl Drop for LocalSink {
    fn drop(&mut self) {
        self.shutdown.shutdown();
        if let Some(t) = self.thread.take() {
            let _ = t.join();
        }
    }
}

/// Drives the sensor side against an in-process or remote sink.
pub struct Harness {
    /// Spec the push side connects with.
    link: LinkSpec,
    local: Option<LocalSink>,
    codec: Box<dyn Codec + Send>,
    pipelined: bool,
}

impl Harness {
    /// Starts a sink in this process on `link` and sends to it.
    ///
    /// An in-process link gets a fresh channel name; a TCP address with
    /// port 0 is resolved to the port actually bound.
    pub fn local(link: &LinkSpec, codec: &str) -> Result<Self, HarnessError> {
        let mut bind_spec = link.clone();
        if let LinkKind::Inproc { channel } = &link.kind {
            let n = NEXT_CHANNEL.fetch_add(1, Ordering::Relaxed);
            bind_spec.kind = LinkKind::Inproc {
                channel: format!("{channel}-{}-{n}", std::process::id()),
            };
        }
        let mut pull = bind_pull(&bind_spec).map_err(HarnessError::Sink)?;
        let mut connect = bind_spec;
        if let Some(addr) = pull.local_addr() {
            connect.kind = LinkKind::Tcp { addr: addr.to_string() };
        }
        let mut sink_codec = codecs::by_name(codec)?;
        let shutdown = pull.shutdown_handle();
        let (tx, events) = crossbeam_channel::unbounded();
        let thread = thread::Builder::new()
            .name("icb-local-sink".into())
            .spawn(move || {
                sink::run(&mut pull, sink_codec.as_mut(), true, |ev| {
                    let _ = tx.send(ev);
                })
            })
            .map_err(|e| HarnessError::Sink(e.into()))?;
        Ok(Harness {
            link: connect,
            local: Some(LocalSink {
                events,
                shutdown,
                thread: Some(thread),
            }),
            codec: codecs::by_name(codec)?,
            pipelined: false,
        })
    }

    /// Sends to a sink already serving on `link` (see `icb serve`).
    pub fn remote(link: LinkSpec, codec: &str) -> Result<Self, HarnessError> {
        link.validate().map_err(HarnessError::Sink)?;
        Ok(Harness {
            link,
            local: None,
            codec: codecs::by_name(codec)?,
            pipelined: false,
        })
    }

    pub fn with_pipelined(mut self, pipelined: bool) -> Self {
        self.pipelined = pipelined;
        self
    }

    pub fn link(&self) -> &LinkSpec {
        &self.link
    }

    pub fn codec_name(&self) -> &str {
        self.codec.name()
    }

    /// Times one mode over all of `readings` and validates what the sink
    /// reconstructed.
    pub fn run_mode(
        &mut self,
        mode: Mode,
        readings: &[Reading],
        batch_size: usize,
    ) -> Result<TimingSample, HarnessError> {
        if batch_size == 0 {
            return Err(HarnessError::Invalid("batch size must be at least 1".into()));
        }
        if readings.len() < batch_size {
            return Err(HarnessError::Invalid(format!(
                "batch size {batch_size} needs at least that many readings, dataset has {}",
                readings.len()
            )));
        }
        let transport = |source| HarnessError::Transport {
            mode,
            batch_size,
            source,
        };
        let codec_err = |source| HarnessError::Codec {
            mode,
            batch_size,
            source,
        };

        // Everything not in the timed work of `mode` is prepared up front.
        let prepared: Vec<Frame> = match mode {
            Mode::CompressAndTransmit => Vec::new(),
            Mode::PreCompressedTransmit => {
                let mut buf = Vec::new();
                let mut frames = Vec::with_capacity(readings.len().div_ceil(batch_size));
                for chunk in readings.chunks(batch_size) {
                    buf.clear();
                    serialize_into(chunk, &mut buf);
                    frames.push(Frame::compressed(self.codec.compress(&buf).map_err(codec_err)?));
                }
                frames
            }
            Mode::RawTransmit => readings
                .chunks(batch_size)
                .map(|chunk| {
                    let mut buf = Vec::with_capacity(chunk.len() * 16);
                    serialize_into(chunk, &mut buf);
                    Frame::raw(buf)
                })
                .collect(),
        };
        let mut push = connect_push(&self.link).map_err(transport)?;
        let per_frame_flush = !self.pipelined;
        let mut payload_bytes = 0u64;
        let mut batches = 0u64;

        let start = Instant::now();
        let mut send = |frame: Frame| -> Result<(), HarnessError> {
            payload_bytes += frame.payload.len() as u64;
            batches += 1;
            push.send(frame).map_err(transport)?;
            if per_frame_flush {
                push.flush().map_err(transport)?;
            }
            Ok(())
        };
        if mode == Mode::CompressAndTransmit {
            let mut buf = Vec::new();
            for chunk in readings.chunks(batch_size) {
                buf.clear();
                serialize_into(chunk, &mut buf);
                send(Frame::compressed(self.codec.compress(&buf).map_err(codec_err)?))?;
            }
        } else {
            for frame in prepared {
                send(frame)?;
            }
        }
        let finished = push.finish().map_err(transport)?;
        let elapsed = finished.drained_at - start;

        // Validation, outside the window.
        let integrity = |detail: String| HarnessError::Integrity {
            mode,
            batch_size,
            detail,
        };
        if finished.receipt.frames != finished.sent.frames || finished.receipt.bytes != finished.sent.bytes {
            return Err(integrity(format!(
                "sink received {} frames / {} bytes, sensor wrote {} / {}",
                finished.receipt.frames, finished.receipt.bytes, finished.sent.frames, finished.sent.bytes
            )));
        }
        if finished.sent.frames != batches {
            return Err(integrity(format!("{} of {batches} frames lost on the link", batches - finished.sent.frames)));
        }
        let wire_bytes = finished.sent.bytes;
        let mut raw = Vec::with_capacity(readings.len() * 16);
        serialize_into(readings, &mut raw);
        let expected = sha256(&raw);
        let raw_bytes = raw.len() as u64;
        drop(raw);

        let reply = finished.reply().map_err(transport)?;
        let verdict = reply
            .as_deref()
            .and_then(Verdict::decode)
            .ok_or_else(|| integrity("sink sent no verdict".into()))?;
        check_verdict(&verdict, raw_bytes, &expected).map_err(integrity)?;
        if let Some(local) = &self.local {
            let timeout = self.link.drain_timeout;
            match local.events.recv_timeout(timeout) {
                Ok(SinkEvent::Session { readings: Some(got), .. }) => {
                    if got.as_slice() != readings {
                        let at = got.iter().zip(readings).position(|(a, b)| a != b);
                        return Err(integrity(format!(
                            "reconstructed {} readings, source has {}; first difference at {:?}",
                            got.len(),
                            readings.len(),
                            at
                        )));
                    }
                }
                Ok(SinkEvent::Session { readings: None, .. }) => {
                    return Err(integrity("local sink kept no readings".into()))
                }
                Ok(SinkEvent::PeerFailed { error, .. }) => return Err(integrity(error)),
                Err(RecvTimeoutError::Timeout) => return Err(transport(TransportError::Timeout(timeout))),
                Err(RecvTimeoutError::Disconnected) => return Err(transport(TransportError::Closed)),
            }
        }

        Ok(TimingSample {
            mode,
            batch_size,
            batches,
            elapsed,
            raw_bytes,
            wire_bytes,
            payload_bytes,
        })
    }

    /// Runs every (mode, batch size) cell `repetitions` times and reports the
    /// median of each. Rows are ordered by batch size, largest first, then by
    /// mode.
    pub fn sweep(&mut self, readings: &[Reading], plan: &SweepPlan) -> Result<SweepReport, HarnessError> {
        if plan.batch_sizes.is_empty() {
            return Err(HarnessError::Invalid("no batch sizes".into()));
        }
        if plan.modes.is_empty() {
            return Err(HarnessError::Invalid("no modes".into()));
        }
        if plan.repetitions == 0 {
            return Err(HarnessError::Invalid("repetitions must be at least 1".into()));
        }
        let mut sizes = plan.batch_sizes.clone();
        sizes.sort_unstable_by(|a, b| b.cmp(a));
        sizes.dedup();
        let mut modes = plan.modes.clone();
        modes.sort_unstable();
        modes.dedup();
        if let Some(&largest) = sizes.first() {
            if largest == 0 || readings.len() < largest {
                // Surfaces the same message run_mode would give.
                self.run_mode(modes[0], readings, largest)?;
            }
        }

        if plan.warmup {
            for &mode in &modes {
                self.run_mode(mode, readings, sizes[0])?;
            }
        }

        let mut rows = Vec::with_capacity(sizes.len() * modes.len());
        for &size in &sizes {
            let mut samples: Vec<Vec<TimingSample>> = vec![Vec::with_capacity(plan.repetitions); modes.len()];
            // Modes are interleaved within each repetition so slow drift in
            // the machine's state affects them alike.
            for _ in 0..plan.repetitions {
                for (i, &mode) in modes.iter().enumerate() {
                    samples[i].push(self.run_mode(mode, readings, size)?);
                }
            }
            for (mode, runs) in modes.iter().zip(samples) {
                rows.push(aggregate(*mode, size, &runs)?);
            }
        }

        Ok(SweepReport {
            rows,
            environment: Environment {
                link_kind: self.link.kind.name().to_string(),
                rate_bits_per_s: self.link.rate_bits_per_s,
                batch_sizes: sizes,
                modes,
                repetitions: plan.repetitions,
                codec: self.codec.name().to_string(),
                pipelined: self.pipelined,
                tuples: readings.len(),
                os: std::env::consts::OS.to_string(),
                arch: std::env::consts::ARCH.to_string(),
                cpus: thread::available_parallelism().map_or(1, |n| n.get()),
                version: env!("CARGO_PKG_VERSION").to_string(),
            },
        })
    }
}

fn check_verdict(verdict: &Verdict, raw_bytes: u64, expected: &[u8; 32]) -> Result<(), String> {
    if verdict.status != VerdictStatus::Ok {
        return Err(format!("sink rejected the stream ({:?}): {}", verdict.status, verdict.detail));
    }
    if verdict.raw_len != raw_bytes {
        return Err(format!("sink rebuilt {} raw bytes, source has {raw_bytes}", verdict.raw_len));
    }
    if &verdict.digest != expected {
        return Err("SHA-256 of the reconstructed readings differs from the source".into());
    }
    Ok(())
}

/// Median elapsed over `runs`, with min and max. Byte counts must agree
/// across runs: only timing may vary.
fn aggregate(mode: Mode, batch_size: usize, runs: &[TimingSample]) -> Result<SweepRow, HarnessError> {
    let first = runs[0];
    if let Some(odd) = runs.iter().find(|r| {
        (r.batches, r.raw_bytes, r.wire_bytes, r.payload_bytes)
            != (first.batches, first.raw_bytes, first.wire_bytes, first.payload_bytes)
    }) {
        return Err(HarnessError::Integrity {
            mode,
            batch_size,
            detail: format!("byte counts differ between repetitions: {first:?} vs {odd:?}"),
        });
    }
    let mut times: Vec<Duration> = runs.iter().map(|r| r.elapsed).collect();
    times.sort_unstable();
    Ok(SweepRow {
        mode,
        batch_size,
        repetitions: runs.len(),
        batches: first.batches,
        elapsed: median(&times),
        elapsed_min: times[0],
        elapsed_max: times[times.len() - 1],
        raw_bytes: first.raw_bytes,
        wire_bytes: first.wire_bytes,
        payload_bytes: first.payload_bytes,
    })
}

/// Median of sorted, non-empty `times`; the mean of the middle pair for an
/// even count.
pub fn median(times: &[Duration]) -> Duration {
    let n = times.len();
    if n % 2 == 1 {
        times[n / 2]
    } else {
        (times[n / 2 - 1] + times[n / 2]) / 2
    }
}

mod secs {
    use std::time::Duration;

    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(d: &Duration, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_f64(d.as_secs_f64())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Duration, D::Error> {
        let v = f64::deserialize(d)?;
        Duration::try_from_secs_f64(v).map_err(serde::de::Error::custom)
    }
}
