use std::sync::{Arc, Condvar, Mutex};
use std::thread::{self, JoinHandle};
use std::time::{Duration, Instant};

use crossbeam_channel::{bounded, SendTimeoutError, Sender};
use icb_core::Frame;

use super::pacer::Pacer;
use super::{inproc, tcp, Counters, DrainReceipt, LinkKind, LinkSpec, Role, TransportError};

/// A connected link as driven by the push-side writer thread.
pub(crate) trait Wire: Send {
    fn write_frame(&mut self, frame: &Frame) -> Result<(), TransportError>;

    /// Re-establishes the link after a write failure.
    fn reconnect(&mut self) -> Result<(), TransportError>;

    /// Signals end of stream and waits for the sink's receipt.
    fn finish(self: Box<Self>, timeout: Duration) -> Result<(DrainReceipt, ReplySource), TransportError>;
}

/// Where the optional post-receipt reply arrives from.
pub(crate) enum ReplySource {
    Inproc(crossbeam_channel::Receiver<Vec<u8>>),
    Tcp(tcp::ReplyReader),
}

#[derive(Debug, Default)]
struct Progress {
    enqueued: u64,
    written: Counters,
    dropped: u64,
    failure: Option<String>,
}

#[derive(Debug, Default)]
struct Shared {
    state: Mutex<Progress>,
    changed: Condvar,
}

/// Sensor side of a link. Only sends.
pub struct PushEndpoint {
    spec: LinkSpec,
    queue: Option<Sender<Frame>>,
    writer: Option<JoinHandle<Box<dyn Wire>>>,
    shared: Arc<Shared>,
}

impl PushEndpoint {
    pub(crate) fn connect(spec: &LinkSpec) -> Result<Self, TransportError> {
        let rate = spec.rate()?;
        let wire: Box<dyn Wire> = match &spec.kind {
            LinkKind::Inproc { .. } => Box::new(inproc::InprocWire::connect(spec)?),
            LinkKind::Tcp { .. } => Box::new(tcp::TcpWire::connect(spec, Arc::new(Pacer::new(rate)))?),
        };
        let (tx, rx) = bounded::<Frame>(spec.send_queue_capacity);
        let shared = Arc::new(Shared::default());
        let writer_shared = Arc::clone(&shared);
        let writer = thread::Builder::new()
            .name("icb-push-writer".into())
            .spawn(move || {
                let mut wire = wire;
                for frame in rx {
                    let result = wire.write_frame(&frame);
                    let mut st = writer_shared.state.lock().expect("progress lock");
                    match result {
                        Ok(()) => {
                            st.written.frames += 1;
                            st.written.bytes += frame.wire_len() as u64;
                        }
                        Err(e) => {
                            // At-most-once: the frame in flight is lost, the
                            // link is re-established for the frames after it.
                            st.dropped += 1;
                            drop(st);
                            let reconnected = wire.reconnect();
                            st = writer_shared.state.lock().expect("progress lock");
                            if let Err(re) = reconnected {
                                st.failure = Some(format!("{e}; reconnect failed: {re}"));
                                writer_shared.changed.notify_all();
                                break;
                            }
                        }
                    }
                    writer_shared.changed.notify_all();
                }
                wire
            })?;
        Ok(PushEndpoint {
            spec: spec.clone(),
            queue: Some(tx),
            writer: Some(writer),
            shared,
        })
    }

    pub fn role(&self) -> Role {
        Role::Push
    }

    pub fn spec(&self) -> &LinkSpec {
        &self.spec
    }

    /// Queues `frame` for delivery and returns once it is accepted, not once
    /// it is delivered. Blocks while the queue is full, up to the link's
    /// send timeout.
    pub fn send(&mut self, frame: Frame) -> Result<(), TransportError> {
        frame.check(self.spec.max_frame_len)?;
        self.check_failure()?;
        let queue = self.queue.as_ref().ok_or(TransportError::Closed)?;
        match queue.send_timeout(frame, self.spec.send_timeout) {
            Ok(()) => {
                self.shared.state.lock().expect("progress lock").enqueued += 1;
                Ok(())
            }
            Err(SendTimeoutError::Timeout(_)) => Err(TransportError::Backpressure(self.spec.send_timeout)),
            Err(SendTimeoutError::Disconnected(_)) => {
                self.check_failure()?;
                Err(TransportError::Closed)
            }
        }
    }

    /// Blocks until every queued frame has been handed to the link.
    pub fn flush(&self) -> Result<(), TransportError> {
        let mut st = self.shared.state.lock().expect("progress lock");
        loop {
            if let Some(f) = &st.failure {
                return Err(TransportError::LinkFailed(f.clone()));
            }
            if st.written.frames + st.dropped >= st.enqueued {
                return Ok(());
            }
            st = self.shared.changed.wait(st).expect("progress lock");
        }
    }

    /// Frames and wire bytes written to the link so far.
    pub fn counters(&self) -> Counters {
        self.shared.state.lock().expect("progress lock").written
    }

    /// Frames lost to link failures (at-most-once delivery).
    pub fn dropped(&self) -> u64 {
        self.shared.state.lock().expect("progress lock").dropped
    }

    fn check_failure(&self) -> Result<(), TransportError> {
        match &self.shared.state.lock().expect("progress lock").failure {
            Some(f) => Err(TransportError::LinkFailed(f.clone())),
            None => Ok(()),
        }
    }

    fn stop_writer(&mut self) -> Option<Box<dyn Wire>> {
        self.queue.take();
        self.writer.take().and_then(|h| h.join().ok())
    }

    /// Drains the queue, closes the stream and waits until the sink has
    /// dequeued everything this endpoint sent.
    pub fn finish(mut self) -> Result<Finished, TransportError> {
        let wire = self.stop_writer().ok_or(TransportError::Closed)?;
        self.check_failure()?;
        let (receipt, reply) = wire.finish(self.spec.drain_timeout)?;
        let drained_at = Instant::now();
        Ok(Finished {
            receipt,
            drained_at,
            sent: self.counters(),
            reply,
            timeout: self.spec.drain_timeout,
        })
    }
}

impl Drop for PushEndpoint {
    fn drop(&mut self) {
        self.stop_writer();
    }
}

/// Outcome of [`PushEndpoint::finish`].
pub struct Finished {
    /// What the sink counted from this peer.
    pub receipt: DrainReceipt,
    /// When the receipt arrived.
    pub drained_at: Instant,
    /// What this endpoint wrote.
    pub sent: Counters,
    reply: ReplySource,
    timeout: Duration,
}

impl Finished {
    /// Waits for the sink's optional follow-up message.
    pub fn reply(self) -> Result<Option<Vec<u8>>, TransportError> {
        match self.reply {
            ReplySource::Inproc(rx) => match rx.recv_timeout(self.timeout) {
                Ok(msg) => Ok(Some(msg)),
                Err(crossbeam_channel::RecvTimeoutError::Disconnected) => Ok(None),
                Err(crossbeam_channel::RecvTimeoutError::Timeout) => {
                    Err(TransportError::Timeout(self.timeout))
                }
            },
            ReplySource::Tcp(mut r) => r.read_reply(self.timeout),
        }
    }
}
