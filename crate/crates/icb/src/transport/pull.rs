use std::collections::HashMap;
use std::io::Write;
use std::net::{Shutdown, SocketAddr, TcpStream};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::time::Duration;

use crossbeam_channel::{Receiver, RecvTimeoutError, Sender};
use icb_core::Frame;

use super::{inproc, tcp, Counters, DrainReceipt, LinkKind, LinkSpec, PeerId, Role, TransportError};

/// What link backends hand to the pull endpoint, in arrival order.
pub(crate) enum Event {
    Frame { peer: PeerId, frame: Frame },
    Closed { peer: PeerId, replier: Replier },
    Error { peer: PeerId, error: TransportError },
}

/// One item dequeued from a [`PullEndpoint`].
pub enum Delivery {
    Frame {
        peer: PeerId,
        frame: Frame,
    },
    /// The peer finished cleanly. Its receipt has already been sent; the
    /// replier may carry one follow-up message.
    PeerClosed {
        peer: PeerId,
        receipt: DrainReceipt,
        replier: Replier,
    },
    /// The peer's connection was dropped after a protocol violation.
    PeerError {
        peer: PeerId,
        error: TransportError,
    },
}

enum ReplyChannel {
    Inproc(Sender<Vec<u8>>),
    Tcp(TcpStream),
}

/// Sends the drain receipt and an optional follow-up back to a finished peer.
pub struct Replier {
    channel: Option<ReplyChannel>,
}

impl Replier {
    pub(crate) fn inproc(tx: Sender<Vec<u8>>) -> Self {
        Replier {
            channel: Some(ReplyChannel::Inproc(tx)),
        }
    }

    pub(crate) fn tcp(stream: TcpStream) -> Self {
        Replier {
            channel: Some(ReplyChannel::Tcp(stream)),
        }
    }

    fn send(&mut self, msg: Vec<u8>) -> Result<(), TransportError> {
        match self.channel.as_mut() {
            Some(ReplyChannel::Inproc(tx)) => tx.send(msg).map_err(|_| TransportError::Closed),
            Some(ReplyChannel::Tcp(stream)) => {
                stream.write_all(&Frame::raw(msg).encode())?;
                Ok(())
            }
            None => Err(TransportError::Closed),
        }
    }

    fn ack(&mut self, receipt: DrainReceipt) -> Result<(), TransportError> {
        self.send(receipt.encode())
    }

    /// Sends `payload` to the finished peer and closes the connection.
    pub fn reply(mut self, payload: Vec<u8>) -> Result<(), TransportError> {
        self.send(payload)
    }
}

impl Drop for Replier {
    fn drop(&mut self) {
        if let Some(ReplyChannel::Tcp(stream)) = self.channel.take() {
            let _ = stream.shutdown(Shutdown::Both);
        }
    }
}

enum Backend {
    Inproc(inproc::Registration),
    Tcp(tcp::Listener),
}

/// Stops a pull endpoint from accepting new peers. Peers already connected
/// may finish; once they have and their frames are drained, `recv` reports
/// end of stream.
#[derive(Clone)]
pub struct ShutdownHandle {
    stopped: Arc<AtomicBool>,
    registration: Option<inproc::Registration>,
}

impl ShutdownHandle {
    pub fn shutdown(&self) {
        self.stopped.store(true, Ordering::SeqCst);
        if let Some(r) = &self.registration {
            r.unregister();
        }
    }
}

/// Sink side of a link. Only receives.
pub struct PullEndpoint {
    spec: LinkSpec,
    events: Receiver<Event>,
    backend: Backend,
    stopped: Arc<AtomicBool>,
    counters: Counters,
    per_peer: HashMap<PeerId, Counters>,
}

impl PullEndpoint {
    pub(crate) fn bind(spec: &LinkSpec) -> Result<Self, TransportError> {
        let stopped = Arc::new(AtomicBool::new(false));
        let (events, backend) = match &spec.kind {
            LinkKind::Inproc { .. } => {
                let (rx, reg) = inproc::bind(spec)?;
                (rx, Backend::Inproc(reg))
            }
            LinkKind::Tcp { .. } => {
                let (tx, rx) = crossbeam_channel::unbounded();
                let listener = tcp::Listener::bind(spec, tx, Arc::clone(&stopped))?;
                (rx, Backend::Tcp(listener))
            }
        };
        Ok(PullEndpoint {
            spec: spec.clone(),
            events,
            backend,
            stopped,
            counters: Counters::default(),
            per_peer: HashMap::new(),
        })
    }

    pub fn role(&self) -> Role {
        Role::Pull
    }

    pub fn spec(&self) -> &LinkSpec {
        &self.spec
    }

    /// Bound TCP address (useful after binding port 0).
    pub fn local_addr(&self) -> Option<SocketAddr> {
        match &self.backend {
            Backend::Tcp(l) => Some(l.local_addr()),
            Backend::Inproc(_) => None,
        }
    }

    /// Frames and wire bytes dequeued so far, over all peers.
    pub fn counters(&self) -> Counters {
        self.counters
    }

    pub fn shutdown_handle(&self) -> ShutdownHandle {
        ShutdownHandle {
            stopped: Arc::clone(&self.stopped),
            registration: match &self.backend {
                Backend::Inproc(r) => Some(r.clone()),
                Backend::Tcp(_) => None,
            },
        }
    }

    fn admit(&mut self, event: Event) -> Delivery {
        match event {
            Event::Frame { peer, frame } => {
                let bytes = frame.wire_len() as u64;
                self.counters.frames += 1;
                self.counters.bytes += bytes;
                let p = self.per_peer.entry(peer).or_default();
                p.frames += 1;
                p.bytes += bytes;
                Delivery::Frame { peer, frame }
            }
            Event::Closed { peer, mut replier } => {
                let c = self.per_peer.remove(&peer).unwrap_or_default();
                let receipt = DrainReceipt {
                    frames: c.frames,
                    bytes: c.bytes,
                };
                // A peer that vanished before reading its receipt is not the
                // sink's problem.
                let _ = replier.ack(receipt);
                Delivery::PeerClosed {
                    peer,
                    receipt,
                    replier,
                }
            }
            Event::Error { peer, error } => {
                self.per_peer.remove(&peer);
                Delivery::PeerError { peer, error }
            }
        }
    }

    /// Next delivery in arrival order; blocks until one is available.
    ///
    /// Returns [`TransportError::EndOfStream`] once the endpoint is shut down,
    /// every peer has gone and everything has been drained.
    pub fn recv_event(&mut self) -> Result<Delivery, TransportError> {
        match self.events.recv() {
            Ok(ev) => Ok(self.admit(ev)),
            Err(_) => Err(TransportError::EndOfStream),
        }
    }

    /// Like [`PullEndpoint::recv_event`] but gives up after `timeout`.
    pub fn recv_event_timeout(&mut self, timeout: Duration) -> Result<Option<Delivery>, TransportError> {
        match self.events.recv_timeout(timeout) {
            Ok(ev) => Ok(Some(self.admit(ev))),
            Err(RecvTimeoutError::Timeout) => Ok(None),
            Err(RecvTimeoutError::Disconnected) => Err(TransportError::EndOfStream),
        }
    }

    /// Next frame from any peer. Peer completions are acknowledged and
    /// skipped; a peer's protocol violation is returned as an error.
    pub fn recv(&mut self) -> Result<Frame, TransportError> {
        loop {
            match self.recv_event()? {
                Delivery::Frame { frame, .. } => return Ok(frame),
                Delivery::PeerClosed { .. } => continue,
                Delivery::PeerError { error, .. } => return Err(error),
            }
        }
    }

    /// Stops accepting peers and drops every open connection.
    pub fn close(self) {}
}

impl Drop for PullEndpoint {
    fn drop(&mut self) {
        self.stopped.store(true, Ordering::SeqCst);
        match &mut self.backend {
            Backend::Inproc(r) => r.unregister(),
            Backend::Tcp(l) => l.close(),
        }
    }
}
