//! Named in-process links. The wire rate belongs to the sink: every peer
//! connected to one channel shares its pacer.

use std::collections::HashMap;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, LazyLock, Mutex, Weak};
use std::thread;
use std::time::Duration;

use crossbeam_channel::{bounded, Receiver, RecvTimeoutError, Sender};
use icb_core::Frame;

use super::pacer::Pacer;
use super::pull::{Event, Replier};
use super::push::{ReplySource, Wire};
use super::{DrainReceipt, LinkSpec, PeerId, TransportError};

pub(crate) struct Channel {
    events: Sender<Event>,
    pacer: Pacer,
    next_peer: AtomicU64,
}

static REGISTRY: LazyLock<Mutex<HashMap<String, Arc<Channel>>>> =
    LazyLock::new(|| Mutex::new(HashMap::new()));

fn registry() -> std::sync::MutexGuard<'static, HashMap<String, Arc<Channel>>> {
    REGISTRY.lock().unwrap_or_else(|e| e.into_inner())
}

/// A pull endpoint's claim on a channel name.
#[derive(Clone)]
pub(crate) struct Registration {
    name: String,
    channel: Weak<Channel>,
}

impl Registration {
    pub(crate) fn unregister(&self) {
        let mut reg = registry();
        if reg
            .get(&self.name)
            .is_some_and(|c| Weak::ptr_eq(&Arc::downgrade(c), &self.channel))
        {
            reg.remove(&self.name);
        }
    }
}

fn channel_name(spec: &LinkSpec) -> &str {
    spec.kind.target()
}

pub(crate) fn bind(spec: &LinkSpec) -> Result<(Receiver<Event>, Registration), TransportError> {
    let name = channel_name(spec).to_string();
    let mut reg = registry();
    if reg.contains_key(&name) {
        return Err(TransportError::AddressInUse(format!("inproc:{name}")));
    }
    let (tx, rx) = crossbeam_channel::unbounded();
    let channel = Arc::new(Channel {
        events: tx,
        pacer: Pacer::new(spec.rate()?),
        next_peer: AtomicU64::new(1),
    });
    let registration = Registration {
        name: name.clone(),
        channel: Arc::downgrade(&channel),
    };
    reg.insert(name, channel);
    Ok((rx, registration))
}

fn lookup(spec: &LinkSpec) -> Result<(Arc<Channel>, PeerId), TransportError> {
    let name = channel_name(spec);
    for attempt in 1..=spec.connect_attempts {
        if let Some(ch) = registry().get(name).cloned() {
            let peer = PeerId(ch.next_peer.fetch_add(1, Ordering::Relaxed));
            return Ok((ch, peer));
        }
        if attempt < spec.connect_attempts {
            thread::sleep(spec.retry_interval);
        }
    }
    Err(TransportError::ConnectFailed {
        target: format!("inproc:{name}"),
        attempts: spec.connect_attempts,
    })
}

pub(crate) struct InprocWire {
    spec: LinkSpec,
    channel: Arc<Channel>,
    peer: PeerId,
}

impl InprocWire {
    pub(crate) fn connect(spec: &LinkSpec) -> Result<Self, TransportError> {
        let (channel, peer) = lookup(spec)?;
        Ok(InprocWire {
            spec: spec.clone(),
            channel,
            peer,
        })
    }
}

impl Wire for InprocWire {
    fn write_frame(&mut self, frame: &Frame) -> Result<(), TransportError> {
        self.channel.pacer.pace(frame.wire_len());
        self.channel
            .events
            .send(Event::Frame {
                peer: self.peer,
                frame: frame.clone(),
            })
            .map_err(|_| TransportError::LinkFailed("sink went away".into()))
    }

    fn reconnect(&mut self) -> Result<(), TransportError> {
        let (channel, peer) = lookup(&self.spec)?;
        self.channel = channel;
        self.peer = peer;
        Ok(())
    }

    fn finish(self: Box<Self>, timeout: Duration) -> Result<(DrainReceipt, ReplySource), TransportError> {
        let (tx, rx) = bounded(2);
        self.channel
            .events
            .send(Event::Closed {
                peer: self.peer,
                replier: Replier::inproc(tx),
            })
            .map_err(|_| TransportError::LinkFailed("sink went away".into()))?;
        drop(self);
        let first = match rx.recv_timeout(timeout) {
            Ok(m) => m,
            Err(RecvTimeoutError::Timeout) => return Err(TransportError::Timeout(timeout)),
            Err(RecvTimeoutError::Disconnected) => {
                return Err(TransportError::LinkFailed("sink closed before acknowledging".into()))
            }
        };
        let receipt = DrainReceipt::decode(&first)
            .ok_or_else(|| TransportError::LinkFailed("malformed drain receipt".into()))?;
        Ok((receipt, ReplySource::Inproc(rx)))
    }
}
