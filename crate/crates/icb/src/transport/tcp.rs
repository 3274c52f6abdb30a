use std::io::{self, BufReader, ErrorKind, Read, Write};
use std::net::{Shutdown, SocketAddr, TcpListener, TcpStream};
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::{Arc, Mutex};
use std::thread::{self, JoinHandle};
use std::time::Duration;

use crossbeam_channel::Sender;
use icb_core::frame::{parse_header, HEADER_LEN};
use icb_core::Frame;

use super::pacer::Pacer;
use super::pull::{Event, Replier};
use super::push::{ReplySource, Wire};
use super::{DrainReceipt, LinkSpec, PeerId, TransportError};

const ACCEPT_POLL: Duration = Duration::from_millis(5);

/// Fills `header`; `Ok(false)` on a clean end of stream before its first byte.
fn read_header(r: &mut impl Read, header: &mut [u8; HEADER_LEN]) -> io::Result<bool> {
    let mut filled = 0;
    while filled < HEADER_LEN {
        match r.read(&mut header[filled..]) {
            Ok(0) if filled == 0 => return Ok(false),
            Ok(0) => return Err(ErrorKind::UnexpectedEof.into()),
            Ok(n) => filled += n,
            Err(e) if e.kind() == ErrorKind::Interrupted => {}
            Err(e) => return Err(e),
        }
    }
    Ok(true)
}

enum ReadOutcome {
    Frame(Frame),
    Eof,
}

fn read_frame(r: &mut impl Read, max_len: u32, peer: PeerId) -> Result<ReadOutcome, TransportError> {
    let mut header = [0u8; HEADER_LEN];
    match read_header(r, &mut header) {
        Ok(false) => return Ok(ReadOutcome::Eof),
        Ok(true) => {}
        Err(e) if e.kind() == ErrorKind::UnexpectedEof => return Err(TransportError::Truncated { peer }),
        Err(e) => return Err(e.into()),
    }
    let (len, flags) = parse_header(&header, max_len).map_err(|source| TransportError::Protocol { peer, source })?;
    let mut payload = vec![0u8; len];
    r.read_exact(&mut payload).map_err(|e| match e.kind() {
        ErrorKind::UnexpectedEof => TransportError::Truncated { peer },
        _ => e.into(),
    })?;
    Ok(ReadOutcome::Frame(Frame::new(flags, payload)))
}

pub(crate) struct Listener {
    local_addr: SocketAddr,
    stopped: Arc<AtomicBool>,
    streams: Arc<Mutex<Vec<TcpStream>>>,
    acceptor: Option<JoinHandle<()>>,
}

impl Listener {
    pub(crate) fn bind(spec: &LinkSpec, events: Sender<Event>, stopped: Arc<AtomicBool>) -> Result<Self, TransportError> {
        let addr = spec.kind.target();
        let listener = TcpListener::bind(addr).map_err(|e| match e.kind() {
            ErrorKind::AddrInUse => TransportError::AddressInUse(addr.to_string()),
            _ => e.into(),
        })?;
        listener.set_nonblocking(true)?;
        let local_addr = listener.local_addr()?;
        let streams = Arc::new(Mutex::new(Vec::new()));
        let max_len = spec.max_frame_len;

        let acceptor = {
            let stopped = Arc::clone(&stopped);
            let streams = Arc::clone(&streams);
            thread::Builder::new().name("icb-pull-accept".into()).spawn(move || {
                let next_peer = AtomicU64::new(1);
                while !stopped.load(Ordering::SeqCst) {
                    match listener.accept() {
                        Ok((stream, _)) => {
                            let peer = PeerId(next_peer.fetch_add(1, Ordering::Relaxed));
                            if let Err(e) = start_reader(stream, peer, events.clone(), max_len, &streams) {
                                let _ = events.send(Event::Error { peer, error: e.into() });
                            }
                        }
                        Err(e) if e.kind() == ErrorKind::WouldBlock => thread::sleep(ACCEPT_POLL),
                        Err(_) => thread::sleep(ACCEPT_POLL),
                    }
                }
            })?
        };

        Ok(Listener {
            local_addr,
            stopped,
            streams,
            acceptor: Some(acceptor),
        })
    }

    pub(crate) fn local_addr(&self) -> SocketAddr {
        self.local_addr
    }

    /// Stops accepting and tears down every accepted connection.
    pub(crate) fn close(&mut self) {
        self.stopped.store(true, Ordering::SeqCst);
        if let Some(a) = self.acceptor.take() {
            let _ = a.join();
        }
        for s in self.streams.lock().expect("stream list").drain(..) {
            let _ = s.shutdown(Shutdown::Both);
        }
    }
}

fn start_reader(
    stream: TcpStream,
    peer: PeerId,
    events: Sender<Event>,
    max_len: u32,
    streams: &Mutex<Vec<TcpStream>>,
) -> io::Result<()> {
    stream.set_nonblocking(false)?;
    stream.set_nodelay(true)?;
    streams.lock().expect("stream list").push(stream.try_clone()?);
    let reply_stream = stream.try_clone()?;
    thread::Builder::new().name(format!("icb-pull-{peer}")).spawn(move || {
        let mut reader = BufReader::with_capacity(64 * 1024, stream);
        loop {
            match read_frame(&mut reader, max_len, peer) {
                Ok(ReadOutcome::Frame(frame)) => {
                    if events.send(Event::Frame { peer, frame }).is_err() {
                        break;
                    }
                }
                Ok(ReadOutcome::Eof) => {
                    let _ = events.send(Event::Closed {
                        peer,
                        replier: Replier::tcp(reply_stream),
                    });
                    return;
                }
                Err(error) => {
                    let _ = events.send(Event::Error { peer, error });
                    break;
                }
            }
        }
        let _ = reply_stream.shutdown(Shutdown::Both);
    })?;
    Ok(())
}

fn connect_with_retry(spec: &LinkSpec) -> Result<TcpStream, TransportError> {
    let addr = spec.kind.target();
    for attempt in 1..=spec.connect_attempts {
        match TcpStream::connect(addr) {
            Ok(s) => {
                s.set_nodelay(true)?;
                return Ok(s);
            }
            Err(_) if attempt < spec.connect_attempts => thread::sleep(spec.retry_interval),
            Err(_) => {}
        }
    }
    Err(TransportError::ConnectFailed {
        target: addr.to_string(),
        attempts: spec.connect_attempts,
    })
}

pub(crate) struct TcpWire {
    spec: LinkSpec,
    stream: TcpStream,
    pacer: Arc<Pacer>,
    buf: Vec<u8>,
}

impl TcpWire {
    pub(crate) fn connect(spec: &LinkSpec, pacer: Arc<Pacer>) -> Result<Self, TransportError> {
        Ok(TcpWire {
            spec: spec.clone(),
            stream: connect_with_retry(spec)?,
            pacer,
            buf: Vec::new(),
        })
    }
}

impl Wire for TcpWire {
    fn write_frame(&mut self, frame: &Frame) -> Result<(), TransportError> {
        self.pacer.pace(frame.wire_len());
        self.buf.clear();
        frame.encode_into(&mut self.buf);
        self.stream.write_all(&self.buf)?;
        Ok(())
    }

    fn reconnect(&mut self) -> Result<(), TransportError> {
        let _ = self.stream.shutdown(Shutdown::Both);
        self.stream = connect_with_retry(&self.spec)?;
        Ok(())
    }

    fn finish(self: Box<Self>, timeout: Duration) -> Result<(DrainReceipt, ReplySource), TransportError> {
        self.stream.shutdown(Shutdown::Write)?;
        let mut reader = ReplyReader {
            stream: self.stream,
            max_len: self.spec.max_frame_len,
        };
        let first = reader
            .read_reply(timeout)?
            .ok_or_else(|| TransportError::LinkFailed("sink closed before acknowledging".into()))?;
        let receipt = DrainReceipt::decode(&first)
            .ok_or_else(|| TransportError::LinkFailed("malformed drain receipt".into()))?;
        Ok((receipt, ReplySource::Tcp(reader)))
    }
}

/// Reads sink-to-sensor messages after the sensor has finished sending.
pub(crate) struct ReplyReader {
    stream: TcpStream,
    max_len: u32,
}

impl ReplyReader {
    pub(crate) fn read_reply(&mut self, timeout: Duration) -> Result<Option<Vec<u8>>, TransportError> {
        self.stream.set_read_timeout(Some(timeout))?;
        match read_frame(&mut self.stream, self.max_len, PeerId(0)) {
            Ok(ReadOutcome::Frame(f)) => Ok(Some(f.payload)),
            Ok(ReadOutcome::Eof) => Ok(None),
            Err(TransportError::Io(e)) if matches!(e.kind(), ErrorKind::WouldBlock | ErrorKind::TimedOut) => {
                Err(TransportError::Timeout(timeout))
            }
            Err(e) => Err(e),
        }
    }
}
