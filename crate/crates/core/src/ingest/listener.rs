//! Plain-TCP listener for live detector streams.
//!
//! One client at a time: further connections wait in the accept backlog
//! until the current client disconnects. A connection is one session. The
//! socket is read on its own thread and batches cross to the caller's
//! thread through a bounded queue; a full queue blocks the reader.
//!
//! In strict mode a bad record gets one JSON error line back
//! (`{"error":"...","line":N}`) and the connection is closed.

use std::io::{BufRead, BufReader, Write};
use std::net::{Shutdown, SocketAddr, TcpListener, TcpStream};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::mpsc::sync_channel;
use std::sync::{Arc, Mutex};
use std::thread;

use super::wire::LineDecoder;
use super::Strictness;
use crate::error::{Error, Result};
use crate::types::FrameBatch;

pub const DEFAULT_QUEUE_CAPACITY: usize = 1024;

/// Receives the batches of each connection, in arrival order.
pub trait BatchConsumer {
    fn begin_session(&mut self, peer: SocketAddr);
    fn on_batch(&mut self, batch: FrameBatch);
    fn end_session(&mut self, stats: &ConnectionStats);
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ConnectionStats {
    pub lines: usize,
    pub batches: usize,
    pub dropped: usize,
    /// Set when a strict-mode error closed the connection.
    pub error: Option<Error>,
}

#[derive(Debug)]
struct Shared {
    stop: AtomicBool,
    active: Mutex<Option<TcpStream>>,
}

pub struct Listener {
    socket: TcpListener,
    strictness: Strictness,
    queue_capacity: usize,
    shared: Arc<Shared>,
}

/// Stops a running [`Listener`] from another thread.
#[derive(Debug, Clone)]
pub struct ShutdownHandle {
    addr: SocketAddr,
    shared: Arc<Shared>,
}

impl ShutdownHandle {
    pub fn shutdown(&self) {
        self.shared.stop.store(true, Ordering::SeqCst);
        if let Some(stream) = self.shared.active.lock().unwrap().as_ref() {
            let _ = stream.shutdown(Shutdown::Both);
        }
        // Wake the blocking accept.
        let _ = TcpStream::connect(self.addr);
    }
}

impl Listener {
    pub fn bind(addr: &str, strictness: Strictness) -> Result<Self> {
        let socket = TcpListener::bind(addr).map_err(|e| Error::Io(format!("bind {addr}: {e}")))?;
        Ok(Listener {
            socket,
            strictness,
            queue_capacity: DEFAULT_QUEUE_CAPACITY,
            shared: Arc::new(Shared {
                stop: AtomicBool::new(false),
                active: Mutex::new(None),
            }),
        })
    }

    pub fn with_queue_capacity(mut self, capacity: usize) -> Self {
        self.queue_capacity = capacity.max(1);
        self
    }

    pub fn local_addr(&self) -> Result<SocketAddr> {
        Ok(self.socket.local_addr()?)
    }

    pub fn shutdown_handle(&self) -> Result<ShutdownHandle> {
        let mut addr = self.local_addr()?;
        if addr.ip().is_unspecified() {
            addr.set_ip(std::net::Ipv4Addr::LOCALHOST.into());
        }
        Ok(ShutdownHandle {
            addr,
            shared: self.shared.clone(),
        })
    }

    /// Serve clients until shut down.
    pub fn run<C: BatchConsumer>(&self, consumer: &mut C) -> Result<()> {
        for conn in self.socket.incoming() {
            if self.shared.stop.load(Ordering::SeqCst) {
                break;
            }
            let stream = match conn {
                Ok(s) => s,
                Err(e) => {
                    log::warn!("accept failed: {e}");
                    continue;
                }
            };
            self.serve(stream, consumer)?;
            if self.shared.stop.load(Ordering::SeqCst) {
                break;
            }
        }
        Ok(())
    }

    fn serve<C: BatchConsumer>(&self, stream: TcpStream, consumer: &mut C) -> Result<()> {
        let peer = stream.peer_addr()?;
        *self.shared.active.lock().unwrap() = Some(stream.try_clone()?);
        consumer.begin_session(peer);

        let (tx, rx) = sync_channel::<FrameBatch>(self.queue_capacity);
        let strictness = self.strictness;
        let reader = thread::spawn(move || read_connection(stream, strictness, |b| tx.send(b).is_ok()));
        for batch in rx {
            consumer.on_batch(batch);
        }
        let stats = reader.join().unwrap_or_else(|_| ConnectionStats {
            error: Some(Error::Io("reader thread panicked".into())),
            ..Default::default()
        });

        *self.shared.active.lock().unwrap() = None;
        consumer.end_session(&stats);
        Ok(())
    }
}

fn read_connection(
    stream: TcpStream,
    strictness: Strictness,
    mut deliver: impl FnMut(FrameBatch) -> bool,
) -> ConnectionStats {
    let mut stats = ConnectionStats::default();
    let mut writer = match stream.try_clone() {
        Ok(w) => w,
        Err(e) => {
            stats.error = Some(e.into());
            return stats;
        }
    };
    let mut decoder = LineDecoder::new(strictness);
    let mut line = String::new();
    let mut reader = BufReader::new(stream);
    loop {
        line.clear();
        match reader.read_line(&mut line) {
            Ok(0) => break,
            Ok(_) => {}
            Err(e) => {
                // Invalid UTF-8 lands here too.
                if strictness == Strictness::Lenient && e.kind() == std::io::ErrorKind::InvalidData {
                    stats.lines += 1;
                    stats.dropped += 1;
                    continue;
                }
                stats.error = Some(e.into());
                break;
            }
        }
        stats.lines += 1;
        match decoder.decode(&line) {
            Ok(Some(batch)) => {
                stats.batches += 1;
                if !deliver(batch) {
                    break;
                }
            }
            Ok(None) => {}
            Err(e) => {
                let reply = serde_json::json!({ "error": e.to_string(), "line": decoder.lines() });
                let _ = writeln!(writer, "{reply}");
                let _ = writer.shutdown(Shutdown::Both);
                stats.error = Some(e);
                break;
            }
        }
    }
    stats.dropped += decoder.dropped();
    stats
}
