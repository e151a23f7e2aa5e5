use std::collections::BTreeMap;
use std::io::{self, BufWriter, Read, Write};
use std::net::{SocketAddr, TcpListener, TcpStream, ToSocketAddrs};
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::{Arc, Mutex};
use std::thread;
use std::time::{Duration, Instant};

use super::frame::{FrameDecoder, MAX_FRAME_LEN};
use super::session::Session;

pub const DEFAULT_IDLE_TIMEOUT: Duration = Duration::from_secs(600);

#[derive(Debug, Clone, PartialEq)]
pub struct ServerConfig {
    pub idle_timeout: Duration,
    pub max_frame: usize,
}

impl Default for ServerConfig {
    fn default() -> Self {
        Self { idle_timeout: DEFAULT_IDLE_TIMEOUT, max_frame: MAX_FRAME_LEN }
    }
}

#[derive(Debug, Clone)]
struct SessionInfo {
    peer: Option<SocketAddr>,
    opened: Instant,
}

/// Shared server state. Each connection owns its session and environment;
/// only the session table is shared.
#[derive(Debug)]
pub struct Server {
    config: ServerConfig,
    next_id: AtomicU64,
    sessions: Mutex<BTreeMap<u64, SessionInfo>>,
    shutdown: AtomicBool,
}

impl Server {
    pub fn new(config: ServerConfig) -> Arc<Self> {
        Arc::new(Self {
            config,
            next_id: AtomicU64::new(1),
            sessions: Mutex::new(BTreeMap::new()),
            shutdown: AtomicBool::new(false),
        })
    }

    pub fn active_sessions(&self) -> Vec<u64> {
        self.sessions.lock().expect("session table").keys().copied().collect()
    }

    pub fn shutdown(&self) {
        self.shutdown.store(true, Ordering::SeqCst);
    }

    /// Accepts connections until [`Server::shutdown`], one thread each.
    pub fn run(self: &Arc<Self>, listener: TcpListener) -> io::Result<()> {
        listener.set_nonblocking(true)?;
        let mut workers = Vec::new();
        while !self.shutdown.load(Ordering::SeqCst) {
            match listener.accept() {
                Ok((stream, peer)) => {
                    stream.set_nonblocking(false)?;
                    let server = Arc::clone(self);
                    workers.push(thread::spawn(move || server.connection(stream, Some(peer))));
                }
                Err(e) if e.kind() == io::ErrorKind::WouldBlock => thread::sleep(Duration::from_millis(5)),
                Err(e) => return Err(e),
            }
            workers.retain(|w| !w.is_finished());
        }
        for w in workers {
            let _ = w.join();
        }
        Ok(())
    }

    fn connection(&self, stream: TcpStream, peer: Option<SocketAddr>) {
        let id = self.next_id.fetch_add(1, Ordering::SeqCst);
        self.sessions.lock().expect("session table").insert(id, SessionInfo { peer, opened: Instant::now() });
        let _ = self.drive(stream, id);
        self.sessions.lock().expect("session table").remove(&id);
    }

    fn drive(&self, stream: TcpStream, id: u64) -> io::Result<()> {
        let poll = self.config.idle_timeout.min(Duration::from_millis(200));
        stream.set_read_timeout(Some(poll))?;
        stream.set_nodelay(true)?;
        let mut reader = stream.try_clone()?;
        let mut writer = BufWriter::new(stream);
        let mut session = Session::new(id);
        let mut decoder = FrameDecoder::new(self.config.max_frame);
        let mut buf = vec![0u8; 64 * 1024];
        loop {
            if self.shutdown.load(Ordering::SeqCst) {
                writer.write_all(&session.expire("server shutting down").to_wire())?;
                return writer.flush();
            }
            loop {
                match decoder.next_frame() {
                    Ok(Some(payload)) => {
                        let reply = session.handle_frame(&payload);
                        writer.write_all(&reply.to_wire())?;
                        writer.flush()?;
                        if reply.closes() {
                            return Ok(());
                        }
                    }
                    Ok(None) => break,
                    Err(e) => {
                        writer.write_all(&session.expire(&e.to_string()).to_wire())?;
                        return writer.flush();
                    }
                }
            }
            match reader.read(&mut buf) {
                Ok(0) => return Ok(()),
                Ok(n) => decoder.push(&buf[..n]),
                Err(e) if matches!(e.kind(), io::ErrorKind::WouldBlock | io::ErrorKind::TimedOut) => {
                    if session.last_activity.elapsed() >= self.config.idle_timeout {
                        writer.write_all(&session.expire("idle timeout").to_wire())?;
                        return writer.flush();
                    }
                }
                Err(e) if e.kind() == io::ErrorKind::Interrupted => {}
                Err(e) => return Err(e),
            }
        }
    }

    pub fn peer_of(&self, id: u64) -> Option<SocketAddr> {
        self.sessions.lock().expect("session table").get(&id).and_then(|s| s.peer)
    }

    pub fn session_age(&self, id: u64) -> Option<Duration> {
        self.sessions.lock().expect("session table").get(&id).map(|s| s.opened.elapsed())
    }
}

/// Binds `addr` and serves until the process exits.
pub fn serve(addr: impl ToSocketAddrs, config: ServerConfig) -> io::Result<()> {
    let listener = TcpListener::bind(addr)?;
    Server::new(config).run(listener)
}
