//! Blocking TCP transport: a thread-per-connection server and a request
//! client.

use std::collections::HashMap;
use std::io::{self, BufReader, BufWriter, Write};
use std::net::{Shutdown, SocketAddr, TcpListener, TcpStream, ToSocketAddrs};
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::{Arc, Mutex};
use std::thread::{self, JoinHandle};
use std::time::Duration;

use tracing::{debug, warn};

use crate::protocol::frame::{read_reply_frame, read_request_frame, FrameError};
use crate::protocol::{
    parse_reply, parse_request, render_reply, render_request, Component, ErrorCode,
    ProtocolError, Reply, Request,
};

pub const CONNECT_TIMEOUT: Duration = Duration::from_secs(5);
pub const IO_TIMEOUT: Duration = Duration::from_secs(60);

/// A protocol server role: turns one parsed request into one reply.
pub trait Service: Send + Sync + 'static {
    fn component(&self) -> Component;
    fn handle(&self, req: Request) -> Reply;
}

impl<S: Service + ?Sized> Service for Arc<S> {
    fn component(&self) -> Component {
        (**self).component()
    }
    fn handle(&self, req: Request) -> Reply {
        (**self).handle(req)
    }
}

type Connections = Arc<Mutex<HashMap<u64, TcpStream>>>;

/// A running server. Dropping the handle stops it.
pub struct ServerHandle {
    addr: SocketAddr,
    stopping: Arc<AtomicBool>,
    conns: Connections,
    acceptor: Option<JoinHandle<()>>,
}

impl ServerHandle {
    pub fn local_addr(&self) -> SocketAddr {
        self.addr
    }

    /// Stops accepting, closes open connections and waits for the accept
    /// loop to exit.
    pub fn shutdown(&mut self) {
        if self.stopping.swap(true, Ordering::SeqCst) {
            return;
        }
        // unblock accept()
        let _ = TcpStream::connect_timeout(&self.addr, Duration::from_secs(1));
        if let Some(t) = self.acceptor.take() {
            let _ = t.join();
        }
        for (_, s) in self.conns.lock().unwrap().drain() {
            let _ = s.shutdown(Shutdown::Both);
        }
    }
}

impl Drop for ServerHandle {
    fn drop(&mut self) {
        self.shutdown();
    }
}

pub fn bind(addr: impl ToSocketAddrs) -> io::Result<TcpListener> {
    TcpListener::bind(addr)
}

/// Serves `service` on `listener` until the returned handle is shut down.
pub fn serve<S: Service>(listener: TcpListener, service: S) -> io::Result<ServerHandle> {
    let addr = listener.local_addr()?;
    let stopping = Arc::new(AtomicBool::new(false));
    let conns: Connections = Arc::default();
    let service = Arc::new(service);
    let acceptor = {
        let stopping = stopping.clone();
        let conns = conns.clone();
        thread::Builder::new()
            .name(format!("{}-accept", service.component().abbrev()))
            .spawn(move || accept_loop(listener, service, stopping, conns))?
    };
    Ok(ServerHandle {
        addr,
        stopping,
        conns,
        acceptor: Some(acceptor),
    })
}

fn accept_loop<S: Service>(
    listener: TcpListener,
    service: Arc<S>,
    stopping: Arc<AtomicBool>,
    conns: Connections,
) {
    let next_id = AtomicU64::new(0);
    for stream in listener.incoming() {
        if stopping.load(Ordering::SeqCst) {
            break;
        }
        let stream = match stream {
            Ok(s) => s,
            Err(e) => {
                warn!("accept failed: {e}");
                continue;
            }
        };
        let id = next_id.fetch_add(1, Ordering::Relaxed);
        if let Ok(clone) = stream.try_clone() {
            conns.lock().unwrap().insert(id, clone);
        }
        let service = service.clone();
        let conns = conns.clone();
        let spawned = thread::Builder::new()
            .name(format!("{}-conn", service.component().abbrev()))
            .spawn(move || {
                if let Err(e) = serve_connection(&*service, stream) {
                    debug!("connection closed: {e}");
                }
                conns.lock().unwrap().remove(&id);
            });
        if let Err(e) = spawned {
            warn!("could not spawn connection thread: {e}");
        }
    }
}

fn serve_connection<S: Service + ?Sized>(service: &S, stream: TcpStream) -> io::Result<()> {
    stream.set_nodelay(true)?;
    let with_body = service.component() == Component::MachineManager;
    let mut reader = BufReader::new(stream.try_clone()?);
    let mut writer = BufWriter::new(stream);
    loop {
        let frame = match read_request_frame(&mut reader, with_body) {
            Ok(Some(f)) => f,
            Ok(None) => return Ok(()),
            Err(FrameError::Io(e)) => return Err(e),
            Err(e) => {
                // framing is lost; answer once and hang up
                debug!("unframeable request: {e}");
                writer.write_all(&render_reply(&Reply::Err(ErrorCode::MALFORMED_REQUEST)))?;
                writer.flush()?;
                return Ok(());
            }
        };
        let reply = match parse_request(&frame, service.component()) {
            Ok(req) => {
                let kind = req.kind();
                let reply = service.handle(req);
                debug!(%kind, ok = reply.is_ok(), "handled");
                reply
            }
            Err(e) => {
                debug!("rejected request: {e}");
                Reply::Err(e.error_code())
            }
        };
        writer.write_all(&render_reply(&reply))?;
        writer.flush()?;
    }
}

#[derive(Debug, thiserror::Error)]
pub enum CallError {
    #[error("cannot connect to {addr}: {source}")]
    Connect { addr: String, source: io::Error },
    #[error("transport error: {0}")]
    Frame(#[from] FrameError),
    #[error(transparent)]
    Protocol(#[from] ProtocolError),
}

impl From<io::Error> for CallError {
    fn from(e: io::Error) -> Self {
        CallError::Frame(FrameError::Io(e))
    }
}

/// A client connection that can carry any number of requests.
pub struct Connection {
    reader: BufReader<TcpStream>,
    writer: BufWriter<TcpStream>,
}

impl Connection {
    pub fn open(addr: &str) -> Result<Self, CallError> {
        let connect_err = |source| CallError::Connect {
            addr: addr.to_owned(),
            source,
        };
        let mut last = io::Error::new(io::ErrorKind::InvalidInput, "address resolves to nothing");
        let addrs = addr.to_socket_addrs().map_err(connect_err)?;
        for sa in addrs {
            match TcpStream::connect_timeout(&sa, CONNECT_TIMEOUT) {
                Ok(stream) => {
                    stream.set_nodelay(true)?;
                    stream.set_read_timeout(Some(IO_TIMEOUT))?;
                    stream.set_write_timeout(Some(IO_TIMEOUT))?;
                    return Ok(Self {
                        reader: BufReader::new(stream.try_clone()?),
                        writer: BufWriter::new(stream),
                    });
                }
                Err(e) => last = e,
            }
        }
        Err(connect_err(last))
    }

    pub fn call(&mut self, req: &Request) -> Result<Reply, CallError> {
        let raw = self.exchange(&render_request(req), req.kind().is_list())?;
        Ok(parse_reply(&raw, req.kind())?)
    }

    /// Sends pre-rendered request bytes and returns the raw reply frame.
    pub fn exchange(&mut self, request: &[u8], expect_list: bool) -> Result<Vec<u8>, CallError> {
        self.writer.write_all(request)?;
        self.writer.flush()?;
        Ok(read_reply_frame(&mut self.reader, expect_list)?)
    }
}

/// Sends one request over a fresh connection.
pub fn call(addr: &str, req: impl Into<Request>) -> Result<Reply, CallError> {
    Connection::open(addr)?.call(&req.into())
}

/// [`call`] for server-to-server traffic: transport and reply-syntax
/// failures collapse to `UPSTREAM_FAILURE`.
pub fn call_upstream(addr: &str, req: impl Into<Request>) -> Result<Reply, ErrorCode> {
    let req = req.into();
    let kind = req.kind();
    Connection::open(addr).and_then(|mut c| c.call(&req)).map_err(|e| {
        warn!(%addr, %kind, "upstream call failed: {e}");
        ErrorCode::UPSTREAM_FAILURE
    })
}

/// Renders `host:port`, bracketing IPv6 literals.
pub fn join_host_port(host: &str, port: u16) -> String {
    if host.contains(':') && !host.starts_with('[') {
        format!("[{host}]:{port}")
    } else {
        format!("{host}:{port}")
    }
}
