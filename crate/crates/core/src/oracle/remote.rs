//! Client side of the external-oracle protocol.
//!
//! Concurrency: connections are pooled, one per concurrently querying
//! worker. A worker checks a connection out, runs one request/response
//! exchange on it and returns it. Request ids increase monotonically per
//! connection. Oracle values depend only on the queried matrix, so which
//! connection serves which query never changes the results.

use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpStream;
use std::process::{Child, Command, Stdio};
use std::str::FromStr;
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::sync::Mutex;
use std::thread;
use std::time::Duration;

use num_complex::Complex64;

use super::Oracle;
use crate::error::{OracleError, ProtocolError};
use crate::matrix::ComplexMatrix;
use crate::protocol::{parse_frame, Frame, PROTOCOL_VERSION};

pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(10);

/// Where an external oracle lives.
///
/// * `tcp:HOST:PORT` (or `tcp://HOST:PORT`) connects to a listening server.
/// * `exec:PROGRAM ARG...` spawns a child and speaks the protocol over its
///   stdin/stdout. Arguments are split on whitespace; no shell is involved.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Endpoint {
    Tcp(String),
    Exec(Vec<String>),
}

impl FromStr for Endpoint {
    type Err = OracleError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if let Some(addr) = s.strip_prefix("tcp://").or_else(|| s.strip_prefix("tcp:")) {
            if addr.is_empty() {
                return Err(OracleError::InvalidSpec("tcp endpoint needs HOST:PORT".into()));
            }
            return Ok(Endpoint::Tcp(addr.to_string()));
        }
        if let Some(cmd) = s.strip_prefix("exec:") {
            let argv: Vec<String> = cmd.split_whitespace().map(str::to_string).collect();
            if argv.is_empty() {
                return Err(OracleError::InvalidSpec("exec endpoint needs a command".into()));
            }
            return Ok(Endpoint::Exec(argv));
        }
        Err(OracleError::InvalidSpec(format!(
            "endpoint {s:?} must start with tcp: or exec:"
        )))
    }
}

struct Connection {
    writer: Box<dyn Write + Send>,
    lines: Receiver<std::io::Result<String>>,
    next_id: u64,
    timeout: Duration,
    child: Option<Child>,
}

fn spawn_line_reader<R: Read + Send + 'static>(source: R) -> Receiver<std::io::Result<String>> {
    let (tx, rx) = mpsc::channel();
    thread::spawn(move || {
        for line in BufReader::new(source).lines() {
            let stop = line.is_err();
            if tx.send(line).is_err() || stop {
                break;
            }
        }
    });
    rx
}

impl Connection {
    fn open(endpoint: &Endpoint, timeout: Duration) -> Result<(Self, usize), OracleError> {
        let unavailable = |e: std::io::Error| OracleError::RemoteUnavailable(format!("{endpoint:?}: {e}"));
        let mut conn = match endpoint {
            Endpoint::Tcp(addr) => {
                let stream = TcpStream::connect(addr).map_err(unavailable)?;
                stream.set_nodelay(true).map_err(unavailable)?;
                let reader = stream.try_clone().map_err(unavailable)?;
                Connection {
                    writer: Box::new(stream),
                    lines: spawn_line_reader(reader),
                    next_id: 1,
                    timeout,
                    child: None,
                }
            }
            Endpoint::Exec(argv) => {
                let mut child = Command::new(&argv[0])
                    .args(&argv[1..])
                    .stdin(Stdio::piped())
                    .stdout(Stdio::piped())
                    .stderr(Stdio::inherit())
                    .spawn()
                    .map_err(unavailable)?;
                let stdin = child.stdin.take().expect("stdin is piped");
                let stdout = child.stdout.take().expect("stdout is piped");
                Connection {
                    writer: Box::new(stdin),
                    lines: spawn_line_reader(stdout),
                    next_id: 1,
                    timeout,
                    child: Some(child),
                }
            }
        };
        let handshake = conn
            .send(&Frame::Hello {
                protocol: PROTOCOL_VERSION,
            })
            .and_then(|()| conn.recv());
        match handshake {
            Ok(Frame::Ready { max_dim }) => Ok((conn, max_dim)),
            Ok(other) => Err(OracleError::RemoteUnavailable(format!(
                "handshake answered with {}",
                other.to_line()
            ))),
            Err(err) => Err(OracleError::RemoteUnavailable(format!("handshake failed: {err}"))),
        }
    }

    fn send(&mut self, frame: &Frame) -> Result<(), OracleError> {
        let mut line = frame.to_line();
        line.push('\n');
        self.writer
            .write_all(line.as_bytes())
            .and_then(|()| self.writer.flush())
            .map_err(|e| OracleError::Protocol(e.into()))
    }

    fn recv(&mut self) -> Result<Frame, OracleError> {
        match self.lines.recv_timeout(self.timeout) {
            Ok(Ok(line)) => Ok(parse_frame(&line)?),
            Ok(Err(e)) => Err(OracleError::Protocol(e.into())),
            Err(RecvTimeoutError::Timeout) => Err(OracleError::Timeout(self.timeout)),
            Err(RecvTimeoutError::Disconnected) => Err(ProtocolError::Closed.into()),
        }
    }

    fn query(&mut self, m: &ComplexMatrix) -> Result<Complex64, OracleError> {
        let id = self.next_id;
        self.next_id += 1;
        self.send(&Frame::query(id, m))?;
        match self.recv()? {
            Frame::Result { id: got, value } => {
                if got != id {
                    return Err(ProtocolError::IdMismatch { expected: id, got }.into());
                }
                Ok(Complex64::new(value[0], value[1]))
            }
            Frame::Error { id: got, message } => Err(ProtocolError::Remote { id: got, message }.into()),
            other => Err(ProtocolError::UnexpectedFrame(other.to_line()).into()),
        }
    }
}

impl Drop for Connection {
    fn drop(&mut self) {
        // Closing stdin lets a well-behaved server exit on end of stream.
        self.writer = Box::new(std::io::sink());
        if let Some(mut child) = self.child.take() {
            for _ in 0..50 {
                if let Ok(Some(_)) = child.try_wait() {
                    return;
                }
                thread::sleep(Duration::from_millis(2));
            }
            let _ = child.kill();
            let _ = child.wait();
        }
    }
}

/// An oracle served by an external process or TCP peer.
pub struct RemoteOracle {
    endpoint: Endpoint,
    timeout: Duration,
    max_dim: usize,
    pool: Mutex<Vec<Connection>>,
}

impl RemoteOracle {
    /// Opens a first connection and records the max_dim declared in the handshake.
    pub fn connect(endpoint: Endpoint, timeout: Duration) -> Result<Self, OracleError> {
        let (conn, max_dim) = Connection::open(&endpoint, timeout)?;
        Ok(Self {
            endpoint,
            timeout,
            max_dim,
            pool: Mutex::new(vec![conn]),
        })
    }

    pub fn endpoint(&self) -> &Endpoint {
        &self.endpoint
    }

    fn checkout(&self) -> Result<Connection, OracleError> {
        if let Some(conn) = self.pool.lock().expect("pool lock").pop() {
            return Ok(conn);
        }
        let (conn, max_dim) = Connection::open(&self.endpoint, self.timeout)?;
        if max_dim != self.max_dim {
            return Err(OracleError::RemoteUnavailable(format!(
                "server changed max_dim from {} to {max_dim}",
                self.max_dim
            )));
        }
        Ok(conn)
    }
}

impl Oracle for RemoteOracle {
    fn max_dim(&self) -> usize {
        self.max_dim
    }

    fn evaluate(&self, m: &ComplexMatrix) -> Result<Complex64, OracleError> {
        if m.dim() > self.max_dim {
            return Err(OracleError::DimensionOutOfRange {
                k: m.dim(),
                max_dim: self.max_dim,
            });
        }
        let mut conn = self.checkout()?;
        let result = conn.query(m);
        // A connection that saw a transport-level failure may be out of sync; drop it.
        let reusable = match &result {
            Ok(_) => true,
            Err(OracleError::Protocol(ProtocolError::Remote { .. })) => true,
            Err(_) => false,
        };
        if reusable {
            self.pool.lock().expect("pool lock").push(conn);
        }
        result
    }
}

/// One-shot query against `endpoint`: handshake, query, disconnect.
pub fn remote_query(
    endpoint: &Endpoint,
    k: usize,
    m: &ComplexMatrix,
    timeout: Duration,
) -> Result<Complex64, OracleError> {
    if m.dim() != k {
        return Err(OracleError::DimensionMismatch {
            declared: k,
            actual: m.dim(),
        });
    }
    let (mut conn, max_dim) = Connection::open(endpoint, timeout)?;
    if k == 0 || k > max_dim {
        return Err(OracleError::DimensionOutOfRange { k, max_dim });
    }
    conn.query(m)
}
