//! Newline-delimited JSON protocol for external oracles.
//!
//! ```text
//! tester -> oracle  {"type":"hello","protocol":1}
//! oracle -> tester  {"type":"ready","max_dim":N}
//! tester -> oracle  {"type":"query","id":7,"k":2,"matrix":[[re,im],[re,im],[re,im],[re,im]]}
//! oracle -> tester  {"type":"result","id":7,"value":[re,im]}
//!                   {"type":"error","id":7,"message":"..."}
//! ```
//!
//! Matrices are row-major with 0-based indexing. Numbers are printed in
//! shortest round-trip form and parsed with correct rounding, so doubles
//! survive the trip bit for bit.

use std::io::{self, BufRead, BufReader, Write};
use std::net::TcpListener;
use std::sync::Arc;
use std::thread;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::ProtocolError;
use crate::matrix::ComplexMatrix;
use crate::oracle::OracleFamily;

pub const PROTOCOL_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum Frame {
    Hello { protocol: u32 },
    Ready { max_dim: usize },
    Query { id: u64, k: usize, matrix: Vec<[f64; 2]> },
    Result { id: u64, value: [f64; 2] },
    Error { id: u64, message: String },
}

impl Frame {
    pub fn query(id: u64, m: &ComplexMatrix) -> Self {
        Frame::Query {
            id,
            k: m.dim(),
            matrix: m.entries().iter().map(|z| [z.re, z.im]).collect(),
        }
    }

    pub fn to_line(&self) -> String {
        serde_json::to_string(self).expect("frames always serialize")
    }
}

// Result frame with nullable components, for peers that emit NaN/Infinity.
#[derive(Deserialize)]
struct LenientResult {
    #[serde(rename = "type")]
    kind: String,
    value: [Option<f64>; 2],
}

/// Parses one incoming frame.
///
/// Non-finite result components (`NaN`, `Infinity`, `null`) are reported as
/// [`ProtocolError::NonFinite`] rather than as a malformed frame.
pub fn parse_frame(line: &str) -> Result<Frame, ProtocolError> {
    match serde_json::from_str::<Frame>(line) {
        Ok(Frame::Result { value, .. }) if !value.iter().all(|v| v.is_finite()) => Err(ProtocolError::NonFinite),
        Ok(frame) => Ok(frame),
        Err(strict) => {
            let sanitized = line
                .replace("-Infinity", "null")
                .replace("Infinity", "null")
                .replace("NaN", "null");
            match serde_json::from_str::<LenientResult>(&sanitized) {
                Ok(r) if r.kind == "result" && r.value.iter().any(Option::is_none) => Err(ProtocolError::NonFinite),
                _ => Err(ProtocolError::Malformed(strict.to_string())),
            }
        }
    }
}

/// Counters kept by [`serve`].
#[derive(Debug, Default, Clone, PartialEq, Eq)]
pub struct ServeSummary {
    pub frames: u64,
    pub results: u64,
    pub errors: u64,
}

/// Answers frames from `reader` until end of stream, one at a time.
///
/// Bad frames get an error frame carrying the offending id (0 when no id can
/// be recovered) and the loop continues.
pub fn serve<R: BufRead, W: Write>(reader: R, mut writer: W, oracle: &OracleFamily) -> io::Result<ServeSummary> {
    let mut summary = ServeSummary::default();
    for line in reader.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        summary.frames += 1;
        let reply = respond(&line, oracle);
        match reply {
            Frame::Error { .. } => summary.errors += 1,
            Frame::Result { .. } => summary.results += 1,
            _ => {}
        }
        writer.write_all(reply.to_line().as_bytes())?;
        writer.write_all(b"\n")?;
        writer.flush()?;
    }
    Ok(summary)
}

/// Accepts TCP connections forever, one thread per connection, each
/// answering one query at a time.
pub fn serve_tcp(listener: TcpListener, oracle: Arc<OracleFamily>) -> io::Result<()> {
    for stream in listener.incoming() {
        let stream = stream?;
        stream.set_nodelay(true)?;
        let oracle = Arc::clone(&oracle);
        thread::spawn(move || -> io::Result<ServeSummary> {
            let reader = BufReader::new(stream.try_clone()?);
            serve(reader, stream, &oracle)
        });
    }
    Ok(())
}

fn error_frame(id: u64, message: impl Into<String>) -> Frame {
    Frame::Error {
        id,
        message: message.into(),
    }
}

/// Computes the reply to a single request line.
pub fn respond(line: &str, oracle: &OracleFamily) -> Frame {
    let frame = match serde_json::from_str::<Frame>(line) {
        Ok(frame) => frame,
        Err(err) => {
            let id = serde_json::from_str::<serde_json::Value>(line)
                .ok()
                .and_then(|v| v.get("id").and_then(serde_json::Value::as_u64))
                .unwrap_or(0);
            return error_frame(id, format!("malformed frame: {err}"));
        }
    };
    match frame {
        Frame::Hello { protocol } if protocol == PROTOCOL_VERSION => Frame::Ready {
            max_dim: oracle.max_dim(),
        },
        Frame::Hello { protocol } => error_frame(0, format!("unsupported protocol version {protocol}")),
        Frame::Query { id, k, matrix } => {
            if k == 0 || k > oracle.max_dim() {
                return error_frame(id, format!("k = {k} outside 1..={}", oracle.max_dim()));
            }
            let entries: Vec<Complex64> = matrix.iter().map(|&[re, im]| Complex64::new(re, im)).collect();
            let m = match ComplexMatrix::new(k, entries) {
                Ok(m) => m,
                Err(err) => return error_frame(id, err.to_string()),
            };
            match oracle.query(k, &m) {
                Ok(v) if v.re.is_finite() && v.im.is_finite() => Frame::Result {
                    id,
                    value: [v.re, v.im],
                },
                Ok(_) => error_frame(id, "oracle produced a non-finite value"),
                Err(err) => error_frame(id, err.to_string()),
            }
        }
        other => error_frame(0, format!("unexpected frame {:?}", other.to_line())),
    }
}
