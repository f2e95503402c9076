use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Mat;
use crate::solvers::{IterateRecord, IterateTrace};

pub const SCHEMA_VERSION: u32 = 1;

pub const TRACE_CSV_HEADER: &str =
    "k,h_value,psi_value,delta_P_norm,delta_Q_norm,delta_C_norm,wall_time_seconds";

pub const DENSE_MAGIC: &[u8; 8] = b"L1PCAMAT";
pub const DENSE_HEADER_LEN: usize = 16;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TraceFormat {
    Csv,
    Json,
}

impl TraceFormat {
    pub fn from_path(path: &Path) -> Option<Self> {
        path.extension()?.to_str()?.parse().ok()
    }
}

impl FromStr for TraceFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(TraceFormat::Csv),
            "json" => Ok(TraceFormat::Json),
            _ => Err(Error::InvalidInput(format!("unknown trace format '{s}'"))),
        }
    }
}

#[derive(Serialize, Deserialize)]
struct TraceDocument {
    schema_version: u32,
    records: Vec<IterateRecord>,
}

/// Seventeen significant digits.
fn fmt17(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn trace_to_csv(trace: &IterateTrace) -> String {
    let mut out = String::from(TRACE_CSV_HEADER);
    out.push('\n');
    for r in &trace.records {
        writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.k,
            fmt17(r.h_value),
            fmt17(r.psi_value),
            fmt17(r.delta_p_norm),
            fmt17(r.delta_q_norm),
            fmt17(r.delta_c_norm),
            fmt17(r.wall_time_seconds)
        )
        .expect("string write");
    }
    out
}

/// Parses CSV written by [`trace_to_csv`]; `h_step` is not part of the CSV
/// schema and is rebuilt from consecutive `h_value`s.
pub fn trace_from_csv(text: &str) -> Result<IterateTrace> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim() == TRACE_CSV_HEADER => {}
        _ => return Err(Error::Parse { line: 1, message: "missing or unexpected header".into() }),
    }
    let mut records: Vec<IterateRecord> = Vec::new();
    for (i, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let lineno = i + 1;
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 7 {
            return Err(Error::Parse { line: lineno, message: format!("expected 7 fields, got {}", f.len()) });
        }
        let num = |s: &str| -> Result<f64> {
            s.trim()
                .parse()
                .map_err(|_| Error::Parse { line: lineno, message: format!("bad number '{s}'") })
        };
        let k = f[0]
            .trim()
            .parse()
            .map_err(|_| Error::Parse { line: lineno, message: format!("bad iteration '{}'", f[0]) })?;
        let h_value = num(f[1])?;
        let h_step = records.last().map_or(0.0, |p| h_value - p.h_value);
        records.push(IterateRecord {
            k,
            h_value,
            psi_value: num(f[2])?,
            delta_p_norm: num(f[3])?,
            delta_q_norm: num(f[4])?,
            delta_c_norm: num(f[5])?,
            wall_time_seconds: num(f[6])?,
            h_step,
        });
    }
    Ok(IterateTrace { records })
}

pub fn trace_to_json(trace: &IterateTrace) -> Result<String> {
    let doc = TraceDocument { schema_version: SCHEMA_VERSION, records: trace.records.clone() };
    Ok(serde_json::to_string_pretty(&doc)?)
}

pub fn trace_from_json(text: &str) -> Result<IterateTrace> {
    let doc: TraceDocument = serde_json::from_str(text)?;
    Ok(IterateTrace { records: doc.records })
}

pub fn write_trace(trace: &IterateTrace, path: impl AsRef<Path>, format: TraceFormat) -> Result<()> {
    let text = match format {
        TraceFormat::Csv => trace_to_csv(trace),
        TraceFormat::Json => trace_to_json(trace)?,
    };
    fs::write(path, text)?;
    Ok(())
}

pub fn read_trace(path: impl AsRef<Path>, format: TraceFormat) -> Result<IterateTrace> {
    let text = fs::read_to_string(path)?;
    match format {
        TraceFormat::Csv => trace_from_csv(&text),
        TraceFormat::Json => trace_from_json(&text),
    }
}

/// Dense binary layout: magic `L1PCAMAT`, `rows` and `cols` as little-endian
/// `u32`, then column-major little-endian `f64` values.
pub fn encode_dense(m: &Mat) -> Result<Vec<u8>> {
    let rows = u32::try_from(m.rows()).map_err(|_| Error::InvalidInput("too many rows".into()))?;
    let cols = u32::try_from(m.cols()).map_err(|_| Error::InvalidInput("too many columns".into()))?;
    let mut out = Vec::with_capacity(DENSE_HEADER_LEN + 8 * m.as_slice().len());
    out.extend_from_slice(DENSE_MAGIC);
    out.extend_from_slice(&rows.to_le_bytes());
    out.extend_from_slice(&cols.to_le_bytes());
    for v in m.as_slice() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    Ok(out)
}

pub fn decode_dense(bytes: &[u8], path: &Path) -> Result<Mat> {
    let bad = |message: String| Error::MalformedFile { path: path.to_path_buf(), message };
    if bytes.len() < DENSE_HEADER_LEN {
        return Err(bad(format!("{} bytes is shorter than the header", bytes.len())));
    }
    if &bytes[..8] != DENSE_MAGIC {
        return Err(bad("bad magic".into()));
    }
    let rows = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes")) as usize;
    let cols = u32::from_le_bytes(bytes[12..16].try_into().expect("4 bytes")) as usize;
    let expected = rows
        .checked_mul(cols)
        .and_then(|c| c.checked_mul(8))
        .and_then(|c| c.checked_add(DENSE_HEADER_LEN))
        .ok_or_else(|| bad("size overflow".into()))?;
    if bytes.len() != expected {
        return Err(bad(format!("expected {expected} bytes for {rows}x{cols}, found {}", bytes.len())));
    }
    let data = bytes[DENSE_HEADER_LEN..]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect();
    Mat::from_col_major(rows, cols, data)
}

pub fn write_dense(path: impl AsRef<Path>, m: &Mat) -> Result<()> {
    fs::write(path, encode_dense(m)?)?;
    Ok(())
}

pub fn read_dense(path: impl AsRef<Path>) -> Result<Mat> {
    let path = path.as_ref();
    decode_dense(&fs::read(path)?, path)
}
