//! JSON Lines trace: a header, every placement and oracle event in order, the
//! fork marker if any, and the certificate last.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::adaptive::OracleEvent;
use crate::exactnum::NumericContext;
use crate::strategies::{Certificate, StrategyConfig};
use crate::vpcore::{Decision, Item};

pub const TRACE_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum TraceRecord {
    Header {
        version: u32,
        config: StrategyConfig,
        algorithm: String,
        dimension: usize,
        context: NumericContext,
    },
    Placement {
        seq: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        branch: Option<String>,
        item: Item,
        decision: Decision,
        bin: usize,
        opened: bool,
    },
    Oracle {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        branch: Option<String>,
        event: OracleEvent,
    },
    Fork {
        labels: Vec<String>,
    },
    Certificate {
        certificate: Box<Certificate>,
    },
}

#[derive(Debug, Error)]
pub enum TraceError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub fn write_records<W: Write>(mut out: W, records: &[TraceRecord]) -> std::io::Result<()> {
    for r in records {
        serde_json::to_writer(&mut out, r)?;
        out.write_all(b"\n")?;
    }
    out.flush()
}

pub fn write_trace(path: &Path, records: &[TraceRecord]) -> std::io::Result<()> {
    write_records(BufWriter::new(File::create(path)?), records)
}

/// Parses a trace; errors carry 1-based line numbers.
pub fn read_records<R: BufRead>(input: R) -> Result<Vec<TraceRecord>, TraceError> {
    let mut out = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec = serde_json::from_str(&line).map_err(|e| TraceError::Parse {
            line: i + 1,
            message: e.to_string(),
        })?;
        out.push(rec);
    }
    Ok(out)
}

pub fn read_trace(path: &Path) -> Result<Vec<TraceRecord>, TraceError> {
    read_records(BufReader::new(File::open(path)?))
}
