//! Per-step metric files: CSV, UTF-8, LF line endings, fixed header.
//! Absent values (untracked β/ω, unrecorded wall time) are empty fields.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{HarnessError, Result};

pub const CURVE_HEADER: [&str; 9] = [
    "step",
    "episode",
    "reward",
    "cumulative_reward",
    "epsilon",
    "beta",
    "omega",
    "wall_time_ns",
    "candidates",
];

/// One row per environment step. Field order matches [`CURVE_HEADER`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurveRow {
    pub step: u64,
    pub episode: u64,
    pub reward: f64,
    pub cumulative_reward: f64,
    pub epsilon: f64,
    pub beta: Option<f64>,
    pub omega: Option<f64>,
    pub wall_time_ns: Option<u64>,
    pub candidates: usize,
}

pub struct CurveWriter<W: Write> {
    inner: csv::Writer<W>,
}

fn builder() -> csv::WriterBuilder {
    let mut b = csv::WriterBuilder::new();
    b.terminator(csv::Terminator::Any(b'\n')).has_headers(false);
    b
}

impl CurveWriter<BufWriter<File>> {
    pub fn create(path: &Path) -> Result<Self> {
        let file = File::create(path).map_err(|e| HarnessError::io(path, e))?;
        Self::new(BufWriter::new(file))
    }
}

impl<W: Write> CurveWriter<W> {
    pub fn new(sink: W) -> Result<Self> {
        let mut inner = builder().from_writer(sink);
        inner.write_record(CURVE_HEADER)?;
        Ok(Self { inner })
    }

    pub fn write(&mut self, row: &CurveRow) -> Result<()> {
        self.inner.serialize(row)?;
        Ok(())
    }

    pub fn finish(self) -> Result<W> {
        self.inner
            .into_inner()
            .map_err(|e| HarnessError::io(PathBuf::from("<curve>"), e.into_error()))
    }
}

/// Parses and validates a curve: exact header, well-formed rows, strictly increasing steps.
pub fn parse_curve<R: Read>(source: R, path: &Path) -> Result<Vec<CurveRow>> {
    let bad = |reason: String| HarnessError::MalformedCurve {
        path: path.to_path_buf(),
        reason,
    };
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(source);
    let header = reader.headers().map_err(|e| bad(e.to_string()))?.clone();
    if header.iter().ne(CURVE_HEADER) {
        return Err(bad(format!(
            "unexpected header {:?}",
            header.iter().collect::<Vec<_>>()
        )));
    }
    let mut rows: Vec<CurveRow> = Vec::new();
    for (i, rec) in reader.deserialize().enumerate() {
        let row: CurveRow = rec.map_err(|e| bad(format!("row {}: {e}", i + 1)))?;
        if let Some(prev) = rows.last() {
            if row.step <= prev.step {
                return Err(bad(format!("step {} follows {}", row.step, prev.step)));
            }
        }
        rows.push(row);
    }
    Ok(rows)
}

pub fn read_curve(path: &Path) -> Result<Vec<CurveRow>> {
    let file = File::open(path).map_err(|e| HarnessError::io(path, e))?;
    parse_curve(std::io::BufReader::new(file), path)
}
