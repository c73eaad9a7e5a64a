// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


//! Edge-list input and batch planning.
//!
//! Input lines hold `src dst [weight [timestamp]]` separated by whitespace;
//! lines starting with `#` or `%` are comments (SNAP and KONECT style).
//! Gzip input is recognised by its magic bytes.

use std::fs::File;
use std::io::{self, BufRead, BufReader, Read};
use std::path::Path;

use flate2::read::MultiGzDecoder;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::dynamics::BatchUpdate;
use crate::weight::Weight;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("line {line}: zero edge weight")]
    ZeroWeight { line: usize },
    #[error("line {line}: weight {value} is not representable in {mode} mode")]
    Weight { line: usize, value: f64, mode: &'static str },
    #[error("line {line}: temporal batching needs a timestamp")]
    MissingTimestamp { line: usize },
    #[error("{batches} batches requested but only {records} edges")]
    TooManyBatches { batches: usize, records: usize },
    #[error("batch count must be at least 1")]
    ZeroBatches,
    #[error("batch fraction must be in (0, 1], got {0}")]
    BadFraction(f64),
}

/// One input edge.
#[derive(Copy, Clone, Debug, PartialEq)]
pub struct EdgeRecord {
    pub src: u64,
    pub dst: u64,
    /// 1 when the file has no weight column.
    pub weight: f64,
    pub timestamp: Option<i64>,
    /// 1-based source line, for diagnostics.
    pub line: usize,
}

/// Parses an edge list, keeping file order.
pub fn parse_edge_list<R: BufRead>(reader: R) -> Result<Vec<EdgeRecord>, IngestError> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line?;
        let text = line.trim();
        if text.is_empty() || text.starts_with('#') || text.starts_with('%') {
            continue;
        }
        let fields: Vec<&str> = text.split_whitespace().collect();
        if !(2..=4).contains(&fields.len()) {
            return Err(IngestError::Parse { line: line_no, msg: format!("expected 2 to 4 fields, found {}", fields.len()) });
        }
        let bad = |what: &str, f: &str| IngestError::Parse { line: line_no, msg: format!("invalid {what} {f:?}") };
        let src = fields[0].parse::<u64>().map_err(|_| bad("node label", fields[0]))?;
        let dst = fields[1].parse::<u64>().map_err(|_| bad("node label", fields[1]))?;
        let weight = match fields.get(2) {
            Some(f) => f.parse::<f64>().ok().filter(|w| w.is_finite()).ok_or_else(|| bad("weight", f))?,
            None => 1.0,
        };
        if weight == 0.0 {
            return Err(IngestError::ZeroWeight { line: line_no });
        }
        let timestamp = match fields.get(3) {
            Some(f) => Some(f.parse::<i64>().map_err(|_| bad("timestamp", f))?),
            None => None,
        };
        out.push(EdgeRecord { src, dst, weight, timestamp, line: line_no });
    }
    Ok(out)
}

/// Reads a plain or gzip-compressed edge-list file.
pub fn read_edge_file(path: impl AsRef<Path>) -> Result<Vec<EdgeRecord>, IngestError> {
    let mut file = BufReader::new(File::open(path)?);
    let gzip = file.fill_buf()?.starts_with(&[0x1f, 0x8b]);
    if gzip {
        parse_edge_list(BufReader::new(MultiGzDecoder::new(file)))
    } else {
        parse_edge_list(file)
    }
}

/// Parses any reader, decompressing when it starts with the gzip magic.
pub fn parse_maybe_gzip<R: Read>(reader: R) -> Result<Vec<EdgeRecord>, IngestError> {
    let mut r = BufReader::new(reader);
    if r.fill_buf()?.starts_with(&[0x1f, 0x8b]) {
        parse_edge_list(BufReader::new(MultiGzDecoder::new(r)))
    } else {
        parse_edge_list(r)
    }
}

#[derive(Copy, Clone, Debug, PartialEq)]
pub enum BatchMode {
    /// Exactly `B` batches.
    Count(usize),
    /// Batches holding this fraction of the edges each, i.e.
    /// `B = round(1 / f)`.
    Fraction(f64),
}

/// How an edge stream is cut into batch updates.
#[derive(Copy, Clone, Debug, PartialEq)]
pub struct BatchPlan {
    pub mode: BatchMode,
    pub seed: u64,
    /// Sort by timestamp and shuffle within batches; otherwise shuffle
    /// globally.
    pub temporal: bool,
    /// Undirected input gets each non-loop edge mirrored.
    pub directed: bool,
    /// Collapse repeated pairs to their first occurrence.
    pub dedup: bool,
}

impl Default for BatchPlan {
    fn default() -> Self {
        BatchPlan { mode: BatchMode::Count(1), seed: 0, temporal: false, directed: false, dedup: false }
    }
}

impl BatchPlan {
    pub fn batch_count(&self) -> Result<usize, IngestError> {
        match self.mode {
            BatchMode::Count(0) => Err(IngestError::ZeroBatches),
            BatchMode::Count(b) => Ok(b),
            BatchMode::Fraction(f) if f > 0.0 && f <= 1.0 => Ok(((1.0 / f).round() as usize).max(1)),
            BatchMode::Fraction(f) => Err(IngestError::BadFraction(f)),
        }
    }
}

/// Orders records per the plan and splits them into equal batches, the
/// remainder going to the last one.
pub fn plan_records(records: &[EdgeRecord], plan: &BatchPlan) -> Result<Vec<Vec<EdgeRecord>>, IngestError> {
    let b = plan.batch_count()?;
    let mut recs: Vec<EdgeRecord> = records.to_vec();
    if plan.dedup {
        let mut seen = std::collections::HashSet::new();
        recs.retain(|r| {
            let key = if plan.directed || r.src <= r.dst { (r.src, r.dst) } else { (r.dst, r.src) };
            seen.insert(key)
        });
    }
    if b > recs.len() {
        return Err(IngestError::TooManyBatches { batches: b, records: recs.len() });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(plan.seed);
    if plan.temporal {
        if let Some(r) = recs.iter().find(|r| r.timestamp.is_none()) {
            return Err(IngestError::MissingTimestamp { line: r.line });
        }
        recs.sort_by_key(|r| r.timestamp);
    } else {
        recs.shuffle(&mut rng);
    }
    let size = recs.len() / b;
    let mut out = Vec::with_capacity(b);
    let mut rest = recs.as_slice();
    for i in 0..b {
        let take = if i + 1 == b { rest.len() } else { size };
        let (head, tail) = rest.split_at(take);
        let mut batch = head.to_vec();
        if plan.temporal {
            batch.shuffle(&mut rng);
        }
        out.push(batch);
        rest = tail;
    }
    Ok(out)
}

/// Turns records into engine deltas, mirroring undirected edges.
pub fn to_batch<W: Weight>(records: &[EdgeRecord], directed: bool) -> Result<BatchUpdate<W>, IngestError> {
    let mut batch = BatchUpdate::new();
    for r in records {
        let w = W::from_f64(r.weight).ok_or(IngestError::Weight { line: r.line, value: r.weight, mode: W::NAME })?;
        batch.push(r.src, r.dst, w);
        if !directed && r.src != r.dst {
            batch.push(r.dst, r.src, w);
        }
    }
    Ok(batch)
}

/// [`plan_records`] followed by [`to_batch`] on every batch.
pub fn plan_batches<W: Weight>(records: &[EdgeRecord], plan: &BatchPlan) -> Result<Vec<BatchUpdate<W>>, IngestError> {
    plan_records(records, plan)?.iter().map(|b| to_batch(b, plan.directed)).collect()
}
