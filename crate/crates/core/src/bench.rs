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


//! Replaying batch streams through the engine and recording metrics.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use thiserror::Error;

use crate::dynamics::BatchUpdate;
use crate::ingest::{self, BatchMode, BatchPlan, EdgeRecord, IngestError};
use crate::leiden::{Engine, EngineError, Params, Partition};
use crate::oracle::{self, FlatGraph};
use crate::weight::Weight;

#[derive(Debug, Error)]
pub enum BenchError {
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("verification failed after batch {batch}: {detail}")]
    Mismatch { batch: usize, detail: String },
}

/// What the ratio columns compare against.
#[derive(Copy, Clone, Debug, Default, PartialEq, Eq)]
pub enum Baseline {
    #[default]
    None,
    /// Reference Leiden from scratch on the cumulative graph per batch.
    Scratch,
    /// Reference Leiden per batch, started from the previous partition.
    Warm,
}

#[derive(Clone, Debug)]
pub struct RunConfig {
    pub input: PathBuf,
    pub plan: BatchPlan,
    pub params: Params,
    /// Cross-check every batch against the oracle.
    pub verify: bool,
    pub baseline: Baseline,
    /// Directory for metrics.csv, metrics.dat and membership.txt.
    pub out_dir: Option<PathBuf>,
}

/// One row of metrics.csv.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BatchMetrics {
    pub batch_index: usize,
    /// Input edges in the batch (before mirroring).
    pub batch_size: usize,
    pub runtime_seconds: f64,
    pub modularity: f64,
    pub num_communities: usize,
    pub affected_ground_nodes: usize,
    pub visited_nodes: usize,
    pub threads: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BaselineMetrics {
    pub batch_index: usize,
    pub runtime_seconds: f64,
    pub modularity: f64,
}

#[derive(Clone, Debug)]
pub struct RunReport {
    pub metrics: Vec<BatchMetrics>,
    pub baseline: Vec<BaselineMetrics>,
    pub partition: Partition,
}

impl RunReport {
    pub fn total_runtime(&self) -> f64 {
        self.metrics.iter().map(|m| m.runtime_seconds).sum()
    }

    pub fn mean_runtime(&self) -> f64 {
        if self.metrics.is_empty() {
            0.0
        } else {
            self.total_runtime() / self.metrics.len() as f64
        }
    }

    pub fn final_modularity(&self) -> f64 {
        self.metrics.last().map_or(0.0, |m| m.modularity)
    }

    /// Baseline runtime over ours, summed over batches.
    pub fn runtime_ratio(&self) -> Option<f64> {
        if self.baseline.is_empty() {
            return None;
        }
        Some(self.baseline.iter().map(|b| b.runtime_seconds).sum::<f64>() / self.total_runtime())
    }

    /// Our final modularity over the baseline's.
    pub fn modularity_ratio(&self) -> Option<f64> {
        self.baseline.last().map(|b| self.final_modularity() / b.modularity)
    }
}

/// Reads the configured input and runs it in integer weight mode.
pub fn run_experiment(config: &RunConfig) -> Result<RunReport, BenchError> {
    let records = ingest::read_edge_file(&config.input)?;
    run_records::<i64>(&records, config)
}

/// Runs an already parsed edge stream.
pub fn run_records<W: Weight>(records: &[EdgeRecord], config: &RunConfig) -> Result<RunReport, BenchError> {
    let planned = ingest::plan_records(records, &config.plan)?;
    let batches: Vec<BatchUpdate<W>> =
        planned.iter().map(|b| ingest::to_batch(b, config.plan.directed)).collect::<Result<_, _>>()?;
    let mut engine = Engine::<W>::new(config.params.clone())?;
    let mut metrics = Vec::with_capacity(batches.len());
    let mut baseline = Vec::new();
    let mut cumulative: Vec<(u64, u64, W)> = Vec::new();
    let mut warm: Option<FlatGraph<W>> = None;
    for (i, (batch, recs)) in batches.iter().zip(&planned).enumerate() {
        let start = Instant::now();
        let report = engine.step(batch)?;
        let runtime = start.elapsed().as_secs_f64();
        if config.verify {
            if let Err(detail) = verify(&engine) {
                if let Some(dir) = &config.out_dir {
                    dump_failure(dir, i, &detail, &engine)?;
                }
                return Err(BenchError::Mismatch { batch: i, detail });
            }
        }
        metrics.push(BatchMetrics {
            batch_index: i,
            batch_size: recs.len(),
            runtime_seconds: runtime,
            modularity: report.modularity,
            num_communities: report.communities,
            affected_ground_nodes: report.affected_ground,
            visited_nodes: report.visited,
            threads: engine.threads(),
        });
        if config.baseline != Baseline::None {
            cumulative.extend(batch.deltas.iter().map(|d| (d.src, d.dst, d.delta)));
            let start = Instant::now();
            let flat = FlatGraph::from_edges(&cumulative);
            let result = match (&config.baseline, &warm) {
                (Baseline::Warm, Some(prev)) => {
                    let start_part = carry_membership(prev, &flat);
                    oracle::reference_leiden_from(&flat, &start_part, config.params.gamma, config.params.seed)
                }
                _ => oracle::reference_leiden(&flat, config.params.gamma, config.params.seed),
            };
            let runtime = start.elapsed().as_secs_f64();
            baseline.push(BaselineMetrics {
                batch_index: i,
                runtime_seconds: runtime,
                modularity: oracle::oracle_modularity(&result, config.params.gamma),
            });
            warm = Some(result);
        }
    }
    let run = RunReport { metrics, baseline, partition: engine.partition() };
    if let Some(dir) = &config.out_dir {
        write_outputs(dir, &run)?;
    }
    Ok(run)
}

/// Previous communities for labels seen before; new labels get fresh ones.
fn carry_membership<W: Weight>(prev: &FlatGraph<W>, next: &FlatGraph<W>) -> Vec<usize> {
    let old: std::collections::HashMap<u64, usize> =
        prev.labels().iter().copied().zip(prev.membership().iter().copied()).collect();
    let mut fresh = prev.num_communities();
    next.labels()
        .iter()
        .map(|l| {
            old.get(l).copied().unwrap_or_else(|| {
                fresh += 1;
                fresh - 1
            })
        })
        .collect()
}

/// Oracle cross-check of one engine state.
pub fn verify<W: Weight>(engine: &Engine<W>) -> Result<(), String> {
    let flat = FlatGraph::from_engine(engine);
    let gamma = engine.params().gamma;
    let (m, w, k) = oracle::oracle_aggregates(&flat);
    let agg = engine.graph().aggregates();
    let (want, got) = (oracle::oracle_modularity(&flat, gamma), engine.modularity());
    if W::EXACT {
        if (m, w, k) != (agg.m, agg.w, agg.k) || want != got {
            return Err(format!("aggregates (m, W, K): oracle ({m}, {w}, {k}), engine ({}, {}, {})", agg.m, agg.w, agg.k));
        }
    } else if (want - got).abs() > 1e-9 * want.abs().max(1e-300) && (want - got).abs() > 1e-12 {
        return Err(format!("modularity: oracle {want}, engine {got}"));
    }
    oracle::check_lifting(engine.graph())?;
    oracle::check_partition(engine)?;
    engine.graph().check_structure()
}

fn dump_failure<W: Weight>(dir: &Path, batch: usize, detail: &str, engine: &Engine<W>) -> Result<(), BenchError> {
    fs::create_dir_all(dir)?;
    let mut f = fs::File::create(dir.join("verify_failure.txt"))?;
    writeln!(f, "batch {batch}: {detail}")?;
    writeln!(f, "aggregates {:?}", engine.graph().aggregates())?;
    for (label, c) in engine.partition().iter() {
        writeln!(f, "{label} {c}")?;
    }
    Ok(())
}

/// Writes metrics.csv, metrics.dat and membership.txt (plus baseline.csv
/// when a baseline ran).
pub fn write_outputs(dir: &Path, run: &RunReport) -> Result<(), BenchError> {
    fs::create_dir_all(dir)?;
    let mut csv = csv::Writer::from_path(dir.join("metrics.csv"))?;
    for m in &run.metrics {
        csv.serialize(m)?;
    }
    csv.flush()?;
    if !run.baseline.is_empty() {
        let mut csv = csv::Writer::from_path(dir.join("baseline.csv"))?;
        for b in &run.baseline {
            csv.serialize(b)?;
        }
        csv.flush()?;
    }
    let mut dat = fs::File::create(dir.join("metrics.dat"))?;
    writeln!(dat, "# batch_index runtime_seconds modularity num_communities affected_ground_nodes visited_nodes")?;
    for m in &run.metrics {
        writeln!(
            dat,
            "{} {} {} {} {} {}",
            m.batch_index, m.runtime_seconds, m.modularity, m.num_communities, m.affected_ground_nodes, m.visited_nodes
        )?;
    }
    write_membership(&dir.join("membership.txt"), &run.partition)?;
    Ok(())
}

pub fn write_membership(path: &Path, partition: &Partition) -> Result<(), BenchError> {
    let mut f = std::io::BufWriter::new(fs::File::create(path)?);
    for (label, c) in partition.iter() {
        writeln!(f, "{label} {c}")?;
    }
    f.flush()?;
    Ok(())
}

/// The quantity varied by a sweep.
#[derive(Clone, Debug, PartialEq)]
pub enum SweepAxis {
    Threads(Vec<usize>),
    Batch(Vec<BatchMode>),
}

/// One row of sweep.csv.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepRow {
    pub axis: String,
    pub value: String,
    pub batches: usize,
    pub threads: usize,
    pub total_runtime_seconds: f64,
    pub mean_batch_runtime_seconds: f64,
    pub final_modularity: f64,
    pub num_communities: usize,
    /// Runtime of the first sweep point over this one.
    pub speedup_vs_first: f64,
    /// This point's final modularity over the first's.
    pub modularity_vs_first: f64,
    /// Baseline over ours, when a baseline ran.
    pub baseline_runtime_ratio: Option<f64>,
    pub baseline_modularity_ratio: Option<f64>,
}

/// Repeats the run for every axis value. Per-point outputs go to
/// `out_dir/<axis>-<value>/`, the summary to `out_dir/sweep.csv`.
pub fn sweep(config: &RunConfig, axis: &SweepAxis) -> Result<Vec<SweepRow>, BenchError> {
    let records = ingest::read_edge_file(&config.input)?;
    sweep_records::<i64>(&records, config, axis)
}

pub fn sweep_records<W: Weight>(records: &[EdgeRecord], config: &RunConfig, axis: &SweepAxis) -> Result<Vec<SweepRow>, BenchError> {
    let points: Vec<(String, String, RunConfig)> = match axis {
        SweepAxis::Threads(values) => values
            .iter()
            .map(|&t| {
                let mut c = config.clone();
                c.params.threads = t;
                ("threads".to_string(), t.to_string(), c)
            })
            .collect(),
        SweepAxis::Batch(values) => values
            .iter()
            .map(|&mode| {
                let mut c = config.clone();
                c.plan.mode = mode;
                let v = match mode {
                    BatchMode::Count(b) => format!("{b}"),
                    BatchMode::Fraction(f) => format!("{f}"),
                };
                ("batch".to_string(), v, c)
            })
            .collect(),
    };
    let mut rows: Vec<SweepRow> = Vec::with_capacity(points.len());
    for (name, value, mut c) in points {
        c.out_dir = config.out_dir.as_ref().map(|d| d.join(format!("{name}-{value}")));
        let run = run_records::<W>(records, &c)?;
        let (t0, q0) = rows.first().map_or((run.total_runtime(), run.final_modularity()), |r| {
            (r.total_runtime_seconds, r.final_modularity)
        });
        rows.push(SweepRow {
            axis: name,
            value,
            batches: run.metrics.len(),
            threads: c.params.threads,
            total_runtime_seconds: run.total_runtime(),
            mean_batch_runtime_seconds: run.mean_runtime(),
            final_modularity: run.final_modularity(),
            num_communities: run.partition.num_communities(),
            speedup_vs_first: t0 / run.total_runtime(),
            modularity_vs_first: run.final_modularity() / q0,
            baseline_runtime_ratio: run.runtime_ratio(),
            baseline_modularity_ratio: run.modularity_ratio(),
        });
    }
    if let Some(dir) = &config.out_dir {
        fs::create_dir_all(dir)?;
        let mut csv = csv::Writer::from_path(dir.join("sweep.csv"))?;
        for r in &rows {
            csv.serialize(r)?;
        }
        csv.flush()?;
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config(dir: Option<PathBuf>) -> RunConfig {
        RunConfig {
            input: PathBuf::new(),
            plan: BatchPlan { mode: BatchMode::Count(2), seed: 1, ..BatchPlan::default() },
            params: Params::default(),
            verify: true,
            baseline: Baseline::Scratch,
            out_dir: dir,
        }
    }

    fn ring() -> Vec<EdgeRecord> {
        crate::synth::ring_of_cliques(4, 4)
            .into_iter()
            .enumerate()
            .map(|(i, (a, b))| EdgeRecord { src: a, dst: b, weight: 1.0, timestamp: None, line: i + 1 })
            .collect()
    }

    #[test]
    fn writes_the_documented_files() {
        let dir = tempfile::tempdir().unwrap();
        let run = run_records::<i64>(&ring(), &config(Some(dir.path().to_path_buf()))).unwrap();
        assert_eq!(run.metrics.len(), 2);
        let csv = fs::read_to_string(dir.path().join("metrics.csv")).unwrap();
        assert_eq!(
            csv.lines().next().unwrap(),
            "batch_index,batch_size,runtime_seconds,modularity,num_communities,affected_ground_nodes,visited_nodes,threads"
        );
        assert_eq!(csv.lines().count(), 3);
        let membership = fs::read_to_string(dir.path().join("membership.txt")).unwrap();
        assert_eq!(membership.lines().count(), 16);
        assert!(dir.path().join("metrics.dat").exists());
        assert!(run.modularity_ratio().unwrap() > 0.9);
    }

    #[test]
    fn too_many_batches_is_a_clean_error() {
        let mut c = config(None);
        c.plan.mode = BatchMode::Count(1000);
        assert!(matches!(run_records::<i64>(&ring(), &c), Err(BenchError::Ingest(IngestError::TooManyBatches { .. }))));
    }

    #[test]
    fn single_point_sweep_matches_a_run() {
        let c = RunConfig { baseline: Baseline::None, ..config(None) };
        let run = run_records::<i64>(&ring(), &c).unwrap();
        let rows = sweep_records::<i64>(&ring(), &c, &SweepAxis::Threads(vec![1])).unwrap();
        assert_eq!(rows.len(), 1);
        assert_eq!(rows[0].final_modularity, run.final_modularity());
        assert_eq!(rows[0].num_communities, run.partition.num_communities());
        assert_eq!(rows[0].speedup_vs_first, 1.0);
    }
}
