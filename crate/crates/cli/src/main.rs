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


use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use ldleiden::bench::{self, Baseline, RunConfig, SweepAxis};
use ldleiden::ingest::{self, BatchMode, BatchPlan};
use ldleiden::{DecouplePolicy, Params};

#[derive(Parser)]
#[command(name = "ldleiden", version, about = "Dynamic, locality-bounded Leiden community detection")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Replay an edge stream batch by batch and record metrics.
    Run(Core),
    /// Repeat a run over several thread counts or batch sizes.
    Sweep {
        #[arg(long, value_enum)]
        axis: Axis,
        /// Thread counts, or batch fractions / counts (values above 1 are counts).
        #[arg(long, num_args = 1.., value_delimiter = ',', required = true)]
        values: Vec<f64>,
        #[command(flatten)]
        core: Core,
    },
}

#[derive(Copy, Clone, ValueEnum)]
enum Axis {
    Threads,
    Batch,
}

#[derive(Copy, Clone, ValueEnum)]
enum Policy {
    Break,
    Skip,
}

#[derive(Copy, Clone, ValueEnum)]
enum BaselineArg {
    None,
    Scratch,
    Warm,
}

#[derive(Copy, Clone, ValueEnum)]
enum Weights {
    Int,
    Float,
}

#[derive(Args)]
struct Core {
    /// Edge-list file (plain or gzip).
    #[arg(long)]
    input: PathBuf,
    /// Number of equal-length batches.
    #[arg(long, conflicts_with = "batch_fraction")]
    batches: Option<usize>,
    /// Fraction of the edges per batch.
    #[arg(long)]
    batch_fraction: Option<f64>,
    #[arg(long, conflicts_with = "undirected")]
    directed: bool,
    /// Mirror every edge (default).
    #[arg(long)]
    undirected: bool,
    /// Sort by timestamp before splitting.
    #[arg(long, conflicts_with = "static_order")]
    temporal: bool,
    /// Shuffle globally before splitting (default).
    #[arg(long = "static")]
    static_order: bool,
    /// Collapse repeated edges to their first occurrence.
    #[arg(long)]
    dedup: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, env = "LDLEIDEN_THREADS", default_value_t = 1)]
    threads: usize,
    #[arg(long, default_value_t = 1.0)]
    gamma: f64,
    #[arg(long, default_value_t = 4)]
    levels: u8,
    #[arg(long, default_value_t = 2)]
    outer: usize,
    #[arg(long, default_value_t = 5)]
    inner: usize,
    #[arg(long, default_value_t = 0.001)]
    alpha: f64,
    #[arg(long, default_value_t = 0.01)]
    beta: f64,
    #[arg(long, value_enum, default_value = "skip")]
    decouple: Policy,
    /// Cross-check every batch against the oracle.
    #[arg(long)]
    verify: bool,
    /// Reference run for the runtime and modularity ratio columns.
    #[arg(long, value_enum, default_value = "none")]
    baseline: BaselineArg,
    /// Shorthand for `--baseline warm`.
    #[arg(long)]
    baseline_warm: bool,
    #[arg(long, value_enum, default_value = "int")]
    weights: Weights,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

impl Core {
    fn config(&self) -> Result<RunConfig> {
        let mode = match (self.batches, self.batch_fraction) {
            (Some(b), None) => BatchMode::Count(b),
            (None, Some(f)) => BatchMode::Fraction(f),
            (None, None) => BatchMode::Count(1),
            (Some(_), Some(_)) => bail!("--batches and --batch-fraction are exclusive"),
        };
        let params = Params {
            gamma: self.gamma,
            levels: self.levels,
            outer: self.outer,
            inner: self.inner,
            alpha: self.alpha,
            beta: self.beta,
            decouple: match self.decouple {
                Policy::Break => DecouplePolicy::Break,
                Policy::Skip => DecouplePolicy::Skip,
            },
            threads: self.threads,
            seed: self.seed,
        };
        params.validate()?;
        let baseline = match (self.baseline_warm, self.baseline) {
            (true, _) | (_, BaselineArg::Warm) => Baseline::Warm,
            (false, BaselineArg::Scratch) => Baseline::Scratch,
            (false, BaselineArg::None) => Baseline::None,
        };
        Ok(RunConfig {
            input: self.input.clone(),
            plan: BatchPlan { mode, seed: self.seed, temporal: self.temporal, directed: self.directed, dedup: self.dedup },
            params,
            verify: self.verify,
            baseline,
            out_dir: Some(self.out.clone()),
        })
    }
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    match cli.command {
        Command::Run(core) => {
            let config = core.config()?;
            let records = ingest::read_edge_file(&config.input)
                .with_context(|| format!("reading {}", config.input.display()))?;
            let run = match core.weights {
                Weights::Int => bench::run_records::<i64>(&records, &config)?,
                Weights::Float => bench::run_records::<f64>(&records, &config)?,
            };
            println!(
                "batches={} total_runtime_seconds={:.6} final_modularity={:.6} communities={}",
                run.metrics.len(),
                run.total_runtime(),
                run.final_modularity(),
                run.partition.num_communities()
            );
            if let (Some(dt), Some(dq)) = (run.runtime_ratio(), run.modularity_ratio()) {
                println!("runtime_ratio={dt:.3} modularity_ratio={dq:.4}");
            }
            println!("wrote {}", config.out_dir.as_deref().unwrap_or(std::path::Path::new(".")).display());
        }
        Command::Sweep { axis, values, core } => {
            let config = core.config()?;
            let axis = match axis {
                Axis::Threads => {
                    if values.iter().any(|&v| v < 1.0 || v.fract() != 0.0) {
                        bail!("thread counts must be positive integers");
                    }
                    SweepAxis::Threads(values.iter().map(|&v| v as usize).collect())
                }
                Axis::Batch => SweepAxis::Batch(
                    values
                        .iter()
                        .map(|&v| if v > 1.0 { BatchMode::Count(v as usize) } else { BatchMode::Fraction(v) })
                        .collect(),
                ),
            };
            let records = ingest::read_edge_file(&config.input)
                .with_context(|| format!("reading {}", config.input.display()))?;
            let rows = match core.weights {
                Weights::Int => bench::sweep_records::<i64>(&records, &config, &axis)?,
                Weights::Float => bench::sweep_records::<f64>(&records, &config, &axis)?,
            };
            for r in &rows {
                println!(
                    "{}={} batches={} mean_batch_runtime_seconds={:.6} final_modularity={:.6} speedup_vs_first={:.3}",
                    r.axis, r.value, r.batches, r.mean_batch_runtime_seconds, r.final_modularity, r.speedup_vs_first
                );
            }
        }
    }
    Ok(())
}
