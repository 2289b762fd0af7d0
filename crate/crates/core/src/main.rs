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
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use topicnet::corpus::CorpusFormat;
use topicnet::pipeline::{self, GammaChoice, PartialConfig, Run};
use topicnet::{Error, Result};

/// Topic co-occurrence networks: construction, communities, temporal
/// trajectories and scoring against an outside series.
#[derive(Parser, Debug)]
#[command(name = "topicnet", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Full-span networks, node metadata and graph metrics.
    Build(Shared),
    /// Classification and data-driven partitions.
    Communities(Shared),
    /// Sliding-window trajectories against a date-permutation null.
    Temporal(Shared),
    /// Strength-preserving rewired null networks.
    Nulls(Shared),
    /// Partial correlations with a yearly impact series (needs --impact).
    Score(Shared),
    /// Every stage plus a combined report.json.
    Report(Shared),
}

#[derive(Args, Debug)]
struct Shared {
    /// Corpus file (JSONL or CSV).
    #[arg(long)]
    input: Option<PathBuf>,
    /// Corpus format; guessed from the extension when omitted.
    #[arg(long)]
    format: Option<CorpusFormat>,
    /// Vocabulary size; several values run a sensitivity sweep.
    #[arg(long = "n", num_args = 1..)]
    n: Vec<usize>,
    /// Resolution parameter, or `auto` to sweep against the classifications.
    #[arg(long)]
    gamma: Option<GammaChoice>,
    /// Consensus partitions per grid value in the resolution sweep.
    #[arg(long)]
    gamma_repeats: Option<usize>,
    /// Louvain runs behind each consensus in the resolution sweep.
    #[arg(long)]
    gamma_runs: Option<usize>,
    /// Louvain runs behind the reported consensus partition.
    #[arg(long)]
    runs: Option<usize>,
    /// Null ensemble size.
    #[arg(long)]
    nulls: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Window half-width in months.
    #[arg(long)]
    half_width: Option<u32>,
    /// Window step in months.
    #[arg(long)]
    step: Option<u32>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads; results do not depend on this.
    #[arg(long)]
    threads: Option<usize>,
    /// `key = value` file; flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Yearly CSV with `year` and `impact_factor` columns.
    #[arg(long)]
    impact: Option<PathBuf>,
}

impl Shared {
    fn resolve(self) -> Result<pipeline::RunConfig> {
        let file = match &self.config {
            Some(path) => {
                let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
                PartialConfig::parse_file(&text)?
            }
            None => PartialConfig::default(),
        };
        let flags = PartialConfig {
            input: self.input,
            format: self.format,
            n: (!self.n.is_empty()).then_some(self.n),
            half_width: self.half_width,
            step: self.step,
            gamma: self.gamma,
            gamma_repeats: self.gamma_repeats,
            gamma_runs: self.gamma_runs,
            runs: self.runs,
            nulls: self.nulls,
            seed: self.seed,
            out: self.out,
            threads: self.threads,
            impact: self.impact,
        };
        file.overridden_by(flags).resolve()
    }
}

fn print<T: Serialize>(value: &T) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

fn execute(command: Command) -> Result<()> {
    let (shared, stage): (Shared, fn(&Run) -> Result<()>) = match command {
        Command::Build(s) => (s, |r| print(&pipeline::cmd_build(r)?)),
        Command::Communities(s) => (s, |r| print(&pipeline::cmd_communities(r)?)),
        Command::Temporal(s) => (s, |r| print(&pipeline::cmd_temporal(r)?)),
        Command::Nulls(s) => (s, |r| print(&pipeline::cmd_nulls(r)?)),
        Command::Score(s) => (s, |r| print(&pipeline::cmd_score(r)?)),
        Command::Report(s) => (s, |r| print(&pipeline::cmd_report(r)?)),
    };
    let config = shared.resolve()?;
    if let Some(threads) = config.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| Error::Usage(format!("thread pool: {e}")))?;
    }
    let run = Run::load(config)?;
    log::info!("manifest {}", run.manifest_hash);
    stage(&run)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
