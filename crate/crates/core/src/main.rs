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

use clap::{Parser, Subcommand};

use shiftnet::pipeline::{self, PipelineConfig, Stage, Workspace};
use shiftnet::{Error, Result};

#[derive(Parser)]
#[command(
    name = "shiftnet",
    version,
    about = "Predict community shifts in two-period retweet networks"
)]
struct Cli {
    /// TOML configuration; defaults to the built-in synthetic setup.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory for all stage artifacts.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Master seed; every stage seed is derived from it.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (0 = all cores). Results do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Stratify the train/test split by target (the default).
    #[arg(long, global = true, overrides_with = "no_stratified")]
    stratified: bool,
    #[arg(long, global = true, overrides_with = "stratified")]
    no_stratified: bool,
    /// Keep only records in this language.
    #[arg(long, global = true)]
    lang: Option<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Generate a synthetic two-period corpus.
    Synth,
    /// Parse records and split them into the two periods.
    Ingest,
    /// Build retweet graphs and node metrics.
    Graph,
    /// Consensus communities, matching and eligibility.
    Communities,
    /// tf-idf, NMF and user topic profiles.
    Topics,
    /// Assemble the labeled dataset and its split.
    Features,
    /// Hyperparameter search and final models.
    Train,
    /// ROC/AUC, baselines, importance and the PageRank gap.
    Evaluate,
    /// Persuasive topics and community flows.
    Report,
    /// Every stage in order.
    Pipeline,
    /// Print the effective configuration as TOML.
    PrintConfig,
}

fn stage_of(c: Command) -> Option<Stage> {
    Some(match c {
        Command::Synth => Stage::Synth,
        Command::Ingest => Stage::Ingest,
        Command::Graph => Stage::Graph,
        Command::Communities => Stage::Communities,
        Command::Topics => Stage::Topics,
        Command::Features => Stage::Features,
        Command::Train => Stage::Train,
        Command::Evaluate => Stage::Evaluate,
        Command::Report => Stage::Report,
        Command::Pipeline | Command::PrintConfig => return None,
    })
}

fn effective_config(cli: &Cli) -> Result<PipelineConfig> {
    let mut cfg = match &cli.config {
        Some(p) => PipelineConfig::load(p)?,
        None => PipelineConfig::default(),
    };
    if let Some(o) = &cli.out {
        cfg.out_dir = o.clone();
    }
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(t) = cli.threads {
        cfg.threads = t;
    }
    if cli.stratified {
        cfg.model.stratified = true;
    }
    if cli.no_stratified {
        cfg.model.stratified = false;
    }
    if let Some(l) = &cli.lang {
        cfg.input.lang = Some(l.clone());
    }
    Ok(cfg)
}

fn run(cli: &Cli) -> Result<()> {
    let cfg = effective_config(cli)?;
    if let Command::PrintConfig = cli.command {
        print!("{}", cfg.to_toml()?);
        return Ok(());
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.threads)
        .build()
        .map_err(|e| Error::Internal(format!("thread pool: {e}")))?;
    pool.install(|| match stage_of(cli.command) {
        Some(stage) => pipeline::run_stage(stage, &cfg),
        None => {
            pipeline::run_pipeline(&cfg)?;
            let ws = Workspace::new(&cfg);
            let s = pipeline::load_summary(&ws)?;
            for (model, auc) in &s.auc {
                println!("auc {model:<7} {auc:.4}");
            }
            println!(
                "pagerank ratio (non-shifting / shifting) {:.3}",
                s.pagerank_ratio
            );
            println!(
                "top feature {} (AUC drop {:.4})",
                s.top_feature, s.top_feature_drop
            );
            println!(
                "top persuasive topic {} [{}]",
                s.top_persuasive_topic,
                s.top_persuasive_terms
                    .iter()
                    .take(5)
                    .cloned()
                    .collect::<Vec<_>>()
                    .join(", ")
            );
            println!("artifacts in {}", cfg.out_dir.display());
            Ok(())
        }
    })
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
