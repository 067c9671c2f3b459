//! `seasonmatch <subcommand> --config <file> [overrides]`.
//!
//! Every flag maps to a config key; flags are applied after the file, and
//! `--set key=value` reaches any key without a dedicated flag.

pub mod config;
pub mod stages;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

pub use config::{ConfigMap, CorpusSource, RunConfig};
pub use stages::{fresh_model, run_stage, Stage};

use crate::error::{Error, Result};
use crate::parallel::Parallelism;

#[derive(Debug, Parser)]
#[command(name = "seasonmatch", version, about = "Cross-season place recognition pipeline")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate the synthetic multi-condition corpus.
    Synth(StageArgs),
    /// Ingest, filter and align traverses.
    Preprocess(StageArgs),
    /// Split frame indices into train and test sets.
    Partition(StageArgs),
    /// Sample training pairs or triplets.
    Mine(StageArgs),
    /// Train the embedding.
    Train(StageArgs),
    /// Write descriptors for every frame.
    Embed(StageArgs),
    /// Cross-season retrieval on the test frames.
    Evaluate(StageArgs),
    /// Render tables and charts from the evaluation.
    Report(StageArgs),
}

#[derive(Debug, Default, Args)]
pub struct StageArgs {
    /// Config file of `key = value` lines.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// run.out_dir
    #[arg(long)]
    pub out_dir: Option<String>,
    /// filter.speed_min (km/h)
    #[arg(long)]
    pub speed_min: Option<String>,
    /// filter.darkness_min (mean intensity)
    #[arg(long)]
    pub darkness_min: Option<String>,
    /// partition.buffer (frames)
    #[arg(long)]
    pub buffer: Option<String>,
    /// partition.test_segments, `a:b,c:d,...`
    #[arg(long)]
    pub test_segments: Option<String>,
    /// align.tol_m (meters)
    #[arg(long)]
    pub align_tol_m: Option<String>,
    /// seed
    #[arg(long)]
    pub seed: Option<String>,
    /// train.loss (triplet|contrastive)
    #[arg(long)]
    pub loss: Option<String>,
    /// train.epochs
    #[arg(long)]
    pub epochs: Option<String>,
    /// train.margin
    #[arg(long)]
    pub margin: Option<String>,
    /// train.fine_tune
    #[arg(long)]
    pub fine_tune: bool,
    /// train.lr
    #[arg(long)]
    pub lr: Option<String>,
    /// train.batch_size
    #[arg(long)]
    pub batch_size: Option<String>,
    /// mine.n_pairs
    #[arg(long)]
    pub n_pairs: Option<String>,
    /// mine.n_triplets
    #[arg(long)]
    pub n_triplets: Option<String>,
    /// eval.tolerance (frames)
    #[arg(long)]
    pub tolerance: Option<String>,
    /// Any config key, repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
}

impl StageArgs {
    /// Defaults, then the config file, then flags.
    pub fn config_map(&self) -> Result<ConfigMap> {
        let mut m = ConfigMap::default();
        if let Some(path) = &self.config {
            if !path.is_file() {
                return Err(Error::config(format!("config file {} does not exist", path.display())));
            }
            m.apply_file(path)?;
        }
        let flags = [
            ("run.out_dir", &self.out_dir),
            ("filter.speed_min", &self.speed_min),
            ("filter.darkness_min", &self.darkness_min),
            ("partition.buffer", &self.buffer),
            ("partition.test_segments", &self.test_segments),
            ("align.tol_m", &self.align_tol_m),
            ("seed", &self.seed),
            ("train.loss", &self.loss),
            ("train.epochs", &self.epochs),
            ("train.margin", &self.margin),
            ("train.lr", &self.lr),
            ("train.batch_size", &self.batch_size),
            ("mine.n_pairs", &self.n_pairs),
            ("mine.n_triplets", &self.n_triplets),
            ("eval.tolerance", &self.tolerance),
        ];
        for (key, value) in flags {
            if let Some(v) = value {
                m.set(key, v)?;
            }
        }
        if self.fine_tune {
            m.set("train.fine_tune", "true")?;
        }
        for kv in &self.set {
            m.apply_override(kv)?;
        }
        Ok(m)
    }
}

impl Command {
    pub fn split(&self) -> (Stage, &StageArgs) {
        match self {
            Command::Synth(a) => (Stage::Synth, a),
            Command::Preprocess(a) => (Stage::Preprocess, a),
            Command::Partition(a) => (Stage::Partition, a),
            Command::Mine(a) => (Stage::Mine, a),
            Command::Train(a) => (Stage::Train, a),
            Command::Embed(a) => (Stage::Embed, a),
            Command::Evaluate(a) => (Stage::Evaluate, a),
            Command::Report(a) => (Stage::Report, a),
        }
    }
}

/// Parse arguments and run one stage. Returns the process exit code:
/// 0 ok, 1 usage, 2 data error, 3 numerical failure.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let (stage, args) = cli.command.split();
    let result = args
        .config_map()
        .and_then(|m| m.resolve())
        .and_then(|cfg| Ok((cfg, Parallelism::from_env()?)))
        .and_then(|(cfg, par)| run_stage(stage, &cfg, &par).map(|files| (cfg, files)));
    match result {
        Ok((cfg, files)) => {
            if stage == Stage::Report {
                let table = cfg.out_dir.join(stages::REPORT_DIR).join(crate::report::FC_TABLE);
                if let Ok(text) = std::fs::read_to_string(table) {
                    print!("{text}");
                }
            }
            log::info!("{} done ({} files)", stage.name(), files.len());
            0
        }
        Err(e) => {
            eprintln!("seasonmatch {}: {e}", stage.name());
            e.exit_code()
        }
    }
}
