//! Command-line front end. Every command resolves its paths against
//! `--workdir` and writes a [`RunManifest`] next to its outputs.
//!
//! Exit codes: 0 success, 1 runtime error, 2 usage or configuration error,
//! 3 failed acceptance check.

mod commands;
mod manifest;

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

pub use manifest::RunManifest;

use crate::negatives::Strategy;

/// Environment variable naming the default WordNet directory.
pub const WORDNET_ENV: &str = "CLOVE_WORDNET";

#[derive(Debug, Parser)]
#[command(name = "clove", version, about = "Hard-negative captions, contrastive fine-tuning and weight patching")]
pub struct Cli {
    /// Directory that relative paths are resolved against.
    #[arg(long, global = true, default_value = ".")]
    pub workdir: PathBuf,
    /// Worker threads for parallel stages (defaults to the core count).
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// Single-threaded, synchronous execution for bit-identical reruns.
    #[arg(long, global = true)]
    pub strict_determinism: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Count caption words into a frequency table (TSV).
    BuildFreq(BuildFreqArgs),
    /// Attach hard-negative captions to JSONL records.
    GenNegatives(GenNegativesArgs),
    /// Inspect the shard pipeline.
    Pipe {
        #[command(subcommand)]
        command: PipeCommand,
    },
    /// Train or fine-tune the two-tower model.
    Train(TrainArgs),
    /// Interpolate two checkpoints.
    Patch(PatchArgs),
    /// Evaluate patched models over a grid of mixing weights.
    Sweep(SweepArgs),
    /// Evaluate a checkpoint on a task or suite.
    Eval(EvalArgs),
    /// Run the desk-scale tradeoff experiment end to end.
    DemoTradeoff(DemoArgs),
}

#[derive(Debug, Subcommand)]
pub enum PipeCommand {
    /// Draw records with replacement and print them as JSONL.
    Sample(SampleArgs),
}

#[derive(Debug, Args)]
pub struct BuildFreqArgs {
    /// Shard files or glob patterns.
    #[arg(long, required = true, num_args = 1..)]
    pub input: Vec<String>,
    #[arg(long)]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct GenNegativesArgs {
    /// Shard files or glob patterns.
    #[arg(long, required = true, num_args = 1..)]
    pub input: Vec<String>,
    /// WordNet dictionary directory; the bundled fixture when unset.
    #[arg(long, env = WORDNET_ENV)]
    pub wordnet: Option<PathBuf>,
    /// Frequency table from `build-freq`.
    #[arg(long)]
    pub freq: PathBuf,
    /// Generator settings (TOML); flags override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Comma-separated subset of replace, swap, negate, shuffle.
    #[arg(long, value_delimiter = ',', value_parser = parse_strategy)]
    pub strategies: Option<Vec<Strategy>>,
    /// One positive weight per strategy, comma-separated.
    #[arg(long, value_delimiter = ',')]
    pub weights: Option<Vec<f64>>,
    #[arg(long)]
    pub per_caption: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub output: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Mixing {
    /// Shards of every pattern form one pool.
    Concatenate,
    /// Each pattern is a dataset; datasets are picked with equal probability.
    Uniform,
}

#[derive(Debug, Args)]
pub struct SampleArgs {
    /// Shard files or glob patterns; repeat for several datasets.
    #[arg(long, required = true, num_args = 1..)]
    pub shards: Vec<String>,
    #[arg(long)]
    pub n: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t = Mixing::Concatenate)]
    pub mixing: Mixing,
    /// Write here instead of standard output.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Switch {
    On,
    Off,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Training settings (TOML).
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Shard files or glob patterns.
    #[arg(long, required = true, num_args = 1..)]
    pub shards: Vec<String>,
    #[arg(long, value_enum)]
    pub negatives: Option<Switch>,
    /// Generate negatives on the fly for records without any, using this
    /// frequency table.
    #[arg(long)]
    pub freq: Option<PathBuf>,
    #[arg(long, env = WORDNET_ENV)]
    pub wordnet: Option<PathBuf>,
    /// Start from this checkpoint instead of a random init.
    #[arg(long)]
    pub init: Option<PathBuf>,
    /// Vocabulary file; built from the shards when unset.
    #[arg(long)]
    pub vocab: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: PathBuf,
    /// Metrics CSV; defaults to the checkpoint path with `.metrics.csv`.
    #[arg(long)]
    pub metrics: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PatchArgs {
    #[arg(long)]
    pub pt: PathBuf,
    #[arg(long)]
    pub ft: PathBuf,
    #[arg(long, allow_negative_numbers = true)]
    pub alpha: f64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[arg(long)]
    pub pt: PathBuf,
    #[arg(long)]
    pub ft: PathBuf,
    /// Grid spacing; must divide 1.
    #[arg(long, default_value_t = 0.05, conflicts_with = "alphas")]
    pub step: f64,
    /// Explicit grid, comma-separated.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub alphas: Option<Vec<f64>>,
    /// Task descriptor or suite.
    #[arg(long)]
    pub tasks: PathBuf,
    /// Vocabulary; defaults to the sidecar of `--pt`, else `vocab.txt` beside it.
    #[arg(long)]
    pub vocab: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Task descriptor or suite.
    #[arg(long)]
    pub task: PathBuf,
    /// Vocabulary; defaults to the sidecar of `--model`, else `vocab.txt` beside it.
    #[arg(long)]
    pub vocab: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct DemoArgs {
    /// Experiment settings (TOML); flags override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Also fine-tune without negatives.
    #[arg(long)]
    pub ablation: bool,
    /// Exit with status 3 when any acceptance predicate fails.
    #[arg(long)]
    pub check: bool,
    #[arg(long, env = WORDNET_ENV)]
    pub wordnet: Option<PathBuf>,
    /// Output directory.
    #[arg(long, default_value = "demo")]
    pub out: PathBuf,
}

fn parse_strategy(s: &str) -> Result<Strategy, String> {
    s.parse().map_err(|e: crate::negatives::NegativesError| e.to_string())
}

/// A failed command and the exit status it maps to.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Runtime(String),
    #[error("acceptance check failed: {0}")]
    CheckFailed(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Runtime(_) => 1,
            CliError::Usage(_) => 2,
            CliError::CheckFailed(_) => 3,
        }
    }
}

/// Resolves relative paths against the work directory.
#[derive(Debug, Clone)]
pub struct Context {
    pub workdir: PathBuf,
    pub strict: bool,
}

impl Context {
    pub fn path(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.workdir.join(p)
        }
    }

    pub fn pattern(&self, p: &str) -> String {
        self.path(Path::new(p)).to_string_lossy().into_owned()
    }
}

/// Parses `args` (program name first), runs the command and returns the
/// exit status. Usage errors and `--help` are printed by clap.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match execute(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn execute(cli: Cli) -> Result<(), CliError> {
    let jobs = if cli.strict_determinism { Some(1) } else { cli.jobs };
    if let Some(n) = jobs {
        if n == 0 {
            return Err(CliError::Usage("--jobs must be at least 1".into()));
        }
        // A second call in the same process keeps the first pool.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    let ctx = Context {
        workdir: cli.workdir,
        strict: cli.strict_determinism,
    };
    match cli.command {
        Command::BuildFreq(a) => commands::build_freq(&ctx, a),
        Command::GenNegatives(a) => commands::gen_negatives(&ctx, a),
        Command::Pipe {
            command: PipeCommand::Sample(a),
        } => commands::pipe_sample(&ctx, a),
        Command::Train(a) => commands::train(&ctx, a),
        Command::Patch(a) => commands::patch(&ctx, a),
        Command::Sweep(a) => commands::sweep(&ctx, a),
        Command::Eval(a) => commands::eval(&ctx, a),
        Command::DemoTradeoff(a) => commands::demo(&ctx, a),
    }
}

/// The vocabulary file stored next to a checkpoint.
pub fn vocab_sidecar(checkpoint: &Path) -> PathBuf {
    checkpoint.with_extension("vocab.txt")
}

/// The sidecar when present, else a shared `vocab.txt` beside the checkpoint.
pub fn default_vocab(checkpoint: &Path) -> Option<PathBuf> {
    [vocab_sidecar(checkpoint), checkpoint.with_file_name("vocab.txt")]
        .into_iter()
        .find(|p| p.exists())
}
