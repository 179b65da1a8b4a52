//! `sage`: prompt selection, evaluation and synthetic worlds from the command line.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use sage_core::parallel::{threads_from_env, with_threads};
use sage_core::{Error, ErrorCategory, Preset, RandomScope};

#[derive(Debug, Parser)]
#[command(name = "sage", version, about = "Separation-scored prompt selection for zero-shot classifiers")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Predict with one variant and evaluate against the bundle labels.
    Predict(PredictArgs),
    /// Sweep K for SAGE and random selection, plus the full ensemble.
    Ablate(AblateArgs),
    /// Correlate mean separation score with worst-group accuracy per template.
    Correlate(CorrelateArgs),
    /// Count how often each template is selected, overall and per class.
    Freq(FreqArgs),
    /// Generate a synthetic spurious-bias world as a bundle.
    Synth(SynthArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum VariantKind {
    Sage,
    Vanilla,
    Ensemble,
    Random,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ScopeArg {
    Image,
    Dataset,
}

impl From<ScopeArg> for RandomScope {
    fn from(s: ScopeArg) -> Self {
        match s {
            ScopeArg::Image => RandomScope::Image,
            ScopeArg::Dataset => RandomScope::Dataset,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum PresetArg {
    Theorem,
    Ladder,
    Clean,
}

impl From<PresetArg> for Preset {
    fn from(p: PresetArg) -> Self {
        match p {
            PresetArg::Theorem => Preset::Theorem,
            PresetArg::Ladder => Preset::Ladder,
            PresetArg::Clean => Preset::Clean,
        }
    }
}

#[derive(Debug, Args)]
struct BundleArgs {
    /// Bundle directory (manifest.json, images.npy, texts.npy, labels.csv).
    bundle: PathBuf,
    /// Output directory; created if missing.
    #[arg(long)]
    out: PathBuf,
    /// Reuse or write the similarity tensor as sim_cache.npy in the bundle directory.
    #[arg(long)]
    cache_sim: bool,
}

#[derive(Debug, Args)]
struct PredictArgs {
    #[command(flatten)]
    io: BundleArgs,
    #[arg(long, value_enum, default_value = "sage")]
    variant: VariantKind,
    /// Templates per image (sage, random). Defaults to 1.
    #[arg(long)]
    k: Option<usize>,
    /// Template index (vanilla only).
    #[arg(long)]
    template: Option<usize>,
    /// Base seed (random only).
    #[arg(long)]
    seed: Option<u64>,
    /// Number of random runs (random only).
    #[arg(long)]
    runs: Option<usize>,
    /// Draw one subset per image or one per run (random only).
    #[arg(long, value_enum)]
    random_scope: Option<ScopeArg>,
}

#[derive(Debug, Args)]
struct AblateArgs {
    #[command(flatten)]
    io: BundleArgs,
    /// Comma-separated K values.
    #[arg(long, value_delimiter = ',', default_value = "1,5,20,40,80")]
    ks: Vec<String>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Random runs averaged per K.
    #[arg(long, default_value_t = 5)]
    runs: usize,
    #[arg(long, value_enum, default_value = "image")]
    random_scope: ScopeArg,
}

#[derive(Debug, Args)]
struct CorrelateArgs {
    #[command(flatten)]
    io: BundleArgs,
}

#[derive(Debug, Args)]
struct FreqArgs {
    #[command(flatten)]
    io: BundleArgs,
    #[arg(long, default_value_t = 1)]
    k: usize,
}

#[derive(Debug, Args)]
struct SynthArgs {
    #[arg(long, value_enum)]
    preset: PresetArg,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Bundle directory to write.
    #[arg(long)]
    out: PathBuf,
}

fn exit_code(category: ErrorCategory) -> u8 {
    match category {
        ErrorCategory::Config => 2,
        ErrorCategory::Data => 3,
        ErrorCategory::Metric => 4,
        ErrorCategory::Io => 1,
    }
}

fn category_name(category: ErrorCategory) -> &'static str {
    match category {
        ErrorCategory::Config => "config",
        ErrorCategory::Data => "data",
        ErrorCategory::Metric => "metric",
        ErrorCategory::Io => "io",
    }
}

/// One line on stderr: `error kind=<Kind> category=<cat> exit=<code> message="<json string>"`.
fn report_failure(kind: &str, category: ErrorCategory, message: &str) -> ExitCode {
    let code = exit_code(category);
    let quoted = serde_json::to_string(message).unwrap_or_else(|_| "\"\"".into());
    eprintln!("error kind={kind} category={} exit={code} message={quoted}", category_name(category));
    ExitCode::from(code)
}

fn run(command: Command) -> Result<(), Error> {
    match command {
        Command::Predict(args) => commands::predict(args),
        Command::Ablate(args) => commands::ablate(args),
        Command::Correlate(args) => commands::correlate(args),
        Command::Freq(args) => commands::freq(args),
        Command::Synth(args) => commands::synth(args),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn"))
        .format_timestamp(None)
        .init();

    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            print!("{e}");
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let rendered = e.to_string();
            let first = rendered.lines().next().unwrap_or("invalid arguments");
            let message = first.strip_prefix("error: ").unwrap_or(first);
            return report_failure("UsageError", ErrorCategory::Config, message);
        }
    };

    let result = threads_from_env().and_then(|threads| match threads {
        Some(n) => with_threads(n, || run(cli.command)).and_then(|r| r),
        None => run(cli.command),
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => report_failure(e.kind(), e.category(), &e.to_string()),
    }
}
