//! Command-line front end; all logic lives in the library.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use exitlens::harness::{run, Command, RunConfig};
use exitlens::signals::SignalKind;
use exitlens::trace::CaptureLevel;
use exitlens::{Error, ErrorKind};

#[derive(Parser)]
#[command(
    name = "exitlens",
    about = "Early-exit suitability profiling for decoder-only transformers",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Aggregate layer-to-final similarity profiles over a prompt set.
    Profile(CommonArgs),
    /// Compute the early-exit adaptability score.
    Eas(CommonArgs),
    /// Oracle early-exit evaluation at a fixed threshold.
    Oracle(CommonArgs),
    /// Linear threshold search maximizing skip under a loss budget.
    Search(CommonArgs),
    /// Full-depth task accuracy.
    Eval(CommonArgs),
    /// Recompute profile and score from a trace archive.
    Replay(CommonArgs),
}

#[derive(Args)]
struct CommonArgs {
    /// Path to a weight manifest.
    #[arg(long)]
    model: Option<PathBuf>,

    /// Path to a line-delimited dataset file.
    #[arg(long)]
    dataset: Option<PathBuf>,

    /// Task kind of the dataset.
    #[arg(long, value_parser = ["gsm8k", "mmlu", "gpqa", "humaneval"])]
    task: Option<String>,

    /// Trace archive to replay.
    #[arg(long)]
    trace: Option<PathBuf>,

    /// Prompts to sample from the dataset.
    #[arg(long, default_value_t = 100)]
    subset_n: usize,

    /// Subset-selection seed string.
    #[arg(long, default_value = "0")]
    seed: String,

    /// Generation budget per prompt.
    #[arg(long, default_value_t = 1024)]
    max_tokens: usize,

    /// Comma-separated signals to profile: hidden,logits,topk.
    #[arg(long, default_value = "hidden,logits,topk")]
    signal: String,

    /// K for the candidate-set signal.
    #[arg(long, default_value_t = 10)]
    topk: usize,

    /// Similarity-vs-skip weighting for the adaptability score.
    #[arg(long, default_value_t = 0.5)]
    alpha: f64,

    /// Exit threshold for the oracle command.
    #[arg(long, default_value_t = 0.9)]
    delta: f64,

    /// Threshold grid lo:hi:step for the search command.
    #[arg(long, default_value = "0.5:1.0:0.01")]
    grid: String,

    /// Accuracy-loss budget (absolute points on the 0..1 scale).
    #[arg(long, default_value_t = 0.05)]
    max_loss: f64,

    /// Trace archive emission level.
    #[arg(long, default_value = "none", value_parser = ["none", "topk", "full"])]
    capture: String,

    /// Skip the final norm when lens-projecting intermediate layers.
    #[arg(long)]
    no_lens_norm: bool,

    /// Compare softmax probabilities instead of raw logits.
    #[arg(long)]
    softmax_logits: bool,

    /// Baseline eas.json for relative comparison.
    #[arg(long)]
    baseline: Option<PathBuf>,

    /// Output directory.
    #[arg(long, default_value = "exitlens-out")]
    out: PathBuf,

    /// Worker threads for prompt-level parallelism.
    #[arg(long)]
    workers: Option<usize>,
}

fn parse_signals(spec: &str, top_k: usize) -> Result<Vec<SignalKind>, Error> {
    spec.split(',')
        .map(|s| match s.trim() {
            "hidden" => Ok(SignalKind::HiddenState),
            "logits" => Ok(SignalKind::OutputLogits),
            "topk" => Ok(SignalKind::TopK { k: top_k }),
            other => Err(Error::InvalidParam {
                reason: format!("unknown signal `{other}` (use hidden, logits, topk)"),
            }),
        })
        .collect()
}

fn parse_grid(spec: &str) -> Result<(f64, f64, f64), Error> {
    let parts: Vec<&str> = spec.split(':').collect();
    let bad = || Error::InvalidParam {
        reason: format!("grid must be lo:hi:step, got `{spec}`"),
    };
    if parts.len() != 3 {
        return Err(bad());
    }
    let lo = parts[0].parse().map_err(|_| bad())?;
    let hi = parts[1].parse().map_err(|_| bad())?;
    let step = parts[2].parse().map_err(|_| bad())?;
    Ok((lo, hi, step))
}

fn build_config(args: &CommonArgs) -> Result<RunConfig, Error> {
    let signals = parse_signals(&args.signal, args.topk)?;
    let capture = match args.capture.as_str() {
        "none" => CaptureLevel::None,
        "topk" => CaptureLevel::TopK,
        "full" => CaptureLevel::Full,
        other => {
            return Err(Error::InvalidParam {
                reason: format!("unknown capture level `{other}`"),
            })
        }
    };
    let task = args.task.as_deref().map(str::parse).transpose()?;
    Ok(RunConfig {
        model: args.model.clone(),
        dataset: args.dataset.clone(),
        task,
        trace: args.trace.clone(),
        subset_n: args.subset_n,
        seed: args.seed.clone(),
        max_tokens: args.max_tokens,
        signals,
        top_k: args.topk,
        alpha: args.alpha,
        eas_signal: SignalKind::OutputLogits,
        delta: args.delta,
        grid: parse_grid(&args.grid)?,
        max_loss: args.max_loss,
        capture,
        lens_final_norm: !args.no_lens_norm,
        softmax_logits: args.softmax_logits,
        baseline: args.baseline.clone(),
        out_dir: args.out.clone(),
        workers: args.workers,
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (args, command) = match &cli.command {
        Cmd::Profile(a) => (a, Command::Profile),
        Cmd::Eas(a) => (a, Command::Eas),
        Cmd::Oracle(a) => (a, Command::Oracle),
        Cmd::Search(a) => (a, Command::Search),
        Cmd::Eval(a) => (a, Command::Eval),
        Cmd::Replay(a) => (a, Command::Replay),
    };

    let config = match build_config(args) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    };
    match run(&config, command) {
        Ok(summary) => {
            println!("{}", summary.headline);
            for f in &summary.files {
                println!("wrote {}", f.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            match e.kind() {
                ErrorKind::Validation => ExitCode::from(1),
                ErrorKind::Runtime => ExitCode::from(2),
            }
        }
    }
}
