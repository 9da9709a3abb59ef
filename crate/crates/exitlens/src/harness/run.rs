//! End-to-end pipelines behind the CLI subcommands.

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::adaptability::{eas, relative_eas, EasParams, EasReport, SimilarityMapping};
use crate::error::{Error, Result};
use crate::eval::{render_prompt, Evaluator, TaskItem, TaskKind};
use crate::harness::archive::TraceArchive;
use crate::harness::dataset::{load_dataset, select_subset};
use crate::harness::report::{
    eas_csv_rows, profile_csv_rows, relative_csv_rows, write_csv, write_json, ProfileReport,
};
use crate::model::{load_model, ModelBundle};
use crate::oracle::{
    delta_grid, evaluate_at_threshold, full_depth_baseline, threshold_search, OracleEvalOptions,
};
use crate::signals::{aggregate_with, SignalKind, SignalOptions, SimilarityProfile};
use crate::trace::{CaptureLevel, CaptureOptions, StepTrace};

/// Which pipeline to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    /// Decode and aggregate layer-to-final similarity profiles.
    Profile,
    /// Profile, then compute the adaptability score.
    Eas,
    /// Oracle early-exit evaluation at a fixed threshold.
    Oracle,
    /// Linear threshold search under an accuracy-loss budget.
    Search,
    /// Full-depth task accuracy only.
    Eval,
    /// Recompute profile/score from a trace archive.
    Replay,
}

/// Everything a run needs; mirrors the CLI flags.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunConfig {
    pub model: Option<PathBuf>,
    pub dataset: Option<PathBuf>,
    pub task: Option<TaskKind>,
    /// Trace archive to replay.
    pub trace: Option<PathBuf>,
    pub subset_n: usize,
    pub seed: String,
    pub max_tokens: usize,
    /// Signals to profile.
    pub signals: Vec<SignalKind>,
    pub top_k: usize,
    pub alpha: f64,
    /// Signal feeding the adaptability score.
    pub eas_signal: SignalKind,
    pub delta: f64,
    /// δ grid as (lo, hi, step).
    pub grid: (f64, f64, f64),
    pub max_loss: f64,
    /// Archive emission level; `None` writes no archive.
    pub capture: CaptureLevel,
    pub lens_final_norm: bool,
    pub softmax_logits: bool,
    /// Baseline adaptability report for relative comparison.
    pub baseline: Option<PathBuf>,
    pub out_dir: PathBuf,
    pub workers: Option<usize>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            model: None,
            dataset: None,
            task: None,
            trace: None,
            subset_n: 100,
            seed: "0".into(),
            max_tokens: 1024,
            signals: SignalKind::all_default(),
            top_k: 10,
            alpha: 0.5,
            eas_signal: SignalKind::OutputLogits,
            delta: 0.9,
            grid: (0.5, 1.0, 0.01),
            max_loss: 0.05,
            capture: CaptureLevel::None,
            lens_final_norm: true,
            softmax_logits: false,
            baseline: None,
            out_dir: PathBuf::from("exitlens-out"),
            workers: None,
        }
    }
}

impl RunConfig {
    fn validate(&self) -> Result<()> {
        if self.subset_n == 0 {
            return Err(Error::InvalidParam {
                reason: "subset size must be >= 1".into(),
            });
        }
        if self.max_tokens == 0 {
            return Err(Error::InvalidParam {
                reason: "max_tokens must be >= 1".into(),
            });
        }
        if self.top_k == 0 {
            return Err(Error::InvalidParam {
                reason: "top_k must be >= 1".into(),
            });
        }
        Ok(())
    }

    fn signal_options(&self) -> SignalOptions {
        SignalOptions {
            softmax_logits: self.softmax_logits,
        }
    }

    fn oracle_options(&self) -> OracleEvalOptions {
        OracleEvalOptions {
            signal: self.eas_signal,
            max_tokens: self.max_tokens,
            lens_final_norm: self.lens_final_norm,
            softmax_logits: self.softmax_logits,
        }
    }
}

/// Where a run wrote its outputs, plus a one-line summary for the terminal.
#[derive(Debug, Clone, Serialize)]
pub struct RunSummary {
    pub command: Command,
    pub files: Vec<PathBuf>,
    pub headline: String,
}

#[derive(Serialize)]
struct RunMeta<'a> {
    command: Command,
    unix_timestamp: u64,
    config: &'a RunConfig,
}

/// Execute one pipeline and write its reports under `config.out_dir`.
pub fn run(config: &RunConfig, command: Command) -> Result<RunSummary> {
    config.validate()?;
    match config.workers {
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| Error::InvalidParam {
                    reason: format!("worker pool: {e}"),
                })?;
            pool.install(|| run_inner(config, command))
        }
        None => run_inner(config, command),
    }
}

fn run_inner(config: &RunConfig, command: Command) -> Result<RunSummary> {
    std::fs::create_dir_all(&config.out_dir).map_err(|e| Error::io(&config.out_dir, e))?;

    let mut summary = match command {
        Command::Profile => cmd_profile(config)?,
        Command::Eas => cmd_eas(config)?,
        Command::Oracle => cmd_oracle(config)?,
        Command::Search => cmd_search(config)?,
        Command::Eval => cmd_eval(config)?,
        Command::Replay => cmd_replay(config)?,
    };

    let meta = RunMeta {
        command,
        unix_timestamp: std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0),
        config,
    };
    summary
        .files
        .push(write_json(config.out_dir.join("meta.json"), &meta)?);
    Ok(summary)
}

fn need<'a, T>(field: &'a Option<T>, name: &str) -> Result<&'a T> {
    field.as_ref().ok_or_else(|| Error::InvalidParam {
        reason: format!("--{name} is required for this command"),
    })
}

struct PreparedRun {
    model: ModelBundle,
    items: Vec<TaskItem>,
    task: TaskKind,
    prompts: Vec<String>,
    dataset_id: String,
}

fn prepare(config: &RunConfig) -> Result<PreparedRun> {
    let model_path = need(&config.model, "model")?;
    let dataset_path = need(&config.dataset, "dataset")?;
    let task = *need(&config.task, "task")?;
    let model = load_model(model_path)?;
    let all_items = load_dataset(dataset_path, task)?;
    if all_items.is_empty() {
        return Err(Error::InvalidParam {
            reason: format!("dataset {} is empty", dataset_path.display()),
        });
    }
    let items = select_subset(&all_items, &config.seed, config.subset_n)?;
    let prompts: Vec<String> = items
        .iter()
        .map(|item| render_prompt(task, item))
        .collect::<Result<_>>()?;
    let dataset_id = dataset_path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "dataset".into());
    Ok(PreparedRun {
        model,
        items,
        task,
        prompts,
        dataset_id,
    })
}

/// Decode every prompt with full in-memory capture, pooling traces in
/// prompt order.
fn capture_traces(
    model: &ModelBundle,
    prompts: &[String],
    config: &RunConfig,
) -> Result<Vec<StepTrace>> {
    let capture = CaptureOptions {
        level: CaptureLevel::Full,
        top_k: config.top_k,
        lens_final_norm: config.lens_final_norm,
    };
    let per_prompt: Vec<Vec<StepTrace>> = prompts
        .par_iter()
        .map(|p| {
            let tokens = model.tokenizer().encode(p);
            let gen = model.greedy_decode(&tokens, config.max_tokens, &capture)?;
            Ok(gen.traces.expect("capture level is full"))
        })
        .collect::<Result<_>>()?;
    Ok(per_prompt.into_iter().flatten().collect())
}

fn profile_from_traces(
    traces: &[StepTrace],
    config: &RunConfig,
    model_id: &str,
    dataset_id: &str,
) -> Result<SimilarityProfile> {
    Ok(
        aggregate_with(traces, &config.signals, config.signal_options())?
            .with_ids(model_id, dataset_id),
    )
}

fn cmd_profile(config: &RunConfig) -> Result<RunSummary> {
    let prep = prepare(config)?;
    let traces = capture_traces(&prep.model, &prep.prompts, config)?;
    let profile = profile_from_traces(&traces, config, prep.model.model_id(), &prep.dataset_id)?;
    let report = ProfileReport::new(profile);

    let mut files = vec![
        write_json(config.out_dir.join("profile.json"), &report)?,
        write_csv(
            config.out_dir.join("profile.csv"),
            &["signal", "layer", "mean", "std", "count"],
            &profile_csv_rows(&report.profile),
        )?,
    ];
    if config.capture != CaptureLevel::None {
        let archive = TraceArchive::from_traces(&prep.model, &traces, config.capture)?;
        let path = config.out_dir.join("traces.trc");
        archive.write(&path)?;
        files.push(path);
    }
    let headline = format!(
        "profiled {} steps over {} prompts ({} layers); rises_toward_final={:?}",
        report.profile.count,
        prep.prompts.len(),
        report.profile.num_layers,
        report.rises_toward_final
    );
    Ok(RunSummary {
        command: Command::Profile,
        files,
        headline,
    })
}

fn eas_from_profile(profile: &SimilarityProfile, config: &RunConfig) -> Result<EasReport> {
    eas(
        profile,
        &EasParams {
            alpha: config.alpha,
            signal: config.eas_signal,
            mapping: SimilarityMapping::Linear,
        },
    )
}

fn write_eas_outputs(
    report: &EasReport,
    config: &RunConfig,
    files: &mut Vec<PathBuf>,
) -> Result<String> {
    files.push(write_json(config.out_dir.join("eas.json"), report)?);
    files.push(write_csv(
        config.out_dir.join("eas.csv"),
        &[
            "layer",
            "skip_weight",
            "mean_similarity",
            "mapped_similarity",
            "score",
        ],
        &eas_csv_rows(report),
    )?);
    let mut headline = format!(
        "EAS {:.6} (model {}, signal {}, alpha {})",
        report.eas, report.model_id, report.params.signal, report.params.alpha
    );
    if let Some(baseline_path) = &config.baseline {
        let text =
            std::fs::read_to_string(baseline_path).map_err(|e| Error::io(baseline_path, e))?;
        let baseline: EasReport = serde_json::from_str(&text).map_err(|e| Error::InvalidParam {
            reason: format!("baseline report: {e}"),
        })?;
        let rel = relative_eas(report, &baseline)?;
        files.push(write_csv(
            config.out_dir.join("relative.csv"),
            &["model_id", "eas", "relative_to_baseline"],
            &relative_csv_rows(&[
                (baseline.model_id.clone(), baseline.eas, 1.0),
                (report.model_id.clone(), report.eas, rel),
            ]),
        )?);
        headline.push_str(&format!(", {rel:.4}x baseline {}", baseline.model_id));
    }
    Ok(headline)
}

fn cmd_eas(config: &RunConfig) -> Result<RunSummary> {
    let prep = prepare(config)?;
    let traces = capture_traces(&prep.model, &prep.prompts, config)?;
    // make sure the scored signal is profiled even if --signal excluded it
    let mut cfg = config.clone();
    if !cfg.signals.contains(&cfg.eas_signal) {
        cfg.signals.push(cfg.eas_signal);
    }
    let profile = profile_from_traces(&traces, &cfg, prep.model.model_id(), &prep.dataset_id)?;
    let report = eas_from_profile(&profile, config)?;

    let mut files = vec![write_json(
        config.out_dir.join("profile.json"),
        &ProfileReport::new(profile),
    )?];
    let headline = write_eas_outputs(&report, config, &mut files)?;
    Ok(RunSummary {
        command: Command::Eas,
        files,
        headline,
    })
}

fn cmd_oracle(config: &RunConfig) -> Result<RunSummary> {
    let prep = prepare(config)?;
    let evaluator = Evaluator::new(prep.task);
    let opts = config.oracle_options();
    let baseline = full_depth_baseline(&prep.model, &prep.items, &evaluator, &opts)?;
    let (report, transcripts) = evaluate_at_threshold(
        &prep.model,
        &prep.items,
        &evaluator,
        config.delta,
        &opts,
        &baseline,
        &prep.dataset_id,
    )?;

    let files = vec![
        write_json(config.out_dir.join("oracle.json"), &report)?,
        write_json(config.out_dir.join("transcripts.json"), &transcripts)?,
    ];
    let headline = format!(
        "delta {:.2}: full acc {:.4}, early-exit acc {:.4}, skip {:.2}%",
        report.delta, report.full_accuracy, report.ee_accuracy, report.skip_percent
    );
    Ok(RunSummary {
        command: Command::Oracle,
        files,
        headline,
    })
}

fn cmd_search(config: &RunConfig) -> Result<RunSummary> {
    let prep = prepare(config)?;
    let evaluator = Evaluator::new(prep.task);
    let (lo, hi, step) = config.grid;
    let grid = delta_grid(lo, hi, step)?;
    let outcome = threshold_search(
        &prep.model,
        &prep.items,
        &evaluator,
        &grid,
        config.max_loss,
        &config.oracle_options(),
        &prep.dataset_id,
    )?;

    let rows: Vec<Vec<String>> = outcome
        .grid
        .iter()
        .map(|r| {
            vec![
                format!("{:.4}", r.delta),
                format!("{:.6}", r.full_accuracy),
                format!("{:.6}", r.ee_accuracy),
                format!("{:.6}", r.accuracy_loss),
                format!("{:.4}", r.skip_percent),
            ]
        })
        .collect();
    let files = vec![
        write_json(config.out_dir.join("search.json"), &outcome)?,
        write_csv(
            config.out_dir.join("search.csv"),
            &[
                "delta",
                "full_accuracy",
                "ee_accuracy",
                "accuracy_loss",
                "skip_percent",
            ],
            &rows,
        )?,
    ];
    let headline = format!(
        "best delta {:.2} (feasible={}): skip {:.2}% at loss {:.4}",
        outcome.chosen_delta,
        outcome.feasible,
        outcome.chosen.skip_percent,
        outcome.chosen.accuracy_loss
    );
    Ok(RunSummary {
        command: Command::Search,
        files,
        headline,
    })
}

fn cmd_eval(config: &RunConfig) -> Result<RunSummary> {
    let prep = prepare(config)?;
    let evaluator = Evaluator::new(prep.task);
    let baseline = full_depth_baseline(
        &prep.model,
        &prep.items,
        &evaluator,
        &config.oracle_options(),
    )?;

    let files = vec![write_json(
        config.out_dir.join("eval.json"),
        &baseline.report,
    )?];
    let headline = format!(
        "{}: accuracy {:.2}% over {} items",
        prep.task,
        baseline.report.accuracy,
        prep.items.len()
    );
    Ok(RunSummary {
        command: Command::Eval,
        files,
        headline,
    })
}

fn cmd_replay(config: &RunConfig) -> Result<RunSummary> {
    let trace_path = need(&config.trace, "trace")?;
    let archive = TraceArchive::read(trace_path)?;
    let dataset_id = format!("replay:{}", file_stem(trace_path));

    // Archives below full detail can only serve candidate-set signals.
    let signals: Vec<SignalKind> = if archive.level == CaptureLevel::Full {
        let mut s = config.signals.clone();
        if !s.contains(&config.eas_signal) {
            s.push(config.eas_signal);
        }
        s
    } else {
        config
            .signals
            .iter()
            .copied()
            .filter(|k| matches!(k, SignalKind::TopK { .. }))
            .collect()
    };
    if signals.is_empty() {
        return Err(Error::MissingSignal {
            signal: format!(
                "requested signals (archive level {:?} carries only top-K digests)",
                archive.level
            ),
        });
    }

    let profile = aggregate_with(&archive.steps, &signals, config.signal_options())?
        .with_ids(&archive.model_id, &dataset_id);
    let mut files = vec![
        write_json(
            config.out_dir.join("profile.json"),
            &ProfileReport::new(profile.clone()),
        )?,
        write_csv(
            config.out_dir.join("profile.csv"),
            &["signal", "layer", "mean", "std", "count"],
            &profile_csv_rows(&profile),
        )?,
    ];

    let mut headline = format!(
        "replayed {} steps from {}",
        profile.count,
        trace_path.display()
    );
    if profile.signal(config.eas_signal).is_some() {
        let report = eas_from_profile(&profile, config)?;
        let eas_headline = write_eas_outputs(&report, config, &mut files)?;
        headline = format!("{headline}; {eas_headline}");
    }
    Ok(RunSummary {
        command: Command::Replay,
        files,
        headline,
    })
}

fn file_stem(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "archive".into())
}
