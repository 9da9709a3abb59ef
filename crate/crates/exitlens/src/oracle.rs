//! Oracle early-exit decoding and the threshold search.
//!
//! The oracle assumes the final layer's output is known when picking the
//! exit layer: every step runs all layers, then the token is emitted from
//! the earliest layer whose layer-to-final similarity clears the threshold
//! δ, falling back to full depth. Because the emitted token comes from the
//! exit layer's logits, trajectories can diverge from full-depth decoding —
//! the oracle measures potential, not real speedup.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::{render_prompt, EvalReport, Evaluator, TaskItem};
use crate::model::{KvCache, ModelBundle};
use crate::signals::{outputs_similarity, SignalKind, SignalOptions};
use crate::trace::CaptureOptions;

/// Exit rule parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OracleParams {
    /// Minimum similarity required to exit. May exceed the signal's maximum
    /// (e.g. 1.01) to force full depth everywhere.
    pub delta: f64,
    pub signal: SignalKind,
    pub max_tokens: usize,
    /// Final-norm toggle for intermediate lens projections.
    pub lens_final_norm: bool,
    /// Compare softmaxed rather than raw logits.
    pub softmax_logits: bool,
}

impl Default for OracleParams {
    fn default() -> Self {
        OracleParams {
            delta: 0.9,
            signal: SignalKind::OutputLogits,
            max_tokens: 1024,
            lens_final_norm: true,
            softmax_logits: false,
        }
    }
}

impl OracleParams {
    fn validate(&self) -> Result<()> {
        if self.max_tokens == 0 {
            return Err(Error::InvalidParam {
                reason: "max_tokens must be >= 1".into(),
            });
        }
        if !self.delta.is_finite() {
            return Err(Error::InvalidParam {
                reason: "delta must be finite".into(),
            });
        }
        Ok(())
    }

    fn signal_options(&self) -> SignalOptions {
        SignalOptions {
            softmax_logits: self.softmax_logits,
        }
    }
}

/// One prompt's oracle decoding result.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExitTranscript {
    pub prompt_id: String,
    pub num_layers: usize,
    pub tokens: Vec<u32>,
    /// Exit layer k* per token, each in 1..=num_layers.
    pub exit_layers: Vec<usize>,
    /// Similarity observed at the exit layer (1.0 at full depth).
    pub exit_similarity: Vec<f64>,
    pub truncated: bool,
}

impl ExitTranscript {
    /// Mean of `(L - k*) / L` over the generated tokens.
    pub fn mean_skip_ratio(&self) -> f64 {
        if self.exit_layers.is_empty() {
            return 0.0;
        }
        let l = self.num_layers as f64;
        self.exit_layers
            .iter()
            .map(|&k| (l - k as f64) / l)
            .sum::<f64>()
            / self.exit_layers.len() as f64
    }

    /// Exit-layer histogram; index `k - 1` counts tokens that exited at
    /// layer k. Total mass equals the token count.
    pub fn exit_histogram(&self) -> Vec<usize> {
        let mut hist = vec![0usize; self.num_layers];
        for &k in &self.exit_layers {
            hist[k - 1] += 1;
        }
        hist
    }
}

/// Exit layer the oracle rule picks for one captured step: the earliest
/// layer whose similarity clears `delta`, else full depth.
pub fn trace_exit_layer(
    trace: &crate::trace::StepTrace,
    delta: f64,
    signal: SignalKind,
    opts: SignalOptions,
) -> Result<usize> {
    let num_layers = trace.num_layers();
    for layer in 1..num_layers {
        if crate::signals::step_similarity_with(trace, layer, signal, opts)? >= delta {
            return Ok(layer);
        }
    }
    Ok(num_layers)
}

/// Decode one prompt under the oracle exit rule.
pub fn oracle_decode(
    model: &ModelBundle,
    prompt_id: &str,
    prompt: &[u32],
    params: &OracleParams,
) -> Result<ExitTranscript> {
    params.validate()?;
    let num_layers = model.config().num_layers;
    let eos = model.config().eos_token_id;
    let max_seq = model.config().max_seq_len;
    let opts = params.signal_options();

    if prompt.len() > max_seq {
        return Err(Error::ContextOverflow {
            len: prompt.len(),
            max: max_seq,
        });
    }
    let mut cache = KvCache::new(model);
    let mut outputs = model.advance_session(&mut cache, prompt, params.lens_final_norm)?;

    let mut tokens = Vec::new();
    let mut exit_layers = Vec::new();
    let mut exit_similarity = Vec::new();
    let mut truncated = false;
    loop {
        // Earliest layer clearing the threshold; full depth otherwise. The
        // final layer's self-similarity is 1 by definition, so scanning it
        // explicitly would change nothing.
        let mut k_star = num_layers;
        let mut sim_at_exit = 1.0;
        for layer in 1..num_layers {
            let sim = outputs_similarity(&outputs, layer, params.signal, opts)?;
            if sim >= params.delta {
                k_star = layer;
                sim_at_exit = sim;
                break;
            }
        }
        let chosen = outputs.argmax_at(k_star).expect("layer in range");
        tokens.push(chosen);
        exit_layers.push(k_star);
        exit_similarity.push(sim_at_exit);
        if chosen == eos || tokens.len() == params.max_tokens {
            break;
        }
        if cache.len() == max_seq {
            truncated = true;
            break;
        }
        outputs = model.advance_session(&mut cache, &[chosen], params.lens_final_norm)?;
    }

    Ok(ExitTranscript {
        prompt_id: prompt_id.to_string(),
        num_layers,
        tokens,
        exit_layers,
        exit_similarity,
        truncated,
    })
}

/// Pooled oracle results at one threshold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleReport {
    pub delta: f64,
    pub signal: SignalKind,
    pub dataset_id: String,
    /// Accuracy of unmodified full-depth decoding, as a fraction in [0, 1].
    pub full_accuracy: f64,
    /// Accuracy under oracle early-exit, as a fraction in [0, 1].
    pub ee_accuracy: f64,
    /// `full_accuracy - ee_accuracy`, in absolute accuracy points.
    pub accuracy_loss: f64,
    /// Mean skip ratio over all generated tokens across prompts, in percent.
    pub skip_percent: f64,
    pub num_prompts: usize,
    pub total_tokens: usize,
}

/// Full-depth decoding results, computed once per dataset and reused across
/// grid points.
#[derive(Debug, Clone)]
pub struct FullDepthBaseline {
    pub predictions: Vec<String>,
    pub prompts: Vec<String>,
    pub report: EvalReport,
    /// Fraction in [0, 1].
    pub accuracy: f64,
}

/// Shared knobs for dataset-level oracle evaluation.
#[derive(Debug, Clone, Copy)]
pub struct OracleEvalOptions {
    pub signal: SignalKind,
    pub max_tokens: usize,
    pub lens_final_norm: bool,
    pub softmax_logits: bool,
}

impl Default for OracleEvalOptions {
    fn default() -> Self {
        OracleEvalOptions {
            signal: SignalKind::OutputLogits,
            max_tokens: 1024,
            lens_final_norm: true,
            softmax_logits: false,
        }
    }
}

impl OracleEvalOptions {
    fn params_at(&self, delta: f64) -> OracleParams {
        OracleParams {
            delta,
            signal: self.signal,
            max_tokens: self.max_tokens,
            lens_final_norm: self.lens_final_norm,
            softmax_logits: self.softmax_logits,
        }
    }
}

/// Render, decode at full depth, and score a dataset once.
pub fn full_depth_baseline(
    model: &ModelBundle,
    items: &[TaskItem],
    evaluator: &Evaluator,
    opts: &OracleEvalOptions,
) -> Result<FullDepthBaseline> {
    if items.is_empty() {
        return Err(Error::InvalidParam {
            reason: "dataset is empty".into(),
        });
    }
    let prompts: Vec<String> = items
        .iter()
        .map(|item| render_prompt(evaluator.kind, item))
        .collect::<Result<_>>()?;
    let predictions: Vec<String> = prompts
        .par_iter()
        .map(|p| {
            let tokens = model.tokenizer().encode(p);
            let gen = model.greedy_decode(&tokens, opts.max_tokens, &CaptureOptions::none())?;
            model.tokenizer().decode_lossy(&gen.tokens)
        })
        .collect::<Result<_>>()?;
    let report = evaluator.score_items(items, &predictions, &prompts)?;
    Ok(FullDepthBaseline {
        accuracy: report.accuracy / 100.0,
        predictions,
        prompts,
        report,
    })
}

/// Run the oracle at one threshold over a dataset and score the result
/// against the cached full-depth baseline.
pub fn evaluate_at_threshold(
    model: &ModelBundle,
    items: &[TaskItem],
    evaluator: &Evaluator,
    delta: f64,
    opts: &OracleEvalOptions,
    baseline: &FullDepthBaseline,
    dataset_id: &str,
) -> Result<(OracleReport, Vec<ExitTranscript>)> {
    if items.is_empty() {
        return Err(Error::InvalidParam {
            reason: "dataset is empty".into(),
        });
    }
    let params = opts.params_at(delta);
    let transcripts: Vec<ExitTranscript> = items
        .par_iter()
        .zip(&baseline.prompts)
        .map(|(item, prompt)| {
            let tokens = model.tokenizer().encode(prompt);
            oracle_decode(model, &item.id, &tokens, &params)
        })
        .collect::<Result<_>>()?;
    let predictions: Vec<String> = transcripts
        .iter()
        .map(|t| model.tokenizer().decode_lossy(&t.tokens))
        .collect::<Result<_>>()?;
    let ee_report = evaluator.score_items(items, &predictions, &baseline.prompts)?;
    let ee_accuracy = ee_report.accuracy / 100.0;

    let total_tokens: usize = transcripts.iter().map(|t| t.exit_layers.len()).sum();
    let l = model.config().num_layers as f64;
    let skip_sum: f64 = transcripts
        .iter()
        .flat_map(|t| t.exit_layers.iter())
        .map(|&k| (l - k as f64) / l)
        .sum();
    let skip_percent = if total_tokens == 0 {
        0.0
    } else {
        100.0 * skip_sum / total_tokens as f64
    };

    Ok((
        OracleReport {
            delta,
            signal: opts.signal,
            dataset_id: dataset_id.to_string(),
            full_accuracy: baseline.accuracy,
            ee_accuracy,
            accuracy_loss: baseline.accuracy - ee_accuracy,
            skip_percent,
            num_prompts: items.len(),
            total_tokens,
        },
        transcripts,
    ))
}

/// Result of a linear threshold search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchOutcome {
    pub chosen_delta: f64,
    /// False when no grid point kept the loss within budget; the report then
    /// belongs to the largest threshold as a conservative fallback.
    pub feasible: bool,
    pub chosen: OracleReport,
    pub grid: Vec<OracleReport>,
}

/// Pick the report with maximal skip among those within the loss budget.
///
/// Ties break toward the larger δ; with no feasible point the last
/// (largest-δ) report is returned with `feasible = false`. Reports must be
/// ordered by ascending δ.
pub fn select_best(grid: &[OracleReport], max_loss: f64) -> Result<(usize, bool)> {
    if grid.is_empty() {
        return Err(Error::EmptyGrid);
    }
    let mut best: Option<usize> = None;
    for (i, report) in grid.iter().enumerate() {
        if report.accuracy_loss <= max_loss {
            let better = match best {
                None => true,
                Some(b) => report.skip_percent >= grid[b].skip_percent,
            };
            if better {
                best = Some(i);
            }
        }
    }
    match best {
        Some(i) => Ok((i, true)),
        None => Ok((grid.len() - 1, false)),
    }
}

/// Evaluate every grid point and select the best threshold under the loss
/// budget. The full-depth baseline is computed once and shared.
pub fn threshold_search(
    model: &ModelBundle,
    items: &[TaskItem],
    evaluator: &Evaluator,
    grid: &[f64],
    max_loss: f64,
    opts: &OracleEvalOptions,
    dataset_id: &str,
) -> Result<SearchOutcome> {
    if grid.is_empty() {
        return Err(Error::EmptyGrid);
    }
    if grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidParam {
            reason: "grid must be strictly ascending".into(),
        });
    }
    if max_loss < 0.0 {
        return Err(Error::InvalidParam {
            reason: "max_loss must be >= 0".into(),
        });
    }
    let baseline = full_depth_baseline(model, items, evaluator, opts)?;
    let mut reports = Vec::with_capacity(grid.len());
    for &delta in grid {
        let (report, _) =
            evaluate_at_threshold(model, items, evaluator, delta, opts, &baseline, dataset_id)?;
        reports.push(report);
    }
    let (idx, feasible) = select_best(&reports, max_loss)?;
    Ok(SearchOutcome {
        chosen_delta: reports[idx].delta,
        feasible,
        chosen: reports[idx].clone(),
        grid: reports,
    })
}

/// Build the default δ grid `lo, lo+step, …` up to and including `hi`
/// (within half a step).
pub fn delta_grid(lo: f64, hi: f64, step: f64) -> Result<Vec<f64>> {
    if !(lo.is_finite() && hi.is_finite()) || step <= 0.0 || hi < lo {
        return Err(Error::InvalidParam {
            reason: format!("bad grid spec {lo}:{hi}:{step}"),
        });
    }
    let n = ((hi - lo) / step).round() as usize;
    Ok((0..=n).map(|i| lo + i as f64 * step).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::fixture;
    use crate::trace::CaptureOptions;

    fn fixture_model() -> ModelBundle {
        fixture::build_model(fixture::DEFAULT_SEED)
    }

    fn report(delta: f64, full: f64, acc: f64, skip: f64) -> OracleReport {
        OracleReport {
            delta,
            signal: SignalKind::OutputLogits,
            dataset_id: "synthetic".into(),
            full_accuracy: full,
            ee_accuracy: acc,
            accuracy_loss: full - acc,
            skip_percent: skip,
            num_prompts: 1,
            total_tokens: 1,
        }
    }

    #[test]
    fn unreachable_delta_reduces_to_greedy() {
        let m = fixture_model();
        let prompt: Vec<u32> = b"hello world".iter().map(|&b| b as u32).collect();
        let params = OracleParams {
            delta: 1.01,
            max_tokens: 16,
            ..Default::default()
        };
        let t = oracle_decode(&m, "p0", &prompt, &params).unwrap();
        let greedy = m
            .greedy_decode(&prompt, 16, &CaptureOptions::none())
            .unwrap();
        assert_eq!(t.tokens, greedy.tokens);
        assert!(t.exit_layers.iter().all(|&k| k == 4));
        assert_eq!(t.mean_skip_ratio(), 0.0);
    }

    #[test]
    fn threshold_below_minimum_exits_at_layer_one() {
        let m = fixture_model();
        let prompt: Vec<u32> = b"abc".iter().map(|&b| b as u32).collect();
        let params = OracleParams {
            delta: -2.0,
            max_tokens: 8,
            ..Default::default()
        };
        let t = oracle_decode(&m, "p0", &prompt, &params).unwrap();
        assert!(t.exit_layers.iter().all(|&k| k == 1));
        assert!((t.mean_skip_ratio() - 0.75).abs() < 1e-12);
    }

    #[test]
    fn histogram_mass_equals_token_count() {
        let m = fixture_model();
        let prompt: Vec<u32> = b"histogram".iter().map(|&b| b as u32).collect();
        let params = OracleParams {
            delta: 0.9,
            max_tokens: 12,
            ..Default::default()
        };
        let t = oracle_decode(&m, "p0", &prompt, &params).unwrap();
        assert_eq!(t.exit_histogram().iter().sum::<usize>(), t.tokens.len());
        assert!(t.exit_layers.iter().all(|&k| (1..=4).contains(&k)));
        assert_eq!(t.exit_layers.len(), t.tokens.len());
        assert_eq!(t.exit_similarity.len(), t.tokens.len());
    }

    #[test]
    fn select_best_matches_spec_example() {
        // grid {0.7: (acc .30, skip 8), 0.8: (acc .37, skip 5), 0.9: (acc .40, skip 1)}
        // full acc .40, max_loss .05 -> 0.8
        let grid = vec![
            report(0.7, 0.40, 0.30, 8.0),
            report(0.8, 0.40, 0.37, 5.0),
            report(0.9, 0.40, 0.40, 1.0),
        ];
        let (idx, feasible) = select_best(&grid, 0.05).unwrap();
        assert!(feasible);
        assert_eq!(grid[idx].delta, 0.8);
    }

    #[test]
    fn select_best_unconstrained_takes_max_skip() {
        let grid = vec![
            report(0.7, 0.4, 0.40, 8.0),
            report(0.8, 0.4, 0.39, 5.0),
            report(0.9, 0.4, 0.40, 1.0),
        ];
        let (idx, feasible) = select_best(&grid, 0.5).unwrap();
        assert!(feasible);
        assert_eq!(grid[idx].delta, 0.7);
    }

    #[test]
    fn select_best_ties_prefer_larger_delta() {
        let grid = vec![
            report(0.7, 0.4, 0.40, 5.0),
            report(0.8, 0.4, 0.40, 5.0),
            report(0.9, 0.4, 0.40, 1.0),
        ];
        let (idx, _) = select_best(&grid, 0.05).unwrap();
        assert_eq!(grid[idx].delta, 0.8);
    }

    #[test]
    fn select_best_flags_infeasible() {
        let grid = vec![report(0.7, 0.9, 0.30, 8.0), report(0.8, 0.9, 0.40, 5.0)];
        let (idx, feasible) = select_best(&grid, 0.05).unwrap();
        assert!(!feasible);
        assert_eq!(grid[idx].delta, 0.8);
        assert!(matches!(select_best(&[], 0.05), Err(Error::EmptyGrid)));
    }

    #[test]
    fn report_schema_round_trips_reported_shapes() {
        // the kind of row the serialized schema must carry losslessly
        let r = report(0.70, 0.41, 0.38, 4.69);
        let json = serde_json::to_string(&r).unwrap();
        let back: OracleReport = serde_json::from_str(&json).unwrap();
        assert_eq!(back, r);
        assert!((back.accuracy_loss - 0.03).abs() < 1e-12);
        assert!((0.0..=100.0).contains(&back.skip_percent));
    }

    #[test]
    fn delta_grid_default_shape() {
        let g = delta_grid(0.5, 1.0, 0.01).unwrap();
        assert_eq!(g.len(), 51);
        assert_eq!(g[0], 0.5);
        assert!((g[50] - 1.0).abs() < 1e-12);
        assert!(delta_grid(1.0, 0.5, 0.01).is_err());
    }

    #[test]
    fn exit_layer_monotone_in_delta_per_step() {
        let m = fixture_model();
        let prompt: Vec<u32> = b"monotone".iter().map(|&b| b as u32).collect();
        let out = m.forward_step(&prompt, None).unwrap();
        let opts = SignalOptions::default();
        let sims: Vec<f64> = (1..4)
            .map(|l| outputs_similarity(&out, l, SignalKind::OutputLogits, opts).unwrap())
            .collect();
        let exit_at = |delta: f64| {
            sims.iter()
                .position(|&s| s >= delta)
                .map(|i| i + 1)
                .unwrap_or(4)
        };
        let mut prev = 0;
        for i in 0..=50 {
            let delta = 0.5 + i as f64 * 0.01;
            let k = exit_at(delta);
            assert!(k >= prev);
            prev = k;
        }
    }
}
