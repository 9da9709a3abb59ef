//! Layer-to-final similarity signals.
//!
//! For each generated token three signals compare an intermediate layer
//! against the final layer: cosine over hidden states, cosine over
//! lens-projected logits, and overlap of the top-K candidate sets. Profiles
//! aggregate the per-step values into per-layer mean and population standard
//! deviation over every token of every prompt, pooled.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::StepOutputs;
use crate::trace::{top_k_digest, StepTrace, TopKDigest};

/// Which layer-to-final signal to measure.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SignalKind {
    /// Cosine between residual-stream states.
    HiddenState,
    /// Cosine between lens-projected logit vectors.
    OutputLogits,
    /// Fraction of shared ids among the K highest logits.
    TopK { k: usize },
}

impl SignalKind {
    /// The candidate-set signal at its default width.
    pub fn top_k_default() -> Self {
        SignalKind::TopK { k: 10 }
    }

    /// All three signals with the default K.
    pub fn all_default() -> Vec<Self> {
        vec![
            SignalKind::HiddenState,
            SignalKind::OutputLogits,
            SignalKind::top_k_default(),
        ]
    }
}

impl std::fmt::Display for SignalKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SignalKind::HiddenState => write!(f, "hidden"),
            SignalKind::OutputLogits => write!(f, "logits"),
            SignalKind::TopK { k } => write!(f, "topk{k}"),
        }
    }
}

/// Knobs that change how a signal is computed.
#[derive(Debug, Clone, Copy, Default)]
pub struct SignalOptions {
    /// Compare softmax probabilities instead of raw logits for
    /// [`SignalKind::OutputLogits`]. Raw logits are the default.
    pub softmax_logits: bool,
}

/// Cosine similarity with f64 accumulation, clamped to [-1, 1].
///
/// A zero-norm input is an error: degenerate vectors mean corrupt traces and
/// should fail loudly rather than read as "dissimilar".
pub fn cosine(u: &[f32], v: &[f32]) -> Result<f64> {
    if u.len() != v.len() {
        return Err(Error::LengthMismatch {
            left: u.len(),
            right: v.len(),
        });
    }
    let mut dot = 0.0f64;
    let mut nu = 0.0f64;
    let mut nv = 0.0f64;
    for (&a, &b) in u.iter().zip(v) {
        let (a, b) = (a as f64, b as f64);
        if !a.is_finite() || !b.is_finite() {
            return Err(Error::NonFinite {
                context: "cosine input".into(),
            });
        }
        dot += a * b;
        nu += a * a;
        nv += b * b;
    }
    if nu == 0.0 || nv == 0.0 {
        return Err(Error::ZeroNorm {
            context: "cosine".into(),
        });
    }
    // sqrt(nu * nv) rather than sqrt(nu) * sqrt(nv): it keeps cosine(u, u)
    // exactly 1 under round-to-nearest.
    Ok((dot / (nu * nv).sqrt()).clamp(-1.0, 1.0))
}

fn softmax_f64(logits: &[f32]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f32::NEG_INFINITY, f32::max) as f64;
    let exps: Vec<f64> = logits.iter().map(|&l| ((l as f64) - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

fn cosine_f64(u: &[f64], v: &[f64]) -> Result<f64> {
    let dot: f64 = u.iter().zip(v).map(|(a, b)| a * b).sum();
    let nu: f64 = u.iter().map(|a| a * a).sum();
    let nv: f64 = v.iter().map(|b| b * b).sum();
    if nu == 0.0 || nv == 0.0 {
        return Err(Error::ZeroNorm {
            context: "cosine".into(),
        });
    }
    Ok((dot / (nu * nv).sqrt()).clamp(-1.0, 1.0))
}

/// Overlap fraction between two digests, over the first `k` entries of each.
pub fn digest_overlap(a: &TopKDigest, b: &TopKDigest, k: usize) -> Result<f64> {
    if k == 0 {
        return Err(Error::InvalidParam {
            reason: "top-K overlap needs K >= 1".into(),
        });
    }
    if a.len() < k || b.len() < k {
        return Err(Error::MissingSignal {
            signal: format!(
                "top-{k} overlap (digests store only {} / {} ids)",
                a.len(),
                b.len()
            ),
        });
    }
    let set: std::collections::HashSet<u32> = a.ids[..k].iter().copied().collect();
    let shared = b.ids[..k].iter().filter(|id| set.contains(id)).count();
    Ok(shared as f64 / k as f64)
}

fn logits_overlap(a: &[f32], b: &[f32], k: usize) -> Result<f64> {
    digest_overlap(&top_k_digest(a, k), &top_k_digest(b, k), k)
}

fn check_layer(layer: usize, num_layers: usize) -> Result<()> {
    if layer == 0 || layer >= num_layers {
        return Err(Error::LayerOutOfRange {
            layer,
            max: num_layers.saturating_sub(1),
        });
    }
    Ok(())
}

/// Similarity between layer `layer` (1-based, below the final layer) and the
/// final layer for one captured step.
pub fn step_similarity(trace: &StepTrace, layer: usize, kind: SignalKind) -> Result<f64> {
    step_similarity_with(trace, layer, kind, SignalOptions::default())
}

pub fn step_similarity_with(
    trace: &StepTrace,
    layer: usize,
    kind: SignalKind,
    opts: SignalOptions,
) -> Result<f64> {
    let num_layers = trace.num_layers();
    check_layer(layer, num_layers)?;
    let at = &trace.layers[layer - 1];
    let last = &trace.layers[num_layers - 1];
    match kind {
        SignalKind::HiddenState => {
            let (h, hl) = match (&at.hidden, &last.hidden) {
                (Some(h), Some(hl)) => (h, hl),
                _ => {
                    return Err(Error::MissingSignal {
                        signal: "hidden state".into(),
                    })
                }
            };
            cosine(h, hl)
        }
        SignalKind::OutputLogits => {
            let (l, ll) = match (&at.logits, &last.logits) {
                (Some(l), Some(ll)) => (l, ll),
                _ => {
                    return Err(Error::MissingSignal {
                        signal: "output logits".into(),
                    })
                }
            };
            if opts.softmax_logits {
                cosine_f64(&softmax_f64(l), &softmax_f64(ll))
            } else {
                cosine(l, ll)
            }
        }
        SignalKind::TopK { k } => match (&at.logits, &last.logits) {
            (Some(l), Some(ll)) => logits_overlap(l, ll, k),
            _ => digest_overlap(&at.top_k, &last.top_k, k),
        },
    }
}

/// Same signals computed straight from in-memory step outputs.
pub fn outputs_similarity(
    outputs: &StepOutputs,
    layer: usize,
    kind: SignalKind,
    opts: SignalOptions,
) -> Result<f64> {
    let num_layers = outputs.hidden.len();
    check_layer(layer, num_layers)?;
    match kind {
        SignalKind::HiddenState => {
            cosine(&outputs.hidden[layer - 1], &outputs.hidden[num_layers - 1])
        }
        SignalKind::OutputLogits => {
            let (l, ll) = (&outputs.logits[layer - 1], &outputs.logits[num_layers - 1]);
            if opts.softmax_logits {
                cosine_f64(&softmax_f64(l), &softmax_f64(ll))
            } else {
                cosine(l, ll)
            }
        }
        SignalKind::TopK { k } => logits_overlap(
            &outputs.logits[layer - 1],
            &outputs.logits[num_layers - 1],
            k,
        ),
    }
}

/// Mean and population standard deviation of one signal at one layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerStat {
    pub layer: usize,
    pub mean: f64,
    pub std: f64,
}

/// All layer statistics for one signal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignalProfile {
    pub kind: SignalKind,
    /// One entry per layer 1..L-1, in order.
    pub layers: Vec<LayerStat>,
}

/// Aggregated similarity statistics for a model over a set of prompts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimilarityProfile {
    pub model_id: String,
    pub dataset_id: String,
    /// Total layer count L; profiled layers run 1..L-1.
    pub num_layers: usize,
    /// Number of generated-token steps pooled into every layer's statistics.
    pub count: usize,
    pub signals: Vec<SignalProfile>,
}

impl SimilarityProfile {
    pub fn signal(&self, kind: SignalKind) -> Option<&SignalProfile> {
        self.signals.iter().find(|s| s.kind == kind)
    }

    pub fn with_ids(mut self, model_id: impl Into<String>, dataset_id: impl Into<String>) -> Self {
        self.model_id = model_id.into();
        self.dataset_id = dataset_id.into();
        self
    }
}

/// Pool all steps into per-layer statistics for each requested signal.
///
/// The reduction order is fixed (signals, then layers, then traces in the
/// given order) so identical inputs give identical profiles.
pub fn aggregate(traces: &[StepTrace], kinds: &[SignalKind]) -> Result<SimilarityProfile> {
    aggregate_with(traces, kinds, SignalOptions::default())
}

pub fn aggregate_with(
    traces: &[StepTrace],
    kinds: &[SignalKind],
    opts: SignalOptions,
) -> Result<SimilarityProfile> {
    let first = traces.first().ok_or(Error::EmptyTraces)?;
    let num_layers = first.num_layers();
    if num_layers < 2 {
        return Err(Error::InvalidParam {
            reason: format!("need at least 2 layers to profile, model has {num_layers}"),
        });
    }
    if let Some(bad) = traces.iter().find(|t| t.num_layers() != num_layers) {
        return Err(Error::InvalidParam {
            reason: format!(
                "mixed layer counts in traces: {} vs {}",
                num_layers,
                bad.num_layers()
            ),
        });
    }

    let mut signals = Vec::with_capacity(kinds.len());
    for &kind in kinds {
        let mut layers = Vec::with_capacity(num_layers - 1);
        for layer in 1..num_layers {
            let mut values = Vec::with_capacity(traces.len());
            for trace in traces {
                values.push(step_similarity_with(trace, layer, kind, opts)?);
            }
            let n = values.len() as f64;
            let mean = values.iter().sum::<f64>() / n;
            let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
            layers.push(LayerStat {
                layer,
                mean,
                std: var.max(0.0).sqrt(),
            });
        }
        signals.push(SignalProfile { kind, layers });
    }

    Ok(SimilarityProfile {
        model_id: String::new(),
        dataset_id: String::new(),
        num_layers,
        count: traces.len(),
        signals,
    })
}
