//! Early-exit adaptability scoring.
//!
//! Exiting at layer `l` of an `L`-layer model skips a `w_l = (L-l)/L`
//! fraction of the depth. The per-layer adaptability score balances that
//! saving against the mapped layer-to-final similarity via a weighted
//! geometric mean `A_l = S̃_l^α · w_l^(1-α)`, and the aggregate score is the
//! plain mean of `A_l` over all non-final layers. All scores live in [0, 1].

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signals::{SignalKind, SimilarityProfile};

/// How a raw similarity is mapped onto [0, 1].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SimilarityMapping {
    /// `(s + 1) / 2`. Top-K overlaps are already in [0, 1] and bypass the
    /// mapping.
    #[default]
    Linear,
}

/// Parameters of the adaptability score.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EasParams {
    /// Similarity-vs-skip weighting; 0.5 weighs them equally.
    pub alpha: f64,
    pub signal: SignalKind,
    pub mapping: SimilarityMapping,
}

impl Default for EasParams {
    fn default() -> Self {
        EasParams {
            alpha: 0.5,
            signal: SignalKind::OutputLogits,
            mapping: SimilarityMapping::Linear,
        }
    }
}

/// Per-layer breakdown of the score.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerScore {
    pub layer: usize,
    /// Skip ratio `(L - layer) / L`.
    pub skip_weight: f64,
    /// Mean layer-to-final similarity from the profile.
    pub mean_similarity: f64,
    /// Similarity mapped onto [0, 1].
    pub mapped_similarity: f64,
    /// `mapped^alpha * skip^(1-alpha)`.
    pub score: f64,
}

/// Adaptability score report for one model and signal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EasReport {
    pub model_id: String,
    pub params: EasParams,
    pub num_layers: usize,
    pub layers: Vec<LayerScore>,
    pub eas: f64,
}

/// Fraction of layers skipped when exiting at 1-based layer `layer`.
pub fn skip_ratio(layer: usize, num_layers: usize) -> Result<f64> {
    if layer == 0 || layer > num_layers {
        return Err(Error::LayerOutOfRange {
            layer,
            max: num_layers,
        });
    }
    Ok((num_layers - layer) as f64 / num_layers as f64)
}

/// Map a cosine-style similarity from [-1, 1] onto [0, 1] linearly.
pub fn map_similarity(s: f64) -> Result<f64> {
    if !s.is_finite() || s.abs() > 1.0 {
        return Err(Error::SimilarityOutOfRange { value: s });
    }
    Ok((s + 1.0) / 2.0)
}

/// Weighted geometric mean of mapped similarity and skip ratio.
///
/// Inputs are expected in [0, 1]; `0^0` is taken as 1 so the degenerate
/// `alpha` endpoints reduce to the pure skip ratio and pure similarity.
pub fn layer_score(mapped: f64, skip: f64, alpha: f64) -> f64 {
    let pow = |base: f64, exp: f64| {
        if exp == 0.0 {
            1.0
        } else {
            base.powf(exp)
        }
    };
    pow(mapped, alpha) * pow(skip, 1.0 - alpha)
}

/// Score a similarity profile.
///
/// Uses the per-layer mean similarity of `params.signal`; the report carries
/// the full per-layer breakdown alongside the aggregate.
pub fn eas(profile: &SimilarityProfile, params: &EasParams) -> Result<EasReport> {
    if !(0.0..=1.0).contains(&params.alpha) {
        return Err(Error::InvalidParam {
            reason: format!("alpha {} outside [0, 1]", params.alpha),
        });
    }
    let signal = profile
        .signal(params.signal)
        .ok_or_else(|| Error::MissingSignal {
            signal: params.signal.to_string(),
        })?;
    let want = profile.num_layers.saturating_sub(1);
    if signal.layers.len() != want
        || signal
            .layers
            .iter()
            .enumerate()
            .any(|(i, l)| l.layer != i + 1)
    {
        return Err(Error::InvalidParam {
            reason: format!(
                "profile must cover layers 1..={want} contiguously for signal {}",
                params.signal
            ),
        });
    }

    let is_overlap = matches!(params.signal, SignalKind::TopK { .. });
    let mut layers = Vec::with_capacity(want);
    let mut total = 0.0;
    for stat in &signal.layers {
        let skip = skip_ratio(stat.layer, profile.num_layers)?;
        // Overlap signals are already unit-interval; cosine signals go
        // through the configured mapping.
        let mapped = if is_overlap {
            if !(0.0..=1.0).contains(&stat.mean) {
                return Err(Error::SimilarityOutOfRange { value: stat.mean });
            }
            stat.mean
        } else {
            match params.mapping {
                SimilarityMapping::Linear => map_similarity(stat.mean)?,
            }
        };
        let score = layer_score(mapped, skip, params.alpha);
        total += score;
        layers.push(LayerScore {
            layer: stat.layer,
            skip_weight: skip,
            mean_similarity: stat.mean,
            mapped_similarity: mapped,
            score,
        });
    }

    Ok(EasReport {
        model_id: profile.model_id.clone(),
        params: *params,
        num_layers: profile.num_layers,
        layers,
        eas: total / want as f64,
    })
}

/// Ratio of a candidate's score to a baseline's.
pub fn relative_eas(candidate: &EasReport, baseline: &EasReport) -> Result<f64> {
    if baseline.eas <= 0.0 {
        return Err(Error::ZeroBaseline);
    }
    Ok(candidate.eas / baseline.eas)
}
