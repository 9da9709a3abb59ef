//! Per-step capture records.
//!
//! A [`StepTrace`] holds, for one generated token, the last-position signal
//! of every layer: the raw hidden state, the lens-projected logits, and a
//! compact top-K digest of those logits. How much of that is retained is
//! controlled by [`CaptureLevel`]; the digest is always present so that
//! candidate-set analysis works even on low-detail captures and archives.

use serde::{Deserialize, Serialize};

/// How much per-layer detail a decoding run retains.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CaptureLevel {
    /// Keep nothing; decode for tokens only.
    None,
    /// Keep only the per-layer top-K digests.
    TopK,
    /// Keep hidden states, full logits, and digests.
    Full,
}

/// Options for trace capture during decoding.
#[derive(Debug, Clone)]
pub struct CaptureOptions {
    pub level: CaptureLevel,
    /// Digest width K.
    pub top_k: usize,
    /// Apply the model's final normalization when lens-projecting
    /// intermediate layers. The final layer's logits always go through the
    /// final norm — they are the decoding distribution.
    pub lens_final_norm: bool,
}

impl Default for CaptureOptions {
    fn default() -> Self {
        CaptureOptions {
            level: CaptureLevel::Full,
            top_k: 10,
            lens_final_norm: true,
        }
    }
}

impl CaptureOptions {
    pub fn none() -> Self {
        CaptureOptions {
            level: CaptureLevel::None,
            ..Default::default()
        }
    }

    pub fn top_k_only(k: usize) -> Self {
        CaptureOptions {
            level: CaptureLevel::TopK,
            top_k: k,
            ..Default::default()
        }
    }
}

/// The K highest-logit token ids of one layer, with their logit values.
///
/// Entries are ordered by descending logit, ties broken toward the smaller
/// token id, so the digest is a deterministic function of the logits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopKDigest {
    pub ids: Vec<u32>,
    pub values: Vec<f32>,
}

impl TopKDigest {
    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }
}

/// Extract the top-K digest of a logit vector.
///
/// K is clamped to the vocabulary size.
pub fn top_k_digest(logits: &[f32], k: usize) -> TopKDigest {
    let k = k.min(logits.len());
    // Selection over index pairs keeps the (value desc, id asc) order total.
    let mut idx: Vec<u32> = (0..logits.len() as u32).collect();
    idx.sort_unstable_by(|&a, &b| {
        let (la, lb) = (logits[a as usize], logits[b as usize]);
        lb.partial_cmp(&la)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });
    idx.truncate(k);
    let values = idx.iter().map(|&i| logits[i as usize]).collect();
    TopKDigest { ids: idx, values }
}

/// Capture of a single layer at one decoding step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerCapture {
    /// Last-position output of the block (residual stream), length d_model.
    pub hidden: Option<Vec<f32>>,
    /// Lens-projected logits, length vocab_size.
    pub logits: Option<Vec<f32>>,
    /// Always present.
    pub top_k: TopKDigest,
}

/// Per-layer capture for one generated token.
///
/// `layers[0]` is layer 1; `layers` has one entry per transformer block, so
/// the last entry is the final layer whose logits drive decoding.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepTrace {
    /// 0-based step index within its generation.
    pub step: usize,
    /// Token emitted at this step.
    pub chosen: u32,
    pub layers: Vec<LayerCapture>,
}

impl StepTrace {
    /// Number of transformer layers captured.
    pub fn num_layers(&self) -> usize {
        self.layers.len()
    }

    /// Capture record for 1-based layer `layer`.
    pub fn layer(&self, layer: usize) -> Option<&LayerCapture> {
        if layer == 0 {
            return None;
        }
        self.layers.get(layer - 1)
    }

    /// True when hidden states and full logits are present at every layer.
    pub fn is_full(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.hidden.is_some() && l.logits.is_some())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn digest_orders_by_value_then_id() {
        let logits = [0.5f32, 2.0, 2.0, -1.0, 3.0];
        let d = top_k_digest(&logits, 3);
        assert_eq!(d.ids, vec![4, 1, 2]);
        assert_eq!(d.values, vec![3.0, 2.0, 2.0]);
    }

    #[test]
    fn digest_clamps_k() {
        let d = top_k_digest(&[1.0, 0.0], 10);
        assert_eq!(d.len(), 2);
        assert_eq!(d.ids, vec![0, 1]);
    }

    #[test]
    fn digest_ties_prefer_lowest_id() {
        let d = top_k_digest(&[7.0, 7.0, 7.0, 7.0], 2);
        assert_eq!(d.ids, vec![0, 1]);
    }
}
