//! Validated weight container.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::model::config::ModelConfig;
use crate::model::math;
use crate::model::tokenizer::ByteTokenizer;

/// Weights of one transformer block.
#[derive(Debug, Clone)]
pub(crate) struct LayerWeights {
    pub attn_norm: Vec<f32>, // [d]
    pub wq: Vec<f32>,        // [d, d]
    pub wk: Vec<f32>,        // [d, d]
    pub wv: Vec<f32>,        // [d, d]
    pub wo: Vec<f32>,        // [d, d]
    pub mlp_norm: Vec<f32>,  // [d]
    pub w_fc: Vec<f32>,      // [d, d_ff]
    pub w_proj: Vec<f32>,    // [d_ff, d]
}

/// An immutable, validated model: config, tokenizer, and all tensors.
///
/// Bundles are safe to share across threads; decoding sessions only need a
/// shared reference.
#[derive(Debug, Clone)]
pub struct ModelBundle {
    pub(crate) config: ModelConfig,
    pub(crate) tokenizer: ByteTokenizer,
    pub(crate) model_id: String,
    pub(crate) embed: Vec<f32>, // [V, d]
    pub(crate) layers: Vec<LayerWeights>,
    pub(crate) final_norm: Vec<f32>, // [d]
    pub(crate) lm_head: Vec<f32>,    // [d, V]
}

/// Canonical tensor table for a config: (name, shape), in storage order.
pub fn required_tensors(config: &ModelConfig) -> Vec<(String, Vec<usize>)> {
    let d = config.d_model;
    let ff = config.d_ff;
    let v = config.vocab_size as usize;
    let mut out = vec![("embed.weight".to_string(), vec![v, d])];
    for i in 0..config.num_layers {
        out.push((format!("layers.{i}.attn_norm.weight"), vec![d]));
        out.push((format!("layers.{i}.attn.wq.weight"), vec![d, d]));
        out.push((format!("layers.{i}.attn.wk.weight"), vec![d, d]));
        out.push((format!("layers.{i}.attn.wv.weight"), vec![d, d]));
        out.push((format!("layers.{i}.attn.wo.weight"), vec![d, d]));
        out.push((format!("layers.{i}.mlp_norm.weight"), vec![d]));
        out.push((format!("layers.{i}.mlp.fc.weight"), vec![d, ff]));
        out.push((format!("layers.{i}.mlp.proj.weight"), vec![ff, d]));
    }
    out.push(("final_norm.weight".to_string(), vec![d]));
    out.push(("lm_head.weight".to_string(), vec![d, v]));
    out
}

impl ModelBundle {
    /// Assemble a bundle from named tensors, validating names, shapes, and
    /// finiteness. Unknown tensor names are rejected.
    pub fn from_tensors(
        config: ModelConfig,
        tokenizer: ByteTokenizer,
        model_id: impl Into<String>,
        mut tensors: HashMap<String, Vec<f32>>,
    ) -> Result<Self> {
        config.validate()?;
        if tokenizer.vocab_size() != config.vocab_size {
            return Err(Error::InvalidConfig {
                reason: format!(
                    "tokenizer vocab {} != config vocab {}",
                    tokenizer.vocab_size(),
                    config.vocab_size
                ),
            });
        }

        let mut take = |name: &str, shape: &[usize]| -> Result<Vec<f32>> {
            let data = tensors.remove(name).ok_or_else(|| Error::MissingTensor {
                name: name.to_string(),
            })?;
            let expected_len: usize = shape.iter().product();
            if data.len() != expected_len {
                return Err(Error::ShapeMismatch {
                    name: name.to_string(),
                    expected: shape.to_vec(),
                    expected_len,
                    actual_len: data.len(),
                });
            }
            if !data.iter().all(|v| v.is_finite()) {
                return Err(Error::NonFinite {
                    context: format!("tensor `{name}`"),
                });
            }
            Ok(data)
        };

        let table = required_tensors(&config);
        let mut iter = table.iter();
        let (embed_name, embed_shape) = iter.next().unwrap();
        let embed = take(embed_name, embed_shape)?;

        let mut layers = Vec::with_capacity(config.num_layers);
        for _ in 0..config.num_layers {
            let mut grab = || -> Result<Vec<f32>> {
                let (name, shape) = iter.next().unwrap();
                take(name, shape)
            };
            layers.push(LayerWeights {
                attn_norm: grab()?,
                wq: grab()?,
                wk: grab()?,
                wv: grab()?,
                wo: grab()?,
                mlp_norm: grab()?,
                w_fc: grab()?,
                w_proj: grab()?,
            });
        }
        let (fn_name, fn_shape) = iter.next().unwrap();
        let final_norm = take(fn_name, fn_shape)?;
        let (lm_name, lm_shape) = iter.next().unwrap();
        let lm_head = take(lm_name, lm_shape)?;

        if let Some(extra) = tensors.keys().min() {
            return Err(Error::Manifest {
                path: Default::default(),
                reason: format!("unknown tensor `{extra}`"),
            });
        }

        Ok(ModelBundle {
            config,
            tokenizer,
            model_id: model_id.into(),
            embed,
            layers,
            final_norm,
            lm_head,
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn tokenizer(&self) -> &ByteTokenizer {
        &self.tokenizer
    }

    pub fn model_id(&self) -> &str {
        &self.model_id
    }

    /// Export the tensors as a name -> values map, in the canonical layout.
    pub fn to_tensors(&self) -> Vec<(String, Vec<usize>, &[f32])> {
        let table = required_tensors(&self.config);
        let mut flat: Vec<&[f32]> = vec![&self.embed];
        for l in &self.layers {
            flat.extend([
                l.attn_norm.as_slice(),
                l.wq.as_slice(),
                l.wk.as_slice(),
                l.wv.as_slice(),
                l.wo.as_slice(),
                l.mlp_norm.as_slice(),
                l.w_fc.as_slice(),
                l.w_proj.as_slice(),
            ]);
        }
        flat.push(&self.final_norm);
        flat.push(&self.lm_head);
        table
            .into_iter()
            .zip(flat)
            .map(|((name, shape), data)| (name, shape, data))
            .collect()
    }

    /// Lens projection: final RMS norm, then the LM head.
    ///
    /// Applied to the final layer's hidden state this yields the decoding
    /// logits; applied to intermediate layers it is the standard lens view.
    pub fn project_logits(&self, hidden: &[f32]) -> Result<Vec<f32>> {
        self.check_hidden(hidden)?;
        let d = self.config.d_model;
        let v = self.config.vocab_size as usize;
        let mut normed = vec![0.0f32; d];
        math::rms_norm(hidden, &self.final_norm, self.config.norm_eps, &mut normed);
        let mut logits = vec![0.0f32; v];
        math::matvec(&normed, &self.lm_head, v, &mut logits);
        Ok(logits)
    }

    /// Lens projection without the final norm, for comparing conventions.
    pub fn project_logits_unnormed(&self, hidden: &[f32]) -> Result<Vec<f32>> {
        self.check_hidden(hidden)?;
        let v = self.config.vocab_size as usize;
        let mut logits = vec![0.0f32; v];
        math::matvec(hidden, &self.lm_head, v, &mut logits);
        Ok(logits)
    }

    fn check_hidden(&self, hidden: &[f32]) -> Result<()> {
        if hidden.len() != self.config.d_model {
            return Err(Error::LengthMismatch {
                left: hidden.len(),
                right: self.config.d_model,
            });
        }
        if !hidden.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite {
                context: "hidden state passed to lens projection".into(),
            });
        }
        Ok(())
    }
}
