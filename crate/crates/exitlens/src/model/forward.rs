//! Decoding runtime: incremental KV-cached stepping, a naive full
//! recomputation path, and greedy decoding with per-layer capture.
//!
//! The cached and uncached paths are organized differently on purpose — the
//! equivalence tests compare one against the other.

use crate::error::{Error, Result};
use crate::model::bundle::ModelBundle;
use crate::model::math;
use crate::trace::{top_k_digest, CaptureLevel, CaptureOptions, LayerCapture, StepTrace};

/// Per-layer key/value history for one decoding session.
///
/// Keys are stored post-rotation, flat per layer as `[pos * d_model + i]`.
/// A cache belongs to a single session and is not shared.
#[derive(Debug, Clone)]
pub struct KvCache {
    k: Vec<Vec<f32>>,
    v: Vec<Vec<f32>>,
    len: usize,
}

impl KvCache {
    pub fn new(model: &ModelBundle) -> Self {
        let layers = model.config().num_layers;
        KvCache {
            k: vec![Vec::new(); layers],
            v: vec![Vec::new(); layers],
            len: 0,
        }
    }

    /// Number of positions fed so far.
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }
}

/// Full per-layer view of the last position after a forward step.
#[derive(Debug, Clone)]
pub struct StepOutputs {
    /// Residual-stream output of each block; `hidden[0]` is layer 1.
    pub hidden: Vec<Vec<f32>>,
    /// Lens-projected logits per layer; the last entry is the decoding
    /// distribution.
    pub logits: Vec<Vec<f32>>,
}

impl StepOutputs {
    /// The final layer's logits — what greedy decoding samples from.
    pub fn decode_logits(&self) -> &[f32] {
        self.logits.last().expect("at least one layer")
    }

    /// Greedy choice with ties broken toward the lowest token id.
    pub fn chosen(&self) -> u32 {
        math::argmax(self.decode_logits()) as u32
    }

    /// Greedy choice from a specific 1-based layer's logits.
    pub fn argmax_at(&self, layer: usize) -> Option<u32> {
        self.logits
            .get(layer.checked_sub(1)?)
            .map(|l| math::argmax(l) as u32)
    }

    /// Materialize a capture record at the requested level. Returns `None`
    /// for [`CaptureLevel::None`].
    pub fn capture(&self, step: usize, chosen: u32, opts: &CaptureOptions) -> Option<StepTrace> {
        let full = match opts.level {
            CaptureLevel::None => return None,
            CaptureLevel::TopK => false,
            CaptureLevel::Full => true,
        };
        let layers = self
            .hidden
            .iter()
            .zip(&self.logits)
            .map(|(h, l)| LayerCapture {
                hidden: full.then(|| h.clone()),
                logits: full.then(|| l.clone()),
                top_k: top_k_digest(l, opts.top_k),
            })
            .collect();
        Some(StepTrace {
            step,
            chosen,
            layers,
        })
    }
}

/// Result of a greedy decoding run.
#[derive(Debug, Clone)]
pub struct Generation {
    pub tokens: Vec<u32>,
    /// Present unless capture level was `None`.
    pub traces: Option<Vec<StepTrace>>,
    /// Set when generation stopped because the context filled up.
    pub truncated: bool,
}

/// Per-position outputs of an uncached whole-sequence forward pass.
#[derive(Debug, Clone)]
pub struct FullForward {
    /// `hidden[layer][pos]` — block outputs at every position.
    pub hidden: Vec<Vec<Vec<f32>>>,
    /// `logits[layer][pos]` — lens projections at every position.
    pub logits: Vec<Vec<Vec<f32>>>,
}

impl FullForward {
    /// Outputs at one position, in the same shape the stepper returns.
    pub fn at_position(&self, pos: usize) -> StepOutputs {
        StepOutputs {
            hidden: self.hidden.iter().map(|l| l[pos].clone()).collect(),
            logits: self.logits.iter().map(|l| l[pos].clone()).collect(),
        }
    }
}

impl ModelBundle {
    fn check_context(&self, context: &[u32]) -> Result<()> {
        if context.is_empty() {
            return Err(Error::EmptyContext);
        }
        if context.len() > self.config.max_seq_len {
            return Err(Error::ContextOverflow {
                len: context.len(),
                max: self.config.max_seq_len,
            });
        }
        for &t in context {
            if t >= self.config.vocab_size {
                return Err(Error::TokenOutOfRange {
                    id: t,
                    vocab: self.config.vocab_size,
                });
            }
        }
        Ok(())
    }

    /// Feed one token at the next position, returning every block's output
    /// at that position.
    fn advance(&self, cache: &mut KvCache, token: u32) -> Result<Vec<Vec<f32>>> {
        let cfg = &self.config;
        let (d, heads, hd) = (cfg.d_model, cfg.num_heads, cfg.head_dim());
        let pos = cache.len;
        if pos >= cfg.max_seq_len {
            return Err(Error::ContextOverflow {
                len: pos + 1,
                max: cfg.max_seq_len,
            });
        }
        if token >= cfg.vocab_size {
            return Err(Error::TokenOutOfRange {
                id: token,
                vocab: cfg.vocab_size,
            });
        }

        let row = token as usize * d;
        let mut x = self.embed[row..row + d].to_vec();
        let mut hidden = Vec::with_capacity(cfg.num_layers);
        let inv_scale = 1.0 / (hd as f32).sqrt();

        let mut normed = vec![0.0f32; d];
        let mut q = vec![0.0f32; d];
        let mut k = vec![0.0f32; d];
        let mut v = vec![0.0f32; d];
        let mut ctx = vec![0.0f32; d];
        let mut attn_out = vec![0.0f32; d];
        let mut ff = vec![0.0f32; cfg.d_ff];
        let mut mlp_out = vec![0.0f32; d];

        for (li, lw) in self.layers.iter().enumerate() {
            math::rms_norm(&x, &lw.attn_norm, cfg.norm_eps, &mut normed);
            math::matvec(&normed, &lw.wq, d, &mut q);
            math::matvec(&normed, &lw.wk, d, &mut k);
            math::matvec(&normed, &lw.wv, d, &mut v);
            math::apply_rope(&mut q, heads, hd, pos);
            math::apply_rope(&mut k, heads, hd, pos);
            cache.k[li].extend_from_slice(&k);
            cache.v[li].extend_from_slice(&v);

            ctx.fill(0.0);
            let keys = &cache.k[li];
            let vals = &cache.v[li];
            let mut scores = vec![0.0f32; pos + 1];
            for h in 0..heads {
                let off = h * hd;
                let qh = &q[off..off + hd];
                for (p, s) in scores.iter_mut().enumerate() {
                    *s = math::dot(qh, &keys[p * d + off..p * d + off + hd]) * inv_scale;
                }
                math::softmax_in_place(&mut scores);
                for (p, &s) in scores.iter().enumerate() {
                    let vh = &vals[p * d + off..p * d + off + hd];
                    for (c, &vv) in ctx[off..off + hd].iter_mut().zip(vh) {
                        *c += s * vv;
                    }
                }
            }
            math::matvec(&ctx, &lw.wo, d, &mut attn_out);
            for (xi, &a) in x.iter_mut().zip(&attn_out) {
                *xi += a;
            }

            math::rms_norm(&x, &lw.mlp_norm, cfg.norm_eps, &mut normed);
            math::matvec(&normed, &lw.w_fc, cfg.d_ff, &mut ff);
            for f in ff.iter_mut() {
                *f = math::gelu(*f);
            }
            math::matvec(&ff, &lw.w_proj, d, &mut mlp_out);
            for (xi, &m) in x.iter_mut().zip(&mlp_out) {
                *xi += m;
            }

            if !x.iter().all(|v| v.is_finite()) {
                return Err(Error::NonFinite {
                    context: format!("activation after layer {} at position {pos}", li + 1),
                });
            }
            hidden.push(x.clone());
        }
        cache.len += 1;
        Ok(hidden)
    }

    /// Lens-project every layer's hidden state. The final layer always gets
    /// the final norm — that projection is the decoding distribution.
    fn project_all(&self, hidden: &[Vec<f32>], lens_final_norm: bool) -> Result<Vec<Vec<f32>>> {
        let last = hidden.len() - 1;
        hidden
            .iter()
            .enumerate()
            .map(|(i, h)| {
                if lens_final_norm || i == last {
                    self.project_logits(h)
                } else {
                    self.project_logits_unnormed(h)
                }
            })
            .collect()
    }

    pub(crate) fn step_outputs(
        &self,
        hidden: Vec<Vec<f32>>,
        lens_final_norm: bool,
    ) -> Result<StepOutputs> {
        let logits = self.project_all(&hidden, lens_final_norm)?;
        Ok(StepOutputs { hidden, logits })
    }

    /// Feed `tokens` into a session and return the outputs at the last one.
    pub(crate) fn advance_session(
        &self,
        cache: &mut KvCache,
        tokens: &[u32],
        lens_final_norm: bool,
    ) -> Result<StepOutputs> {
        if tokens.is_empty() {
            return Err(Error::EmptyContext);
        }
        let mut hidden = Vec::new();
        for &t in tokens {
            hidden = self.advance(cache, t)?;
        }
        self.step_outputs(hidden, lens_final_norm)
    }

    /// Last-position outputs for `context`.
    ///
    /// With a cache holding a strict prefix of `context` (by length — the
    /// caller is responsible for feeding consistent tokens), only the
    /// missing suffix is computed and the cache is advanced. Without a
    /// cache, the whole sequence is recomputed with naive attention.
    pub fn forward_step(
        &self,
        context: &[u32],
        cache: Option<&mut KvCache>,
    ) -> Result<StepOutputs> {
        self.check_context(context)?;
        match cache {
            Some(cache) => {
                if cache.len >= context.len() {
                    return Err(Error::StaleCache {
                        cached: cache.len,
                        context: context.len(),
                    });
                }
                let suffix = context[cache.len..].to_vec();
                self.advance_session(cache, &suffix, true)
            }
            None => {
                let full = self.forward_full(context)?;
                Ok(full.at_position(context.len() - 1))
            }
        }
    }

    /// Uncached forward over the whole context, materializing every
    /// position's per-layer outputs. Attention is computed row by row over
    /// the causal prefix.
    pub fn forward_full(&self, context: &[u32]) -> Result<FullForward> {
        self.check_context(context)?;
        let cfg = &self.config;
        let (d, heads, hd) = (cfg.d_model, cfg.num_heads, cfg.head_dim());
        let t_len = context.len();
        let inv_scale = 1.0 / (hd as f32).sqrt();

        let mut xs: Vec<Vec<f32>> = context
            .iter()
            .map(|&t| {
                let row = t as usize * d;
                self.embed[row..row + d].to_vec()
            })
            .collect();

        let mut hidden: Vec<Vec<Vec<f32>>> = Vec::with_capacity(cfg.num_layers);
        let mut normed = vec![0.0f32; d];

        for (li, lw) in self.layers.iter().enumerate() {
            let mut qs = vec![vec![0.0f32; d]; t_len];
            let mut ks = vec![vec![0.0f32; d]; t_len];
            let mut vs = vec![vec![0.0f32; d]; t_len];
            for (pos, x) in xs.iter().enumerate() {
                math::rms_norm(x, &lw.attn_norm, cfg.norm_eps, &mut normed);
                math::matvec(&normed, &lw.wq, d, &mut qs[pos]);
                math::matvec(&normed, &lw.wk, d, &mut ks[pos]);
                math::matvec(&normed, &lw.wv, d, &mut vs[pos]);
                math::apply_rope(&mut qs[pos], heads, hd, pos);
                math::apply_rope(&mut ks[pos], heads, hd, pos);
            }

            let mut ctx = vec![0.0f32; d];
            let mut attn_out = vec![0.0f32; d];
            let mut ff = vec![0.0f32; cfg.d_ff];
            let mut mlp_out = vec![0.0f32; d];
            for pos in 0..t_len {
                ctx.fill(0.0);
                for h in 0..heads {
                    let off = h * hd;
                    let qh = &qs[pos][off..off + hd];
                    let mut scores: Vec<f32> = (0..=pos)
                        .map(|p| math::dot(qh, &ks[p][off..off + hd]) * inv_scale)
                        .collect();
                    math::softmax_in_place(&mut scores);
                    for (p, &s) in scores.iter().enumerate() {
                        for (c, &vv) in ctx[off..off + hd].iter_mut().zip(&vs[p][off..off + hd]) {
                            *c += s * vv;
                        }
                    }
                }
                math::matvec(&ctx, &lw.wo, d, &mut attn_out);
                for (xi, &a) in xs[pos].iter_mut().zip(&attn_out) {
                    *xi += a;
                }
                math::rms_norm(&xs[pos], &lw.mlp_norm, cfg.norm_eps, &mut normed);
                math::matvec(&normed, &lw.w_fc, cfg.d_ff, &mut ff);
                for f in ff.iter_mut() {
                    *f = math::gelu(*f);
                }
                math::matvec(&ff, &lw.w_proj, d, &mut mlp_out);
                for (xi, &m) in xs[pos].iter_mut().zip(&mlp_out) {
                    *xi += m;
                }
                if !xs[pos].iter().all(|v| v.is_finite()) {
                    return Err(Error::NonFinite {
                        context: format!("activation after layer {} at position {pos}", li + 1),
                    });
                }
            }
            hidden.push(xs.clone());
        }

        let mut logits = Vec::with_capacity(cfg.num_layers);
        for layer in &hidden {
            let per_pos: Result<Vec<Vec<f32>>> =
                layer.iter().map(|h| self.project_logits(h)).collect();
            logits.push(per_pos?);
        }
        Ok(FullForward { hidden, logits })
    }

    /// Temperature-zero decoding: emit the argmax of the final layer's
    /// logits until EOS, `max_tokens` tokens, or a full context.
    pub fn greedy_decode(
        &self,
        prompt: &[u32],
        max_tokens: usize,
        capture: &CaptureOptions,
    ) -> Result<Generation> {
        if max_tokens == 0 {
            return Err(Error::InvalidParam {
                reason: "max_tokens must be >= 1".into(),
            });
        }
        self.check_context(prompt)?;

        let mut cache = KvCache::new(self);
        let mut outputs = self.advance_session(&mut cache, prompt, capture.lens_final_norm)?;

        let mut tokens = Vec::new();
        let mut traces = (capture.level != CaptureLevel::None).then(Vec::new);
        let mut truncated = false;
        loop {
            let chosen = outputs.chosen();
            tokens.push(chosen);
            if let Some(traces) = traces.as_mut() {
                traces.extend(outputs.capture(tokens.len() - 1, chosen, capture));
            }
            if chosen == self.config.eos_token_id || tokens.len() == max_tokens {
                break;
            }
            if cache.len() == self.config.max_seq_len {
                truncated = true;
                break;
            }
            outputs = self.advance_session(&mut cache, &[chosen], capture.lens_final_norm)?;
        }
        Ok(Generation {
            tokens,
            traces,
            truncated,
        })
    }
}
