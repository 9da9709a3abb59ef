//! Test-side reference implementations, kept independent of the library's
//! kernels: plain scalar loops over the tensor map, no shared helpers, no
//! KV cache. The golden tests pit the runtime against these.

#![allow(dead_code)]

use std::collections::HashMap;

use exitlens::eval::TaskItem;
use exitlens::model::{ModelBundle, ModelConfig};
use exitlens::trace::StepTrace;

/// A model as a bag of named tensors, evaluated the straightforward way.
pub struct RefModel {
    pub cfg: ModelConfig,
    pub tensors: HashMap<String, Vec<f32>>,
}

impl RefModel {
    pub fn from_bundle(bundle: &ModelBundle) -> Self {
        RefModel {
            cfg: bundle.config().clone(),
            tensors: bundle
                .to_tensors()
                .into_iter()
                .map(|(name, _, data)| (name, data.to_vec()))
                .collect(),
        }
    }

    fn t(&self, name: &str) -> &[f32] {
        &self.tensors[name]
    }

    fn rms(&self, x: &[f32], gain: &[f32]) -> Vec<f32> {
        let mut ss = 0.0f32;
        for &v in x {
            ss += v * v;
        }
        let denom = (ss / x.len() as f32 + self.cfg.norm_eps).sqrt();
        x.iter().zip(gain).map(|(&v, &g)| v / denom * g).collect()
    }

    /// x (len in) times W stored row-major [in, out].
    fn mat(&self, x: &[f32], w: &[f32], out: usize) -> Vec<f32> {
        let mut y = vec![0.0f32; out];
        for (j, yj) in y.iter_mut().enumerate() {
            let mut acc = 0.0f32;
            for (i, &xi) in x.iter().enumerate() {
                acc += xi * w[i * out + j];
            }
            *yj = acc;
        }
        y
    }

    fn rope(&self, v: &mut [f32], pos: usize) {
        let hd = self.cfg.d_model / self.cfg.num_heads;
        for h in 0..self.cfg.num_heads {
            for i in 0..hd / 2 {
                let theta = 10000f64.powf(-2.0 * i as f64 / hd as f64);
                let angle = pos as f64 * theta;
                let (s, c) = (angle.sin() as f32, angle.cos() as f32);
                let a = v[h * hd + 2 * i];
                let b = v[h * hd + 2 * i + 1];
                v[h * hd + 2 * i] = a * c - b * s;
                v[h * hd + 2 * i + 1] = a * s + b * c;
            }
        }
    }

    fn gelu(x: f32) -> f32 {
        let k = (2.0f64 / std::f64::consts::PI).sqrt() as f32;
        0.5 * x * (1.0 + (k * (x + 0.044715 * x * x * x)).tanh())
    }

    /// All block outputs at every position: `[layer][pos][d_model]`.
    pub fn forward(&self, context: &[u32]) -> Vec<Vec<Vec<f32>>> {
        let d = self.cfg.d_model;
        let heads = self.cfg.num_heads;
        let hd = d / heads;
        let n = context.len();
        let embed = self.t("embed.weight");
        let mut xs: Vec<Vec<f32>> = context
            .iter()
            .map(|&t| embed[t as usize * d..(t as usize + 1) * d].to_vec())
            .collect();

        let mut out = Vec::new();
        for layer in 0..self.cfg.num_layers {
            let pfx = format!("layers.{layer}");
            let wq = self.t(&format!("{pfx}.attn.wq.weight"));
            let wk = self.t(&format!("{pfx}.attn.wk.weight"));
            let wv = self.t(&format!("{pfx}.attn.wv.weight"));
            let wo = self.t(&format!("{pfx}.attn.wo.weight"));
            let attn_norm = self.t(&format!("{pfx}.attn_norm.weight")).to_vec();
            let mlp_norm = self.t(&format!("{pfx}.mlp_norm.weight")).to_vec();
            let w_fc = self.t(&format!("{pfx}.mlp.fc.weight"));
            let w_proj = self.t(&format!("{pfx}.mlp.proj.weight"));

            let mut qs = Vec::with_capacity(n);
            let mut ks = Vec::with_capacity(n);
            let mut vs = Vec::with_capacity(n);
            for (pos, x) in xs.iter().enumerate() {
                let a = self.rms(x, &attn_norm);
                let mut q = self.mat(&a, wq, d);
                let mut k = self.mat(&a, wk, d);
                let v = self.mat(&a, wv, d);
                self.rope(&mut q, pos);
                self.rope(&mut k, pos);
                qs.push(q);
                ks.push(k);
                vs.push(v);
            }

            for pos in 0..n {
                let mut ctx = vec![0.0f32; d];
                for h in 0..heads {
                    // plain softmax, no max subtraction
                    let mut weights = Vec::with_capacity(pos + 1);
                    let mut total = 0.0f32;
                    for k in ks.iter().take(pos + 1) {
                        let mut dot = 0.0f32;
                        for i in 0..hd {
                            dot += qs[pos][h * hd + i] * k[h * hd + i];
                        }
                        let e = (dot / (hd as f32).sqrt()).exp();
                        weights.push(e);
                        total += e;
                    }
                    for (p, w) in weights.iter().enumerate() {
                        for i in 0..hd {
                            ctx[h * hd + i] += w / total * vs[p][h * hd + i];
                        }
                    }
                }
                let attn_out = self.mat(&ctx, wo, d);
                for (xi, &a) in xs[pos].iter_mut().zip(&attn_out) {
                    *xi += a;
                }
                let b = self.rms(&xs[pos], &mlp_norm);
                let mut ff = self.mat(&b, w_fc, self.cfg.d_ff);
                for f in ff.iter_mut() {
                    *f = Self::gelu(*f);
                }
                let mlp_out = self.mat(&ff, w_proj, d);
                for (xi, &m) in xs[pos].iter_mut().zip(&mlp_out) {
                    *xi += m;
                }
            }
            out.push(xs.clone());
        }
        out
    }

    /// Final norm then LM head.
    pub fn lens(&self, hidden: &[f32]) -> Vec<f32> {
        let normed = self.rms(hidden, self.t("final_norm.weight"));
        self.mat(
            &normed,
            self.t("lm_head.weight"),
            self.cfg.vocab_size as usize,
        )
    }

    /// Last-position lens logits of every layer.
    pub fn last_position_logits(&self, context: &[u32]) -> Vec<Vec<f32>> {
        let hidden = self.forward(context);
        hidden
            .iter()
            .map(|layer| self.lens(layer.last().unwrap()))
            .collect()
    }

    /// Greedy decoding by full recomputation each step.
    pub fn greedy(&self, prompt: &[u32], max_tokens: usize) -> Vec<u32> {
        let mut context = prompt.to_vec();
        let mut out = Vec::new();
        loop {
            let logits = self.last_position_logits(&context);
            let tok = ref_argmax(logits.last().unwrap());
            out.push(tok);
            if tok == self.cfg.eos_token_id || out.len() == max_tokens {
                break;
            }
            context.push(tok);
        }
        out
    }

    /// Oracle decoding by full recomputation: earliest layer whose logit
    /// cosine against the final layer clears delta.
    pub fn oracle(&self, prompt: &[u32], delta: f64, max_tokens: usize) -> (Vec<u32>, Vec<usize>) {
        let mut context = prompt.to_vec();
        let mut tokens = Vec::new();
        let mut exits = Vec::new();
        loop {
            let logits = self.last_position_logits(&context);
            let last = logits.last().unwrap();
            let mut k_star = self.cfg.num_layers;
            for layer in 1..self.cfg.num_layers {
                if ref_cosine(&logits[layer - 1], last) >= delta {
                    k_star = layer;
                    break;
                }
            }
            let tok = ref_argmax(&logits[k_star - 1]);
            tokens.push(tok);
            exits.push(k_star);
            if tok == self.cfg.eos_token_id || tokens.len() == max_tokens {
                break;
            }
            context.push(tok);
        }
        (tokens, exits)
    }
}

/// Lowest-index argmax, written from scratch.
pub fn ref_argmax(values: &[f32]) -> u32 {
    let mut best = 0usize;
    for i in 1..values.len() {
        if values[i] > values[best] {
            best = i;
        }
    }
    best as u32
}

/// Cosine via f64 sums in a separate formulation (norms first, then dot).
pub fn ref_cosine(a: &[f32], b: &[f32]) -> f64 {
    let na: f64 = a
        .iter()
        .map(|&x| (x as f64) * (x as f64))
        .sum::<f64>()
        .sqrt();
    let nb: f64 = b
        .iter()
        .map(|&x| (x as f64) * (x as f64))
        .sum::<f64>()
        .sqrt();
    let dot: f64 = a
        .iter()
        .zip(b)
        .map(|(&x, &y)| (x as f64) * (y as f64))
        .sum();
    (dot / na / nb).clamp(-1.0, 1.0)
}

/// Top-k ids by logit, ties toward the lower id, selection-sort style.
pub fn ref_top_k(logits: &[f32], k: usize) -> Vec<u32> {
    let mut taken = vec![false; logits.len()];
    let mut out = Vec::with_capacity(k);
    for _ in 0..k.min(logits.len()) {
        let mut best: Option<usize> = None;
        for i in 0..logits.len() {
            if taken[i] {
                continue;
            }
            best = match best {
                None => Some(i),
                Some(b) if logits[i] > logits[b] => Some(i),
                keep => keep,
            };
        }
        let b = best.unwrap();
        taken[b] = true;
        out.push(b as u32);
    }
    out
}

/// Mean/std of one signal at one layer across traces, recomputed with
/// scalar loops straight off the captured tensors.
pub fn ref_layer_stats(traces: &[StepTrace], layer: usize, signal: RefSignal) -> (f64, f64) {
    let values: Vec<f64> = traces
        .iter()
        .map(|t| {
            let last = t.layers.len();
            match signal {
                RefSignal::Hidden => ref_cosine(
                    t.layers[layer - 1].hidden.as_ref().unwrap(),
                    t.layers[last - 1].hidden.as_ref().unwrap(),
                ),
                RefSignal::Logits => ref_cosine(
                    t.layers[layer - 1].logits.as_ref().unwrap(),
                    t.layers[last - 1].logits.as_ref().unwrap(),
                ),
                RefSignal::TopK(k) => {
                    let a = ref_top_k(t.layers[layer - 1].logits.as_ref().unwrap(), k);
                    let b = ref_top_k(t.layers[last - 1].logits.as_ref().unwrap(), k);
                    let shared = a.iter().filter(|id| b.contains(id)).count();
                    shared as f64 / k as f64
                }
            }
        })
        .collect();
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

#[derive(Clone, Copy)]
pub enum RefSignal {
    Hidden,
    Logits,
    TopK(usize),
}

/// Deterministic short ASCII prompts for fixture runs.
pub fn fixture_prompts(n: usize) -> Vec<String> {
    (0..n)
        .map(|i| format!("fixture prompt {i}: the quick brown fox jumps over the lazy dog"))
        .collect()
}

/// Synthetic integer-answer items for harness runs.
pub fn fixture_items(n: usize) -> Vec<TaskItem> {
    (0..n)
        .map(|i| TaskItem {
            id: format!("item-{i}"),
            question: format!("What is {i} + {i}?"),
            options: None,
            reference: Some((2 * i).to_string()),
        })
        .collect()
}
