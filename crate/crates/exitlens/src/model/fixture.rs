//! Deterministic test-model generation.
//!
//! Weights are drawn from a counter-indexed SHA-256 stream so the same seed
//! produces bit-identical tensors on every platform, with no PRNG library in
//! the loop. For a tensor named `name`, 32-byte blocks are
//!
//! ```text
//! block_j = SHA256(seed || 0x00 || name || 0x00 || j as u64 little-endian)
//! ```
//!
//! read as eight little-endian u32 words each; word w becomes the value
//! `-0.08 + 0.16 * (w / 2^32)`, uniform over [-0.08, 0.08).

use std::collections::HashMap;

use sha2::{Digest, Sha256};

use crate::model::bundle::{required_tensors, ModelBundle};
use crate::model::config::ModelConfig;
use crate::model::tokenizer::ByteTokenizer;

/// Seed used by the bundled fixture model and the test suite.
pub const DEFAULT_SEED: &str = "exitlens-fixture-v1";

/// Config of the bundled desk-scale fixture: 4 layers, d_model 64, byte
/// vocabulary plus EOS.
pub fn fixture_config() -> ModelConfig {
    ModelConfig {
        num_layers: 4,
        d_model: 64,
        num_heads: 4,
        d_ff: 256,
        vocab_size: 257,
        max_seq_len: 2048,
        eos_token_id: 256,
        norm_eps: 1e-5,
    }
}

/// Generate `count` stream values for one tensor name.
pub fn tensor_stream(seed: &str, name: &str, count: usize) -> Vec<f32> {
    let mut out = Vec::with_capacity(count);
    let blocks = count.div_ceil(8);
    for j in 0..blocks as u64 {
        let mut hasher = Sha256::new();
        hasher.update(seed.as_bytes());
        hasher.update([0u8]);
        hasher.update(name.as_bytes());
        hasher.update([0u8]);
        hasher.update(j.to_le_bytes());
        let digest = hasher.finalize();
        for k in 0..8 {
            if out.len() == count {
                break;
            }
            let word = u32::from_le_bytes(digest[4 * k..4 * k + 4].try_into().unwrap());
            let unit = word as f64 / 4294967296.0; // 2^32
            out.push((-0.08 + 0.16 * unit) as f32);
        }
    }
    out
}

/// Build an in-memory model with the given config and stream seed.
pub fn build_model_with(config: ModelConfig, seed: &str, model_id: &str) -> ModelBundle {
    let tensors: HashMap<String, Vec<f32>> = required_tensors(&config)
        .into_iter()
        .map(|(name, shape)| {
            let count = shape.iter().product();
            let data = tensor_stream(seed, &name, count);
            (name, data)
        })
        .collect();
    let tokenizer = ByteTokenizer::new(config.eos_token_id, config.vocab_size)
        .expect("fixture tokenizer config is valid");
    ModelBundle::from_tensors(config, tokenizer, model_id, tensors)
        .expect("fixture tensors match their own table")
}

/// The standard fixture model for the given seed.
pub fn build_model(seed: &str) -> ModelBundle {
    build_model_with(fixture_config(), seed, "fixture-4l-64d")
}
