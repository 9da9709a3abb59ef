//! Architecture hyperparameters.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dimensions and constants of a decoder-only transformer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub num_layers: usize,
    pub d_model: usize,
    pub num_heads: usize,
    pub d_ff: usize,
    pub vocab_size: u32,
    pub max_seq_len: usize,
    pub eos_token_id: u32,
    pub norm_eps: f32,
}

impl ModelConfig {
    /// Check the structural invariants; every loaded config passes through
    /// here before weights are accepted.
    pub fn validate(&self) -> Result<()> {
        let fail = |reason: String| Err(Error::InvalidConfig { reason });
        if self.num_layers == 0
            || self.d_model == 0
            || self.num_heads == 0
            || self.d_ff == 0
            || self.vocab_size == 0
            || self.max_seq_len == 0
        {
            return fail("all dimensions must be >= 1".into());
        }
        if !self.d_model.is_multiple_of(self.num_heads) {
            return fail(format!(
                "d_model {} not divisible by num_heads {}",
                self.d_model, self.num_heads
            ));
        }
        if !self.head_dim().is_multiple_of(2) {
            return fail(format!(
                "head dim {} must be even for rotary embeddings",
                self.head_dim()
            ));
        }
        if self.eos_token_id >= self.vocab_size {
            return fail(format!(
                "eos_token_id {} >= vocab_size {}",
                self.eos_token_id, self.vocab_size
            ));
        }
        if self.norm_eps.is_nan() || self.norm_eps <= 0.0 {
            return fail(format!("norm_eps {} must be positive", self.norm_eps));
        }
        Ok(())
    }

    pub fn head_dim(&self) -> usize {
        self.d_model / self.num_heads
    }
}
