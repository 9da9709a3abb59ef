//! Deterministic decoder-only transformer runtime with per-layer taps.
//!
//! The architecture is the modern dense family: pre-norm blocks, RMS
//! normalization, rotary position embeddings, multi-head causal attention,
//! and a two-layer GELU MLP, all in f32. Every forward step exposes the
//! last-position hidden state of every block together with its lens-projected
//! logits, which is what the profiling layers above consume.

mod bundle;
mod config;
pub mod fixture;
mod forward;
mod manifest;
mod math;
mod tokenizer;

pub use bundle::{required_tensors, ModelBundle};
pub use config::ModelConfig;
pub use forward::{FullForward, Generation, KvCache, StepOutputs};
pub use manifest::{load_model, save_model, FORMAT_NAME, FORMAT_VERSION};
pub use tokenizer::{ByteTokenizer, BYTE_SCHEME};
