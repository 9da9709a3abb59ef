//! Profiling toolkit for layer-wise early-exit decoding.
//!
//! `exitlens` measures how suitable a decoder-only transformer is for
//! early-exit decoding — emitting a token from an intermediate layer once
//! its view of the next token agrees with the final layer's. It ships:
//!
//! - a small deterministic transformer runtime ([`model`]) that taps every
//!   layer's last-position hidden state and lens-projected logits during
//!   greedy decoding, plus a documented weight file format;
//! - layer-to-final similarity signals ([`signals`]): hidden-state cosine,
//!   output-logit cosine, and top-K candidate overlap, aggregated into
//!   per-layer profiles;
//! - the early-exit adaptability score ([`adaptability`]): a per-layer
//!   weighted geometric mean of mapped similarity and skip ratio, averaged
//!   over the non-final layers;
//! - oracle early-exit decoding and a δ-threshold linear search
//!   ([`oracle`]) that bounds the skip ratio achievable within an
//!   accuracy-loss budget;
//! - zero-shot task evaluators ([`eval`]) for numeric and multiple-choice
//!   answers, with the matching prompt templates;
//! - a harness ([`harness`]) for dataset loading, deterministic subset
//!   selection, trace capture/replay archives, and report emission.
//!
//! The `examples/` directory walks through each capability on the bundled
//! deterministic fixture model; the `exitlens` binary exposes the same
//! pipelines as subcommands.

pub mod adaptability;
pub mod error;
pub mod eval;
pub mod harness;
pub mod model;
pub mod oracle;
pub mod signals;
pub mod trace;

pub use error::{Error, ErrorKind, Result};
