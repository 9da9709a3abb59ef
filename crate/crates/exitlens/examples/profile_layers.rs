//! Measure how close each layer sits to the final layer during decoding.
//!
//! Decodes a handful of prompts on the in-memory fixture model with full
//! capture and prints the per-layer mean (and spread) of all three
//! layer-to-final signals.
//!
//! ```bash
//! cargo run -p exitlens --example profile_layers
//! ```

use exitlens::model::fixture;
use exitlens::signals::{aggregate, SignalKind};
use exitlens::trace::CaptureOptions;

fn main() -> exitlens::Result<()> {
    let model = fixture::build_model(fixture::DEFAULT_SEED);
    let prompts = [
        "The quick brown fox jumps over the lazy dog.",
        "Counting: one two three four five six seven.",
        "A B C D E F G H I J K L M N O P.",
        "def add(a, b): return a + b",
        "Question: what comes after Tuesday? Answer:",
    ];

    let mut traces = Vec::new();
    for prompt in prompts {
        let tokens = model.tokenizer().encode(prompt);
        let gen = model.greedy_decode(&tokens, 24, &CaptureOptions::default())?;
        traces.extend(gen.traces.expect("full capture"));
    }

    let profile = aggregate(&traces, &SignalKind::all_default())?
        .with_ids(model.model_id(), "inline-prompts");
    println!(
        "model {} | {} prompts, {} generated tokens pooled\n",
        profile.model_id,
        prompts.len(),
        profile.count
    );
    println!(
        "{:<8} {:>6} {:>12} {:>12}",
        "signal", "layer", "mean", "std"
    );
    for signal in &profile.signals {
        for stat in &signal.layers {
            println!(
                "{:<8} {:>6} {:>12.6} {:>12.6}",
                signal.kind.to_string(),
                stat.layer,
                stat.mean,
                stat.std
            );
        }
        println!();
    }
    println!(
        "reading guide: layer L-1 close to 1.0 means the network finishes its\n\
         prediction early; a steep climb only at the last layer means little\n\
         room for early exit."
    );
    Ok(())
}
