//! Turn a similarity profile into a single early-exit adaptability score.
//!
//! Shows the per-layer breakdown (skip weight, mapped similarity, weighted
//! geometric mean), how alpha shifts the balance, and a relative comparison
//! between two differently seeded fixture models.
//!
//! ```bash
//! cargo run -p exitlens --example adaptability_score
//! ```

use exitlens::adaptability::{eas, relative_eas, EasParams};
use exitlens::model::{fixture, ModelBundle};
use exitlens::signals::{aggregate, SignalKind, SimilarityProfile};
use exitlens::trace::CaptureOptions;

fn profile_of(model: &ModelBundle) -> exitlens::Result<SimilarityProfile> {
    let mut traces = Vec::new();
    for i in 0..6 {
        let prompt = format!("sample prompt number {i} for scoring");
        let tokens = model.tokenizer().encode(&prompt);
        let gen = model.greedy_decode(&tokens, 16, &CaptureOptions::default())?;
        traces.extend(gen.traces.expect("full capture"));
    }
    Ok(aggregate(&traces, &[SignalKind::OutputLogits])?
        .with_ids(model.model_id(), "inline-prompts"))
}

fn main() -> exitlens::Result<()> {
    let model = fixture::build_model(fixture::DEFAULT_SEED);
    let profile = profile_of(&model)?;

    let report = eas(&profile, &EasParams::default())?;
    println!("model {} | signal logits | alpha 0.5\n", report.model_id);
    println!(
        "{:>6} {:>12} {:>12} {:>12} {:>12}",
        "layer", "skip w", "mean sim", "mapped", "score"
    );
    for l in &report.layers {
        println!(
            "{:>6} {:>12.6} {:>12.6} {:>12.6} {:>12.6}",
            l.layer, l.skip_weight, l.mean_similarity, l.mapped_similarity, l.score
        );
    }
    println!("{:>6} {:>51} {:>12.6}\n", "", "EAS =", report.eas);

    println!("alpha sweep (0 = pure skip ratio, 1 = pure similarity):");
    for alpha in [0.0, 0.25, 0.5, 0.75, 1.0] {
        let r = eas(
            &profile,
            &EasParams {
                alpha,
                ..Default::default()
            },
        )?;
        println!("  alpha {alpha:.2} -> {:.6}", r.eas);
    }

    // compare against a second model with different weights
    let other = fixture::build_model_with(
        fixture::fixture_config(),
        "exitlens-fixture-variant",
        "fixture-variant",
    );
    let other_report = eas(&profile_of(&other)?, &EasParams::default())?;
    let rel = relative_eas(&other_report, &report)?;
    println!(
        "\nrelative: {} scores {:.6}, {:.4}x the {} baseline ({:.6})",
        other_report.model_id, other_report.eas, rel, report.model_id, report.eas
    );
    Ok(())
}
