//! Capture traces to a binary archive and recompute the profile from the
//! file — the replay path for models profiled elsewhere.
//!
//! ```bash
//! cargo run -p exitlens --example record_replay
//! ```

use exitlens::adaptability::{eas, EasParams};
use exitlens::harness::{read_trace, write_trace};
use exitlens::model::fixture;
use exitlens::signals::{aggregate, SignalKind};
use exitlens::trace::{CaptureLevel, CaptureOptions};

fn main() -> exitlens::Result<()> {
    let model = fixture::build_model(fixture::DEFAULT_SEED);

    let mut traces = Vec::new();
    for i in 0..4 {
        let prompt = format!("replay fidelity prompt {i}");
        let tokens = model.tokenizer().encode(&prompt);
        let gen = model.greedy_decode(&tokens, 12, &CaptureOptions::default())?;
        traces.extend(gen.traces.expect("full capture"));
    }
    let kinds = SignalKind::all_default();
    let live = aggregate(&traces, &kinds)?.with_ids(model.model_id(), "live");

    let dir = std::env::temp_dir().join("exitlens-record-replay");
    std::fs::create_dir_all(&dir).map_err(|e| exitlens::Error::Io {
        path: dir.clone(),
        source: e,
    })?;
    let path = dir.join("capture.trc");
    let archive = write_trace(&model, &traces, CaptureLevel::Full, &path)?;
    println!(
        "wrote {} ({} steps x {} layers, level {:?})",
        path.display(),
        archive.steps.len(),
        archive.num_layers,
        archive.level
    );

    let reread = read_trace(&path)?;
    let replayed = aggregate(&reread.steps, &kinds)?.with_ids(&reread.model_id, "replayed");

    println!(
        "\n{:<8} {:>6} {:>14} {:>14}",
        "signal", "layer", "live mean", "replayed"
    );
    for (ls, rs) in live.signals.iter().zip(&replayed.signals) {
        for (a, b) in ls.layers.iter().zip(&rs.layers) {
            println!(
                "{:<8} {:>6} {:>14.9} {:>14.9}",
                ls.kind.to_string(),
                a.layer,
                a.mean,
                b.mean
            );
            assert_eq!(a.mean, b.mean, "replay must be bit-identical");
            assert_eq!(a.std, b.std);
        }
    }
    println!("\nprofiles are bit-identical across the archive round trip");

    let score = eas(&replayed, &EasParams::default())?;
    println!(
        "adaptability score from the replayed archive: {:.6}",
        score.eas
    );
    Ok(())
}
