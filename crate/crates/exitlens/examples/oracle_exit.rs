//! Oracle early-exit decoding: emit each token from the earliest layer that
//! already agrees with the final layer.
//!
//! Decodes one prompt at several thresholds and shows the exit-layer
//! histogram, the skip ratio, and whether the trajectory diverged from
//! plain greedy decoding (it may — emitted tokens come from the exit
//! layer's logits).
//!
//! ```bash
//! cargo run -p exitlens --example oracle_exit
//! ```

use exitlens::model::fixture;
use exitlens::oracle::{oracle_decode, OracleParams};
use exitlens::trace::CaptureOptions;

fn main() -> exitlens::Result<()> {
    let model = fixture::build_model(fixture::DEFAULT_SEED);
    let prompt_text = "Once upon a time";
    let prompt = model.tokenizer().encode(prompt_text);
    let max_tokens = 24;

    let greedy = model.greedy_decode(&prompt, max_tokens, &CaptureOptions::none())?;
    println!("prompt: {prompt_text:?}");
    println!("greedy tokens:           {:?}\n", greedy.tokens);

    for delta in [-1.0, 0.9, 0.99, 1.01] {
        let params = OracleParams {
            delta,
            max_tokens,
            ..Default::default()
        };
        let t = oracle_decode(&model, "demo", &prompt, &params)?;
        let same = t.tokens == greedy.tokens;
        println!(
            "delta {delta:>5}: skip {:>5.1}% | exits {:?} | histogram {:?} | equals greedy: {same}",
            100.0 * t.mean_skip_ratio(),
            &t.exit_layers[..t.exit_layers.len().min(10)],
            t.exit_histogram(),
        );
    }

    println!(
        "\ndelta above the attainable maximum forces full depth, reproducing\n\
         greedy decoding exactly; low deltas exit at layer 1 and trade\n\
         accuracy for the maximum (L-1)/L skip."
    );
    Ok(())
}
