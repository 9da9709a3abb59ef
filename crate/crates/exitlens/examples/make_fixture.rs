//! Write the bundled fixture model and demo datasets to disk so the
//! `exitlens` CLI has something to run on.
//!
//! ```bash
//! cargo run -p exitlens --example make_fixture -- fixture-out
//! ```

use std::fs;
use std::path::PathBuf;

use exitlens::model::{fixture, save_model};

fn main() -> exitlens::Result<()> {
    let dir = PathBuf::from(
        std::env::args()
            .nth(1)
            .unwrap_or_else(|| "fixture-out".into()),
    );
    fs::create_dir_all(&dir).map_err(|e| exitlens::Error::Io {
        path: dir.clone(),
        source: e,
    })?;

    let model = fixture::build_model(fixture::DEFAULT_SEED);
    let manifest = dir.join("fixture.toml");
    save_model(&model, &manifest)?;
    println!(
        "model:   {} ({} layers, d_model {}, vocab {})",
        manifest.display(),
        model.config().num_layers,
        model.config().d_model,
        model.config().vocab_size
    );

    let gsm8k = dir.join("gsm8k-demo.jsonl");
    let lines: Vec<String> = (0..20)
        .map(|i| {
            format!(
                r#"{{"id": "g{i}", "question": "If a crate holds {} apples and you add {} more, how many apples are in the crate?", "answer": "{}"}}"#,
                3 + i,
                2 * i,
                3 + i + 2 * i
            )
        })
        .collect();
    fs::write(&gsm8k, lines.join("\n") + "\n").map_err(|e| exitlens::Error::Io {
        path: gsm8k.clone(),
        source: e,
    })?;
    println!("dataset: {} (gsm8k, 20 items)", gsm8k.display());

    let mmlu = dir.join("mmlu-demo.jsonl");
    let subjects = ["ohms law", "photosynthesis", "supply curves", "sorting"];
    let lines: Vec<String> = (0..20)
        .map(|i| {
            let answer = ["A", "B", "C", "D"][i % 4];
            format!(
                r#"{{"id": "m{i}", "question": "Which option is labeled {answer} in this {} question?", "A": "alpha", "B": "bravo", "C": "charlie", "D": "delta", "answer": "{answer}"}}"#,
                subjects[i % subjects.len()]
            )
        })
        .collect();
    fs::write(&mmlu, lines.join("\n") + "\n").map_err(|e| exitlens::Error::Io {
        path: mmlu.clone(),
        source: e,
    })?;
    println!("dataset: {} (mmlu, 20 items)", mmlu.display());

    println!("\ntry:");
    println!(
        "  cargo run -p exitlens -- profile --model {} --dataset {} --task gsm8k \\",
        manifest.display(),
        gsm8k.display()
    );
    println!("      --subset-n 10 --max-tokens 32 --out runs/profile");
    println!(
        "  cargo run -p exitlens -- search --model {} --dataset {} --task gsm8k \\",
        manifest.display(),
        gsm8k.display()
    );
    println!("      --subset-n 5 --max-tokens 24 --grid 0.8:1.0:0.05 --out runs/search");
    Ok(())
}
