//! Upper-bound exploration: linear search over exit thresholds to maximize
//! the skip ratio while keeping accuracy loss within a budget.
//!
//! ```bash
//! cargo run -p exitlens --example upper_bound_search
//! ```

use exitlens::eval::{Evaluator, TaskItem, TaskKind};
use exitlens::model::fixture;
use exitlens::oracle::{delta_grid, threshold_search, OracleEvalOptions};

fn main() -> exitlens::Result<()> {
    let model = fixture::build_model(fixture::DEFAULT_SEED);
    let items: Vec<TaskItem> = (0..6)
        .map(|i| TaskItem {
            id: format!("q{i}"),
            question: format!("What is {i} times 3?"),
            options: None,
            reference: Some((3 * i).to_string()),
        })
        .collect();
    let evaluator = Evaluator::new(TaskKind::Gsm8k);
    let opts = OracleEvalOptions {
        max_tokens: 16,
        ..Default::default()
    };
    let grid = delta_grid(0.80, 1.0, 0.04)?;
    let max_loss = 0.05;

    let outcome = threshold_search(&model, &items, &evaluator, &grid, max_loss, &opts, "demo")?;

    println!(
        "{:>7} {:>10} {:>10} {:>8} {:>8}",
        "delta", "full acc", "ee acc", "loss", "skip %"
    );
    for r in &outcome.grid {
        let marker = if r.delta == outcome.chosen_delta {
            " <-- chosen"
        } else {
            ""
        };
        println!(
            "{:>7.2} {:>10.4} {:>10.4} {:>8.4} {:>8.2}{marker}",
            r.delta, r.full_accuracy, r.ee_accuracy, r.accuracy_loss, r.skip_percent
        );
    }
    println!(
        "\nbest delta {:.2} within a {:.0}-point loss budget (feasible: {});\n\
         the chosen point's skip ratio is the early-exit upper bound for\n\
         this model on this workload.",
        outcome.chosen_delta,
        100.0 * max_loss,
        outcome.feasible
    );
    Ok(())
}
