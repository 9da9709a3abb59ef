//! Answer extraction and zero-shot scoring for numeric and multiple-choice
//! tasks, plus the exact prompt templates the harness renders.
//!
//! ```bash
//! cargo run -p exitlens --example evaluate_answers
//! ```

use exitlens::eval::{
    extract_gsm8k, first_option, render_prompt, score_gsm8k, score_multiple_choice, ChoiceOptions,
    TaskItem, TaskKind, DEFAULT_EPSILON,
};

fn main() -> exitlens::Result<()> {
    let gsm_item = TaskItem {
        id: "g0".into(),
        question: "A baker sells 17 loaves and bakes 5 more. How many changed hands?".into(),
        options: None,
        reference: Some("17".into()),
    };
    println!(
        "gsm8k template:\n---\n{}\n---\n",
        render_prompt(TaskKind::Gsm8k, &gsm_item)?
    );

    let predictions = vec![
        "17 loaves were sold, so the answer is 17".to_string(),
        "5 + 17 = 22. The answer is 22.".to_string(),
        "it is 17.0 exactly".to_string(),
        "no idea".to_string(),
    ];
    for p in &predictions {
        println!("extract {:?} -> {:?}", p, extract_gsm8k(p));
    }
    let refs = vec!["17".to_string(); predictions.len()];
    let prompts = vec![String::new(); predictions.len()];
    let report = score_gsm8k(&predictions, &refs, &prompts, DEFAULT_EPSILON)?;
    println!(
        "gsm8k accuracy: {:.1}% ({}/{} correct)\n",
        report.accuracy,
        report.correct_count(),
        report.details.len()
    );

    let mc_item = TaskItem {
        id: "m0".into(),
        question: "Which planet is closest to the sun?".into(),
        options: Some(ChoiceOptions {
            a: "Venus".into(),
            b: "Mercury".into(),
            c: "Mars".into(),
            d: "Earth".into(),
        }),
        reference: Some("B".into()),
    };
    println!(
        "mmlu template:\n---\n{}\n---\n",
        render_prompt(TaskKind::Mmlu, &mc_item)?
    );

    let predictions = vec![
        "B. Mercury orbits closest.".to_string(),
        "I would choose (A) here".to_string(),
        "ABBA is a band, not an answer".to_string(),
    ];
    for p in &predictions {
        println!(
            "first option {:?} -> {:?}",
            p,
            first_option(p, &['A', 'B', 'C', 'D'])
        );
    }
    let refs = vec!["B".to_string(); predictions.len()];
    let prompts = vec![String::new(); predictions.len()];
    let report = score_multiple_choice(&predictions, &refs, &prompts)?;
    println!(
        "multiple-choice accuracy: {:.1}% ({}/{} correct)",
        report.accuracy,
        report.correct_count(),
        report.details.len()
    );
    Ok(())
}
