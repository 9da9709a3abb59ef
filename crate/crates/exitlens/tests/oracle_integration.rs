//! Oracle decoding against the reference re-execution, report composition,
//! and the threshold search against brute-force selection.

mod common;

use common::RefModel;
use exitlens::eval::{Evaluator, TaskKind};
use exitlens::model::fixture;
use exitlens::oracle::{
    delta_grid, evaluate_at_threshold, full_depth_baseline, oracle_decode, select_best,
    threshold_search, OracleEvalOptions, OracleParams,
};
use exitlens::trace::CaptureOptions;

#[test]
fn golden_oracle_transcript() {
    const EXPECTED_TOKENS: [u32; 16] = [
        13, 167, 113, 232, 197, 215, 25, 191, 13, 167, 113, 232, 197, 215, 25, 191,
    ];
    let m = fixture::build_model(fixture::DEFAULT_SEED);
    let prompt = m.tokenizer().encode("Once upon a time");
    let params = OracleParams {
        delta: 0.9,
        max_tokens: 16,
        ..Default::default()
    };
    let t = oracle_decode(&m, "p0", &prompt, &params).unwrap();
    assert_eq!(t.tokens, EXPECTED_TOKENS);
    assert_eq!(t.exit_layers, vec![1usize; 16]);

    // independent step-by-step re-execution with the reference forward pass
    let rm = RefModel::from_bundle(&m);
    let (ref_tokens, ref_exits) = rm.oracle(&prompt, 0.9, 16);
    assert_eq!(ref_tokens, EXPECTED_TOKENS);
    assert_eq!(ref_exits, t.exit_layers);
}

#[test]
fn transcript_invariants_hold() {
    let m = fixture::build_model(fixture::DEFAULT_SEED);
    let prompt = m.tokenizer().encode("invariants");
    let params = OracleParams {
        delta: 0.97,
        max_tokens: 20,
        ..Default::default()
    };
    let t = oracle_decode(&m, "p", &prompt, &params).unwrap();
    assert_eq!(t.exit_layers.len(), t.tokens.len());
    let l = t.num_layers as f64;
    let manual: f64 = t
        .exit_layers
        .iter()
        .map(|&k| (l - k as f64) / l)
        .sum::<f64>()
        / t.exit_layers.len() as f64;
    assert!((t.mean_skip_ratio() - manual).abs() < 1e-12);
    assert_eq!(t.exit_histogram().iter().sum::<usize>(), t.tokens.len());
}

fn small_items(n: usize) -> Vec<exitlens::eval::TaskItem> {
    common::fixture_items(n)
}

#[test]
fn unreachable_delta_keeps_full_accuracy_and_zero_skip() {
    let m = fixture::build_model(fixture::DEFAULT_SEED);
    let items = small_items(4);
    let evaluator = Evaluator::new(TaskKind::Gsm8k);
    let opts = OracleEvalOptions {
        max_tokens: 24,
        ..Default::default()
    };
    let baseline = full_depth_baseline(&m, &items, &evaluator, &opts).unwrap();
    let (report, transcripts) =
        evaluate_at_threshold(&m, &items, &evaluator, 1.01, &opts, &baseline, "synthetic").unwrap();
    assert_eq!(report.ee_accuracy, report.full_accuracy);
    assert_eq!(report.skip_percent, 0.0);
    assert_eq!(report.accuracy_loss, 0.0);
    // transcripts are exactly the greedy trajectories
    for (t, item) in transcripts.iter().zip(&items) {
        let prompt_text = exitlens::eval::render_prompt(TaskKind::Gsm8k, item).unwrap();
        let tokens = m.tokenizer().encode(&prompt_text);
        let greedy = m
            .greedy_decode(&tokens, 24, &CaptureOptions::none())
            .unwrap();
        assert_eq!(t.tokens, greedy.tokens);
    }
}

#[test]
fn two_prompt_report_composes_from_individual_transcripts() {
    let m = fixture::build_model(fixture::DEFAULT_SEED);
    let items = small_items(2);
    let evaluator = Evaluator::new(TaskKind::Gsm8k);
    let opts = OracleEvalOptions {
        max_tokens: 16,
        ..Default::default()
    };
    let delta = 0.95;
    let baseline = full_depth_baseline(&m, &items, &evaluator, &opts).unwrap();
    let (report, transcripts) =
        evaluate_at_threshold(&m, &items, &evaluator, delta, &opts, &baseline, "d").unwrap();

    // recompose the pooled skip percentage by hand
    let params = OracleParams {
        delta,
        max_tokens: 16,
        ..Default::default()
    };
    let mut exits = Vec::new();
    let mut preds = Vec::new();
    for item in &items {
        let prompt_text = exitlens::eval::render_prompt(TaskKind::Gsm8k, item).unwrap();
        let tokens = m.tokenizer().encode(&prompt_text);
        let t = oracle_decode(&m, &item.id, &tokens, &params).unwrap();
        preds.push(m.tokenizer().decode_lossy(&t.tokens).unwrap());
        exits.extend(t.exit_layers.clone());
    }
    let l = m.config().num_layers as f64;
    let expected_skip =
        100.0 * exits.iter().map(|&k| (l - k as f64) / l).sum::<f64>() / exits.len() as f64;
    assert_eq!(report.skip_percent, expected_skip);
    assert_eq!(report.total_tokens, exits.len());
    assert_eq!(transcripts.len(), 2);

    let prompts: Vec<String> = items
        .iter()
        .map(|i| exitlens::eval::render_prompt(TaskKind::Gsm8k, i).unwrap())
        .collect();
    let expected_acc = evaluator
        .score_items(&items, &preds, &prompts)
        .unwrap()
        .accuracy
        / 100.0;
    assert_eq!(report.ee_accuracy, expected_acc);
}

#[test]
fn search_agrees_with_bruteforce_selection_on_fixture_run() {
    let m = fixture::build_model(fixture::DEFAULT_SEED);
    let items = small_items(3);
    let evaluator = Evaluator::new(TaskKind::Gsm8k);
    let opts = OracleEvalOptions {
        max_tokens: 12,
        ..Default::default()
    };
    let grid = delta_grid(0.9, 0.98, 0.02).unwrap();
    let max_loss = 0.05;
    let outcome = threshold_search(&m, &items, &evaluator, &grid, max_loss, &opts, "d").unwrap();

    // brute force over the same grid reports
    let mut best: Option<usize> = None;
    for (i, r) in outcome.grid.iter().enumerate() {
        if r.full_accuracy - r.ee_accuracy <= max_loss {
            best = match best {
                None => Some(i),
                Some(b) if r.skip_percent >= outcome.grid[b].skip_percent => Some(i),
                keep => keep,
            };
        }
    }
    match best {
        Some(i) => {
            assert!(outcome.feasible);
            assert_eq!(outcome.chosen_delta, outcome.grid[i].delta);
            assert_eq!(outcome.chosen, outcome.grid[i]);
        }
        None => {
            assert!(!outcome.feasible);
            assert_eq!(outcome.chosen_delta, *grid.last().unwrap());
        }
    }
    assert_eq!(outcome.grid.len(), grid.len());
}

#[test]
fn select_best_rejects_empty_and_search_rejects_unsorted() {
    assert!(select_best(&[], 0.1).is_err());
    let m = fixture::build_model(fixture::DEFAULT_SEED);
    let items = small_items(1);
    let evaluator = Evaluator::new(TaskKind::Gsm8k);
    let opts = OracleEvalOptions::default();
    assert!(threshold_search(&m, &items, &evaluator, &[0.9, 0.8], 0.05, &opts, "d").is_err());
    assert!(threshold_search(&m, &items, &evaluator, &[], 0.05, &opts, "d").is_err());
}
