//! Similarity profiles against an independent scalar recomputation, and
//! archive round-trip fidelity.

mod common;

use common::{ref_layer_stats, RefSignal};
use exitlens::harness::{read_trace, write_trace};
use exitlens::model::{fixture, ModelBundle};
use exitlens::signals::{aggregate, SignalKind};
use exitlens::trace::{CaptureLevel, CaptureOptions, StepTrace};

fn capture_fixture_traces(prompts: usize, max_tokens: usize) -> (ModelBundle, Vec<StepTrace>) {
    let m = fixture::build_model(fixture::DEFAULT_SEED);
    let mut traces = Vec::new();
    for p in common::fixture_prompts(prompts) {
        let tokens = m.tokenizer().encode(&p);
        let gen = m
            .greedy_decode(&tokens, max_tokens, &CaptureOptions::default())
            .unwrap();
        traces.extend(gen.traces.unwrap());
    }
    (m, traces)
}

#[test]
fn golden_profile_matches_scalar_loop_recomputation() {
    let (_m, traces) = capture_fixture_traces(10, 8);
    assert_eq!(traces.len(), 80);
    let kinds = SignalKind::all_default();
    let profile = aggregate(&traces, &kinds).unwrap();

    let pairs = [
        (SignalKind::HiddenState, RefSignal::Hidden),
        (SignalKind::OutputLogits, RefSignal::Logits),
        (SignalKind::top_k_default(), RefSignal::TopK(10)),
    ];
    for (kind, ref_kind) in pairs {
        let sp = profile.signal(kind).unwrap();
        for stat in &sp.layers {
            let (mean, std) = ref_layer_stats(&traces, stat.layer, ref_kind);
            assert!(
                (stat.mean - mean).abs() < 1e-12,
                "{kind} layer {} mean {} vs {mean}",
                stat.layer,
                stat.mean
            );
            assert!((stat.std - std).abs() < 1e-12);
        }
    }

    // frozen spot values for the fixture profile (f32 forward drift budget)
    let logits = profile.signal(SignalKind::OutputLogits).unwrap();
    let frozen = [0.976008, 0.982217, 0.990982];
    for (stat, e) in logits.layers.iter().zip(frozen) {
        assert!(
            (stat.mean - e).abs() < 1e-4,
            "layer {}: {}",
            stat.layer,
            stat.mean
        );
    }
}

#[test]
fn live_and_replayed_profiles_are_bit_identical() {
    let (m, traces) = capture_fixture_traces(6, 6);
    let kinds = SignalKind::all_default();
    let live = aggregate(&traces, &kinds).unwrap();

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("replay.trc");
    write_trace(&m, &traces, CaptureLevel::Full, &path).unwrap();
    let archive = read_trace(&path).unwrap();
    assert_eq!(archive.steps, traces);

    let replayed = aggregate(&archive.steps, &kinds).unwrap();
    // identical f32 inputs through the same code path: exact equality
    assert_eq!(live.signals, replayed.signals);
    assert_eq!(live.count, replayed.count);
}

#[test]
fn topk_archive_supports_only_candidate_signals() {
    let (m, traces) = capture_fixture_traces(2, 4);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("topk.trc");
    write_trace(&m, &traces, CaptureLevel::TopK, &path).unwrap();
    let archive = read_trace(&path).unwrap();

    assert!(aggregate(&archive.steps, &[SignalKind::HiddenState]).is_err());
    assert!(aggregate(&archive.steps, &[SignalKind::OutputLogits]).is_err());

    let live = aggregate(&traces, &[SignalKind::top_k_default()]).unwrap();
    let replayed = aggregate(&archive.steps, &[SignalKind::top_k_default()]).unwrap();
    assert_eq!(live.signals, replayed.signals);
}

#[test]
fn digest_width_bounds_replayed_k() {
    let (m, traces) = capture_fixture_traces(1, 3);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("k.trc");
    write_trace(&m, &traces, CaptureLevel::TopK, &path).unwrap();
    let archive = read_trace(&path).unwrap();
    assert_eq!(archive.top_k, 10);
    // narrower K works off the stored prefix, wider K cannot
    assert!(aggregate(&archive.steps, &[SignalKind::TopK { k: 5 }]).is_ok());
    assert!(aggregate(&archive.steps, &[SignalKind::TopK { k: 11 }]).is_err());
}
