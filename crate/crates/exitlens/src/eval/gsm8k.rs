//! Numeric answer extraction and scoring.
//!
//! A prediction is truncated at its first "Question:" (models often start a
//! new question after answering), every match of `-?\d+\.\d+|-?\d+` is
//! collected, and the last one is the extracted answer. Thousand separators
//! and scientific notation are deliberately not handled — the pattern is
//! applied exactly as written.

use std::sync::OnceLock;

use regex::Regex;

use crate::error::{Error, Result};
use crate::eval::{EvalReport, ExampleDetail};

/// Tolerance distinguishing adjacent integers while absorbing float parsing
/// noise.
pub const DEFAULT_EPSILON: f64 = 1e-6;

fn number_pattern() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"-?\d+\.\d+|-?\d+").expect("pattern is valid"))
}

/// Last number in the prediction, before any trailing "Question:".
pub fn extract_gsm8k(prediction: &str) -> Option<String> {
    let head = prediction.split("Question:").next().unwrap_or(prediction);
    number_pattern()
        .find_iter(head)
        .last()
        .map(|m| m.as_str().to_string())
}

/// Score numeric predictions against integer references.
///
/// A prediction is correct when its extracted answer equals the reference
/// string, or when the two parse to numbers within `epsilon`.
pub fn score_gsm8k(
    predictions: &[String],
    references: &[String],
    prompts: &[String],
    epsilon: f64,
) -> Result<EvalReport> {
    if predictions.len() != references.len() {
        return Err(Error::LengthMismatch {
            left: predictions.len(),
            right: references.len(),
        });
    }
    let mut correct = 0usize;
    let mut details = Vec::with_capacity(predictions.len());
    for (i, (pred, reference)) in predictions.iter().zip(references).enumerate() {
        let ref_int: i64 = reference
            .trim()
            .parse()
            .map_err(|_| Error::MalformedReference {
                value: reference.clone(),
            })?;
        let extracted = extract_gsm8k(pred);
        let is_correct = match &extracted {
            Some(ans) => {
                ans == reference
                    || ans
                        .parse::<f64>()
                        .map(|v| (v - ref_int as f64).abs() < epsilon)
                        .unwrap_or(false)
            }
            None => false,
        };
        if is_correct {
            correct += 1;
        }
        details.push(ExampleDetail {
            prompt: prompts.get(i).cloned().unwrap_or_default(),
            prediction: pred.clone(),
            extracted,
            reference: reference.clone(),
            is_correct,
        });
    }
    Ok(EvalReport {
        accuracy: 100.0 * correct as f64 / predictions.len().max(1) as f64,
        details,
    })
}
