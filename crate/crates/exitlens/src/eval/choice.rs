//! Multiple-choice answer extraction and scoring.

use crate::error::{Error, Result};
use crate::eval::{EvalReport, ExampleDetail};

/// First option letter appearing as a standalone token.
///
/// A letter counts as standalone when neither neighbor is alphanumeric, so
/// "B.", "(C)", and "Answer: D" match while the A and B inside "ABSENT" do
/// not. Matching is case-sensitive: answer letters are uppercase.
pub fn first_option(prediction: &str, options: &[char]) -> Option<char> {
    let chars: Vec<char> = prediction.chars().collect();
    for (i, &c) in chars.iter().enumerate() {
        if !options.contains(&c) {
            continue;
        }
        let prev_ok = i == 0 || !chars[i - 1].is_alphanumeric();
        let next_ok = i + 1 == chars.len() || !chars[i + 1].is_alphanumeric();
        if prev_ok && next_ok {
            return Some(c);
        }
    }
    None
}

/// Score predictions whose references are single letters A-D.
pub fn score_multiple_choice(
    predictions: &[String],
    references: &[String],
    prompts: &[String],
) -> Result<EvalReport> {
    if predictions.len() != references.len() {
        return Err(Error::LengthMismatch {
            left: predictions.len(),
            right: references.len(),
        });
    }
    const OPTIONS: [char; 4] = ['A', 'B', 'C', 'D'];
    let mut correct = 0usize;
    let mut details = Vec::with_capacity(predictions.len());
    for (i, (pred, reference)) in predictions.iter().zip(references).enumerate() {
        if reference.len() != 1 || !OPTIONS.contains(&reference.chars().next().unwrap()) {
            return Err(Error::MalformedReference {
                value: reference.clone(),
            });
        }
        let extracted = first_option(pred, &OPTIONS);
        let is_correct = extracted.map(String::from).as_deref() == Some(reference.as_str());
        if is_correct {
            correct += 1;
        }
        details.push(ExampleDetail {
            prompt: prompts.get(i).cloned().unwrap_or_default(),
            prediction: pred.clone(),
            extracted: extracted.map(String::from),
            reference: reference.clone(),
            is_correct,
        });
    }
    Ok(EvalReport {
        accuracy: 100.0 * correct as f64 / predictions.len().max(1) as f64,
        details,
    })
}
