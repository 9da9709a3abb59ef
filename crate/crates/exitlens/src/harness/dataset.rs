//! Dataset ingestion and deterministic subset selection.
//!
//! Datasets are line-delimited JSON. Every record needs the fields its task
//! kind requires:
//!
//! - `gsm8k`:   `{"question": "...", "answer": "<integer>"}`
//! - `mmlu` / `gpqa`: `{"question": "...", "A": "...", "B": "...",
//!   "C": "...", "D": "...", "answer": "A".."D"}`
//! - `humaneval`: `{"prompt": "..."}`
//!
//! An optional `"id"` field gives an item a stable identifier; otherwise the
//! 1-based line number is used.

use std::collections::HashSet;
use std::fs;
use std::path::Path;

use serde::Deserialize;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::eval::{ChoiceOptions, TaskItem, TaskKind};

#[derive(Debug, Deserialize)]
struct RawRecord {
    #[serde(default)]
    id: Option<String>,
    #[serde(default)]
    question: Option<String>,
    #[serde(default)]
    prompt: Option<String>,
    #[serde(default, rename = "A")]
    a: Option<String>,
    #[serde(default, rename = "B")]
    b: Option<String>,
    #[serde(default, rename = "C")]
    c: Option<String>,
    #[serde(default, rename = "D")]
    d: Option<String>,
    #[serde(default)]
    answer: Option<String>,
}

/// Parse and validate a dataset file for a task kind.
pub fn load_dataset(path: impl AsRef<Path>, kind: TaskKind) -> Result<Vec<TaskItem>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut items = Vec::new();
    let mut seen: HashSet<String> = HashSet::new();
    for (lineno, line) in text.lines().enumerate() {
        let lineno = lineno + 1;
        if line.trim().is_empty() {
            continue;
        }
        let raw: RawRecord = serde_json::from_str(line).map_err(|e| Error::DatasetLine {
            line: lineno,
            reason: e.to_string(),
        })?;
        let id = raw.id.unwrap_or_else(|| lineno.to_string());
        if !seen.insert(id.clone()) {
            return Err(Error::DuplicateId { id });
        }
        let question = match kind {
            TaskKind::HumanEval => raw.prompt.or(raw.question),
            _ => raw.question,
        }
        .unwrap_or_default();
        let options = match (raw.a, raw.b, raw.c, raw.d) {
            (Some(a), Some(b), Some(c), Some(d)) => Some(ChoiceOptions { a, b, c, d }),
            (None, None, None, None) => None,
            _ => {
                return Err(Error::DatasetLine {
                    line: lineno,
                    reason: "options must be all of A, B, C, D or none".into(),
                })
            }
        };
        let item = TaskItem {
            id,
            question,
            options,
            reference: raw.answer,
        };
        item.validate(kind).map_err(|e| Error::DatasetLine {
            line: lineno,
            reason: e.to_string(),
        })?;
        items.push(item);
    }
    Ok(items)
}

/// Selection key: SHA-256 over `seed || 0x1F || id`.
fn subset_key(seed: &str, id: &str) -> [u8; 32] {
    let mut hasher = Sha256::new();
    hasher.update(seed.as_bytes());
    hasher.update([0x1F]);
    hasher.update(id.as_bytes());
    hasher.finalize().into()
}

/// Pick a deterministic pseudo-random subset of `n` items.
///
/// Items are ordered by the hash of `(seed, id)` and the first `n` taken, so
/// the result is independent of the input order and of any PRNG library.
pub fn select_subset(items: &[TaskItem], seed: &str, n: usize) -> Result<Vec<TaskItem>> {
    if n == 0 {
        return Err(Error::InvalidParam {
            reason: "subset size must be >= 1".into(),
        });
    }
    let mut keyed: Vec<([u8; 32], &TaskItem)> = items
        .iter()
        .map(|item| (subset_key(seed, &item.id), item))
        .collect();
    keyed.sort_by(|a, b| a.0.cmp(&b.0).then_with(|| a.1.id.cmp(&b.1.id)));
    Ok(keyed
        .into_iter()
        .take(n)
        .map(|(_, item)| item.clone())
        .collect())
}
