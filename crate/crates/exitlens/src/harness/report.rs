//! Report schema and file emission.
//!
//! Every command writes a deterministic JSON document (plus CSV companions
//! for plotting) and a separate `meta.json` carrying the timestamp and the
//! effective configuration. Identical runs produce byte-identical report
//! payloads; only `meta.json` varies.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::adaptability::EasReport;
use crate::error::{Error, Result};
use crate::signals::SimilarityProfile;

/// Serialize a report as pretty JSON with a trailing newline.
pub fn write_json<T: Serialize>(path: impl AsRef<Path>, value: &T) -> Result<PathBuf> {
    let path = path.as_ref();
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::InvalidParam {
        reason: format!("report serialization failed: {e}"),
    })?;
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))?;
    Ok(path.to_path_buf())
}

fn csv_field(s: &str) -> String {
    if s.contains(',') || s.contains('"') || s.contains('\n') {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Write rows of already-formatted fields as CSV.
pub fn write_csv(path: impl AsRef<Path>, header: &[&str], rows: &[Vec<String>]) -> Result<PathBuf> {
    let path = path.as_ref();
    let mut out = String::new();
    out.push_str(&header.join(","));
    out.push('\n');
    for row in rows {
        let fields: Vec<String> = row.iter().map(|f| csv_field(f)).collect();
        out.push_str(&fields.join(","));
        out.push('\n');
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))?;
    Ok(path.to_path_buf())
}

/// Similarity profile plus the qualitative depth-alignment flag.
#[derive(Debug, Clone, Serialize)]
pub struct ProfileReport {
    pub profile: SimilarityProfile,
    /// Whether mean logit similarity at layer L-1 exceeds layer 1. Late
    /// layers sitting closer to the final output is the expected shape for
    /// trained dense models, but it is model-dependent, so a violation is
    /// flagged rather than treated as an error. `null` when the logit signal
    /// was not profiled or fewer than two layers exist.
    pub rises_toward_final: Option<bool>,
}

impl ProfileReport {
    pub fn new(profile: SimilarityProfile) -> Self {
        let rises = profile
            .signal(crate::signals::SignalKind::OutputLogits)
            .filter(|s| s.layers.len() >= 2)
            .map(|s| s.layers.last().unwrap().mean > s.layers.first().unwrap().mean);
        ProfileReport {
            profile,
            rises_toward_final: rises,
        }
    }
}

pub fn profile_csv_rows(profile: &SimilarityProfile) -> Vec<Vec<String>> {
    let mut rows = Vec::new();
    for signal in &profile.signals {
        for stat in &signal.layers {
            rows.push(vec![
                signal.kind.to_string(),
                stat.layer.to_string(),
                format!("{:.9}", stat.mean),
                format!("{:.9}", stat.std),
                profile.count.to_string(),
            ]);
        }
    }
    rows
}

pub fn eas_csv_rows(report: &EasReport) -> Vec<Vec<String>> {
    report
        .layers
        .iter()
        .map(|l| {
            vec![
                l.layer.to_string(),
                format!("{:.9}", l.skip_weight),
                format!("{:.9}", l.mean_similarity),
                format!("{:.9}", l.mapped_similarity),
                format!("{:.9}", l.score),
            ]
        })
        .collect()
}

/// Relative-score table for comparing models against a baseline.
pub fn relative_csv_rows(entries: &[(String, f64, f64)]) -> Vec<Vec<String>> {
    entries
        .iter()
        .map(|(id, eas, relative)| vec![id.clone(), format!("{eas:.9}"), format!("{relative:.9}")])
        .collect()
}
