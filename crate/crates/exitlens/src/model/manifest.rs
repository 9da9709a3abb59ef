//! Weight file format.
//!
//! A model on disk is a TOML manifest plus a binary blob. The manifest
//! declares the architecture config, the tokenizer scheme, and an ordered
//! tensor table of `(name, shape, offset, length)`; the blob holds raw
//! little-endian IEEE-754 f32 values in row-major order, addressed by the
//! byte offsets in the table. `data.file` is resolved relative to the
//! manifest's directory.
//!
//! ```toml
//! format = "exitlens-weights"
//! version = 1
//! model_id = "fixture-4l-64d"
//!
//! [config]
//! num_layers = 4
//! # ...
//!
//! [tokenizer]
//! scheme = "byte-v1"
//! eos_token_id = 256
//!
//! [data]
//! file = "model.bin"
//!
//! [[tensors]]
//! name = "embed.weight"
//! shape = [257, 64]
//! offset = 0
//! length = 65792
//! ```

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::bundle::ModelBundle;
use crate::model::config::ModelConfig;
use crate::model::tokenizer::{ByteTokenizer, BYTE_SCHEME};

pub const FORMAT_NAME: &str = "exitlens-weights";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
struct ManifestDoc {
    format: String,
    version: u32,
    #[serde(default)]
    model_id: Option<String>,
    config: ModelConfig,
    tokenizer: TokenizerSpec,
    data: DataRef,
    #[serde(default)]
    tensors: Vec<TensorEntry>,
}

#[derive(Debug, Serialize, Deserialize)]
struct TokenizerSpec {
    scheme: String,
    eos_token_id: u32,
}

#[derive(Debug, Serialize, Deserialize)]
struct DataRef {
    file: String,
}

#[derive(Debug, Serialize, Deserialize)]
struct TensorEntry {
    name: String,
    shape: Vec<usize>,
    offset: u64,
    length: u64,
}

/// Load and validate a model from its manifest path.
pub fn load_model(manifest_path: impl AsRef<Path>) -> Result<ModelBundle> {
    let manifest_path = manifest_path.as_ref();
    let text = fs::read_to_string(manifest_path).map_err(|e| Error::io(manifest_path, e))?;
    let doc: ManifestDoc = toml::from_str(&text).map_err(|e| Error::Manifest {
        path: manifest_path.to_path_buf(),
        reason: e.to_string(),
    })?;
    let manifest_err = |reason: String| Error::Manifest {
        path: manifest_path.to_path_buf(),
        reason,
    };

    if doc.format != FORMAT_NAME {
        return Err(manifest_err(format!("unknown format `{}`", doc.format)));
    }
    if doc.version != FORMAT_VERSION {
        return Err(manifest_err(format!("unsupported version {}", doc.version)));
    }
    if doc.tokenizer.scheme != BYTE_SCHEME {
        return Err(manifest_err(format!(
            "unsupported tokenizer scheme `{}`",
            doc.tokenizer.scheme
        )));
    }
    if doc.tokenizer.eos_token_id != doc.config.eos_token_id {
        return Err(manifest_err(format!(
            "tokenizer eos {} disagrees with config eos {}",
            doc.tokenizer.eos_token_id, doc.config.eos_token_id
        )));
    }
    doc.config.validate()?;

    let blob_path = manifest_path
        .parent()
        .unwrap_or_else(|| Path::new("."))
        .join(&doc.data.file);
    let blob = fs::read(&blob_path).map_err(|e| Error::io(&blob_path, e))?;

    let mut tensors: HashMap<String, Vec<f32>> = HashMap::with_capacity(doc.tensors.len());
    for entry in &doc.tensors {
        if tensors.contains_key(&entry.name) {
            return Err(manifest_err(format!("duplicate tensor `{}`", entry.name)));
        }
        let expected_len: usize = entry.shape.iter().product();
        let declared_values = entry.length as usize / 4;
        if entry.length % 4 != 0 || declared_values != expected_len {
            return Err(Error::ShapeMismatch {
                name: entry.name.clone(),
                expected: entry.shape.clone(),
                expected_len,
                actual_len: declared_values,
            });
        }
        let start = entry.offset as usize;
        let end = start + entry.length as usize;
        if end > blob.len() {
            return Err(manifest_err(format!(
                "tensor `{}` extends to byte {end} but blob has {} bytes",
                entry.name,
                blob.len()
            )));
        }
        let values = blob[start..end]
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        tensors.insert(entry.name.clone(), values);
    }

    let tokenizer = ByteTokenizer::new(doc.tokenizer.eos_token_id, doc.config.vocab_size)?;
    let model_id = doc.model_id.unwrap_or_else(|| {
        manifest_path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "model".into())
    });
    ModelBundle::from_tensors(doc.config, tokenizer, model_id, tensors)
}

/// Write a bundle as `<manifest_path>` plus a sibling `.bin` blob, in the
/// canonical tensor order.
pub fn save_model(bundle: &ModelBundle, manifest_path: impl AsRef<Path>) -> Result<()> {
    let manifest_path = manifest_path.as_ref();
    let blob_name = {
        let stem = manifest_path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "model".into());
        format!("{stem}.bin")
    };

    let mut blob: Vec<u8> = Vec::new();
    let mut entries = Vec::new();
    for (name, shape, data) in bundle.to_tensors() {
        let offset = blob.len() as u64;
        for v in data {
            blob.extend_from_slice(&v.to_le_bytes());
        }
        entries.push(TensorEntry {
            name,
            shape,
            offset,
            length: (data.len() * 4) as u64,
        });
    }

    let doc = ManifestDoc {
        format: FORMAT_NAME.to_string(),
        version: FORMAT_VERSION,
        model_id: Some(bundle.model_id().to_string()),
        config: bundle.config().clone(),
        tokenizer: TokenizerSpec {
            scheme: BYTE_SCHEME.to_string(),
            eos_token_id: bundle.config().eos_token_id,
        },
        data: DataRef {
            file: blob_name.clone(),
        },
        tensors: entries,
    };
    let text = toml::to_string_pretty(&doc).map_err(|e| Error::Manifest {
        path: manifest_path.to_path_buf(),
        reason: e.to_string(),
    })?;
    fs::write(manifest_path, text).map_err(|e| Error::io(manifest_path, e))?;
    let blob_path = manifest_path
        .parent()
        .unwrap_or_else(|| Path::new("."))
        .join(&blob_name);
    fs::write(&blob_path, blob).map_err(|e| Error::io(&blob_path, e))?;
    Ok(())
}
