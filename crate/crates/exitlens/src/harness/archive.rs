//! Binary trace archive: capture once, recompute signals anywhere.
//!
//! Archives let profiles and adaptability scores be recomputed without the
//! runtime — including for models this crate cannot execute, when the traces
//! were exported by some other stack. Layout, all little-endian:
//!
//! ```text
//! magic    8  b"EXLTRACE"
//! version  u32
//! model_id u32 length + utf-8 bytes
//! num_layers, d_model, vocab_size  u32 each
//! level    u8   (1 = topk, 2 = full)
//! top_k    u32
//! steps    u64
//! then per step:
//!   step_index u64, chosen u32
//!   per layer (num_layers blocks):
//!     full only: d_model f32 hidden, vocab_size f32 logits
//!     always:    top_k u32 ids, top_k f32 values
//! ```
//!
//! Readers check the payload length exactly; truncated or oversized files
//! are rejected.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::model::ModelBundle;
use crate::trace::{CaptureLevel, LayerCapture, StepTrace, TopKDigest};

pub const MAGIC: &[u8; 8] = b"EXLTRACE";
pub const VERSION: u32 = 1;

/// A set of step traces with enough metadata to recompute profiles.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceArchive {
    pub model_id: String,
    pub num_layers: usize,
    pub d_model: usize,
    pub vocab_size: u32,
    pub level: CaptureLevel,
    pub top_k: usize,
    pub steps: Vec<StepTrace>,
}

impl TraceArchive {
    /// Bundle captured traces for archiving, downgrading them to `level`.
    ///
    /// `CaptureLevel::None` cannot be archived; `Full` requires the traces
    /// to actually carry hidden states and logits.
    pub fn from_traces(
        model: &ModelBundle,
        traces: &[StepTrace],
        level: CaptureLevel,
    ) -> Result<Self> {
        let cfg = model.config();
        Self::from_parts(
            model.model_id(),
            cfg.num_layers,
            cfg.d_model,
            cfg.vocab_size,
            traces,
            level,
        )
    }

    pub fn from_parts(
        model_id: &str,
        num_layers: usize,
        d_model: usize,
        vocab_size: u32,
        traces: &[StepTrace],
        level: CaptureLevel,
    ) -> Result<Self> {
        if level == CaptureLevel::None {
            return Err(Error::InvalidParam {
                reason: "cannot archive at capture level `none`".into(),
            });
        }
        let first = traces.first().ok_or(Error::EmptyTraces)?;
        let top_k = first
            .layers
            .first()
            .map(|l| l.top_k.len())
            .unwrap_or_default();
        if top_k == 0 {
            return Err(Error::InvalidParam {
                reason: "traces carry empty top-K digests".into(),
            });
        }

        let mut steps = Vec::with_capacity(traces.len());
        for trace in traces {
            if trace.num_layers() != num_layers {
                return Err(Error::InvalidParam {
                    reason: format!(
                        "trace layer count {} != archive layer count {num_layers}",
                        trace.num_layers()
                    ),
                });
            }
            let mut layers = Vec::with_capacity(num_layers);
            for cap in &trace.layers {
                if cap.top_k.len() != top_k {
                    return Err(Error::InvalidParam {
                        reason: "uneven top-K digest widths across traces".into(),
                    });
                }
                let layer = match level {
                    CaptureLevel::Full => {
                        let hidden = cap.hidden.clone().ok_or(Error::MissingSignal {
                            signal: "hidden state (archive level is full)".into(),
                        })?;
                        let logits = cap.logits.clone().ok_or(Error::MissingSignal {
                            signal: "output logits (archive level is full)".into(),
                        })?;
                        if hidden.len() != d_model || logits.len() != vocab_size as usize {
                            return Err(Error::InvalidParam {
                                reason: "trace tensor sizes disagree with model dims".into(),
                            });
                        }
                        LayerCapture {
                            hidden: Some(hidden),
                            logits: Some(logits),
                            top_k: cap.top_k.clone(),
                        }
                    }
                    _ => LayerCapture {
                        hidden: None,
                        logits: None,
                        top_k: cap.top_k.clone(),
                    },
                };
                layers.push(layer);
            }
            steps.push(StepTrace {
                step: trace.step,
                chosen: trace.chosen,
                layers,
            });
        }

        Ok(TraceArchive {
            model_id: model_id.to_string(),
            num_layers,
            d_model,
            vocab_size,
            level,
            top_k,
            steps,
        })
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut buf: Vec<u8> = Vec::new();
        buf.extend_from_slice(MAGIC);
        buf.extend_from_slice(&VERSION.to_le_bytes());
        buf.extend_from_slice(&(self.model_id.len() as u32).to_le_bytes());
        buf.extend_from_slice(self.model_id.as_bytes());
        buf.extend_from_slice(&(self.num_layers as u32).to_le_bytes());
        buf.extend_from_slice(&(self.d_model as u32).to_le_bytes());
        buf.extend_from_slice(&self.vocab_size.to_le_bytes());
        buf.push(match self.level {
            CaptureLevel::TopK => 1,
            CaptureLevel::Full => 2,
            CaptureLevel::None => unreachable!("rejected at construction"),
        });
        buf.extend_from_slice(&(self.top_k as u32).to_le_bytes());
        buf.extend_from_slice(&(self.steps.len() as u64).to_le_bytes());

        for step in &self.steps {
            buf.extend_from_slice(&(step.step as u64).to_le_bytes());
            buf.extend_from_slice(&step.chosen.to_le_bytes());
            for layer in &step.layers {
                if self.level == CaptureLevel::Full {
                    for v in layer.hidden.as_ref().expect("validated") {
                        buf.extend_from_slice(&v.to_le_bytes());
                    }
                    for v in layer.logits.as_ref().expect("validated") {
                        buf.extend_from_slice(&v.to_le_bytes());
                    }
                }
                for id in &layer.top_k.ids {
                    buf.extend_from_slice(&id.to_le_bytes());
                }
                for v in &layer.top_k.values {
                    buf.extend_from_slice(&v.to_le_bytes());
                }
            }
        }
        fs::write(path, buf).map_err(|e| Error::io(path, e))
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let data = fs::read(path).map_err(|e| Error::io(path, e))?;
        let mut cur = Cursor::new(&data);

        let magic = cur.bytes(8)?;
        if magic != MAGIC {
            return Err(Error::ArchiveFormat {
                reason: "bad magic".into(),
            });
        }
        let version = cur.u32()?;
        if version != VERSION {
            return Err(Error::ArchiveFormat {
                reason: format!("unsupported version {version}"),
            });
        }
        let id_len = cur.u32()? as usize;
        let model_id =
            String::from_utf8(cur.bytes(id_len)?.to_vec()).map_err(|_| Error::ArchiveFormat {
                reason: "model id is not utf-8".into(),
            })?;
        let num_layers = cur.u32()? as usize;
        let d_model = cur.u32()? as usize;
        let vocab_size = cur.u32()?;
        let level = match cur.bytes(1)?[0] {
            1 => CaptureLevel::TopK,
            2 => CaptureLevel::Full,
            other => {
                return Err(Error::ArchiveFormat {
                    reason: format!("unknown capture level {other}"),
                })
            }
        };
        let top_k = cur.u32()? as usize;
        let step_count = cur.u64()? as usize;
        if num_layers == 0 || top_k == 0 {
            return Err(Error::ArchiveFormat {
                reason: "degenerate header (zero layers or zero top_k)".into(),
            });
        }

        let mut steps = Vec::with_capacity(step_count);
        for _ in 0..step_count {
            let step = cur.u64()? as usize;
            let chosen = cur.u32()?;
            let mut layers = Vec::with_capacity(num_layers);
            for _ in 0..num_layers {
                let (hidden, logits) = if level == CaptureLevel::Full {
                    let hidden = cur.f32s(d_model)?;
                    let logits = cur.f32s(vocab_size as usize)?;
                    if !hidden.iter().chain(&logits).all(|v| v.is_finite()) {
                        return Err(Error::NonFinite {
                            context: format!("archived tensors at step {step}"),
                        });
                    }
                    (Some(hidden), Some(logits))
                } else {
                    (None, None)
                };
                let ids = cur.u32s(top_k)?;
                let values = cur.f32s(top_k)?;
                layers.push(LayerCapture {
                    hidden,
                    logits,
                    top_k: TopKDigest { ids, values },
                });
            }
            steps.push(StepTrace {
                step,
                chosen,
                layers,
            });
        }
        if !cur.at_end() {
            return Err(Error::ArchiveFormat {
                reason: format!("{} trailing bytes after declared payload", cur.remaining()),
            });
        }
        Ok(TraceArchive {
            model_id,
            num_layers,
            d_model,
            vocab_size,
            level,
            top_k,
            steps,
        })
    }
}

/// Archive traces to a file; see [`TraceArchive::from_traces`].
pub fn write_trace(
    model: &ModelBundle,
    traces: &[StepTrace],
    level: CaptureLevel,
    path: impl AsRef<Path>,
) -> Result<TraceArchive> {
    let archive = TraceArchive::from_traces(model, traces, level)?;
    archive.write(path)?;
    Ok(archive)
}

/// Read an archive back; see [`TraceArchive::read`].
pub fn read_trace(path: impl AsRef<Path>) -> Result<TraceArchive> {
    TraceArchive::read(path)
}

struct Cursor<'a> {
    data: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn new(data: &'a [u8]) -> Self {
        Cursor { data, pos: 0 }
    }

    fn bytes(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.data.len() {
            return Err(Error::ArchiveFormat {
                reason: format!(
                    "truncated: wanted {n} bytes at offset {}, file has {}",
                    self.pos,
                    self.data.len()
                ),
            });
        }
        let s = &self.data[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.bytes(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.bytes(8)?.try_into().unwrap()))
    }

    fn f32s(&mut self, n: usize) -> Result<Vec<f32>> {
        let raw = self.bytes(n * 4)?;
        Ok(raw
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }

    fn u32s(&mut self, n: usize) -> Result<Vec<u32>> {
        let raw = self.bytes(n * 4)?;
        Ok(raw
            .chunks_exact(4)
            .map(|c| u32::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }

    fn at_end(&self) -> bool {
        self.pos == self.data.len()
    }

    fn remaining(&self) -> usize {
        self.data.len() - self.pos
    }
}
