//! Byte-level tokenizer.
//!
//! Ids 0..=255 map one-to-one onto byte values; one reserved id marks end of
//! sequence. No external vocabulary is involved, so encoding never fails and
//! decoding is exact on arbitrary byte strings.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Identifier stored in weight manifests for this scheme.
pub const BYTE_SCHEME: &str = "byte-v1";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ByteTokenizer {
    eos_token_id: u32,
    vocab_size: u32,
}

impl ByteTokenizer {
    /// The EOS id must not shadow a byte id, so it lives in 256..vocab_size.
    pub fn new(eos_token_id: u32, vocab_size: u32) -> Result<Self> {
        if vocab_size < 257 {
            return Err(Error::InvalidConfig {
                reason: format!("byte tokenizer needs vocab_size >= 257, got {vocab_size}"),
            });
        }
        if eos_token_id < 256 || eos_token_id >= vocab_size {
            return Err(Error::InvalidConfig {
                reason: format!(
                    "eos_token_id {eos_token_id} must lie in 256..{vocab_size} for the byte scheme"
                ),
            });
        }
        Ok(ByteTokenizer {
            eos_token_id,
            vocab_size,
        })
    }

    pub fn eos_token_id(&self) -> u32 {
        self.eos_token_id
    }

    pub fn vocab_size(&self) -> u32 {
        self.vocab_size
    }

    pub fn encode(&self, text: &str) -> Vec<u32> {
        self.encode_bytes(text.as_bytes())
    }

    pub fn encode_bytes(&self, bytes: &[u8]) -> Vec<u32> {
        bytes.iter().map(|&b| b as u32).collect()
    }

    /// Decode to raw bytes. EOS ids produce no output; any other non-byte id
    /// is rejected.
    pub fn decode_bytes(&self, ids: &[u32]) -> Result<Vec<u8>> {
        let mut out = Vec::with_capacity(ids.len());
        for &id in ids {
            if id >= self.vocab_size {
                return Err(Error::TokenOutOfRange {
                    id,
                    vocab: self.vocab_size,
                });
            }
            if id < 256 {
                out.push(id as u8);
            }
            // reserved ids (EOS) decode to nothing
        }
        Ok(out)
    }

    /// Decode to text, replacing invalid UTF-8 with U+FFFD. Generated byte
    /// streams are not guaranteed to be valid UTF-8.
    pub fn decode_lossy(&self, ids: &[u32]) -> Result<String> {
        Ok(String::from_utf8_lossy(&self.decode_bytes(ids)?).into_owned())
    }
}
