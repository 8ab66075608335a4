//! Binary parameter checkpoints.
//!
//! Layout, all integers little-endian:
//!
//! | bytes | field |
//! |---|---|
//! | 8 | magic `GCPOCKPT` |
//! | 4 | format version (`1`) |
//! | 4 | rows (vocabulary size) |
//! | 4 | cols (feature dimension) |
//! | 8 | parameter version counter |
//! | 32 | SHA-256 of the training config |
//! | 8 * rows * cols | `f64` weights, row-major |

use std::path::Path;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::policy::{Matrix, PolicyParams};

pub const MAGIC: &[u8; 8] = b"GCPOCKPT";
pub const FORMAT_VERSION: u32 = 1;
const HEADER_LEN: usize = 8 + 4 + 4 + 4 + 8 + 32;

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub params: PolicyParams,
    pub config_hash: [u8; 32],
}

/// SHA-256 of the JSON encoding of `config`.
pub fn config_hash<T: Serialize>(config: &T) -> [u8; 32] {
    let bytes = serde_json::to_vec(config).expect("config serializes");
    Sha256::digest(&bytes).into()
}

pub fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

impl Checkpoint {
    pub fn to_bytes(&self) -> Vec<u8> {
        let (rows, cols) = self.params.theta.shape();
        let mut out = Vec::with_capacity(HEADER_LEN + 8 * rows * cols);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        out.extend_from_slice(&(rows as u32).to_le_bytes());
        out.extend_from_slice(&(cols as u32).to_le_bytes());
        out.extend_from_slice(&self.params.version.to_le_bytes());
        out.extend_from_slice(&self.config_hash);
        for v in self.params.theta.as_slice() {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let bad = |msg: &str| Error::Checkpoint(msg.to_string());
        if bytes.len() < HEADER_LEN {
            return Err(bad("file shorter than header"));
        }
        if &bytes[..8] != MAGIC {
            return Err(bad("bad magic"));
        }
        let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap());
        let version = u32_at(8);
        if version != FORMAT_VERSION {
            return Err(Error::Checkpoint(format!("unsupported format version {version}")));
        }
        let rows = u32_at(12) as usize;
        let cols = u32_at(16) as usize;
        let param_version = u64::from_le_bytes(bytes[20..28].try_into().unwrap());
        let config_hash: [u8; 32] = bytes[28..60].try_into().unwrap();
        let body = &bytes[HEADER_LEN..];
        if body.len() != 8 * rows * cols {
            return Err(Error::Checkpoint(format!(
                "expected {} weight bytes for {rows}x{cols}, found {}",
                8 * rows * cols,
                body.len()
            )));
        }
        let data = body
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        let theta = Matrix::from_vec(rows, cols, data)?;
        let mut params = PolicyParams::new(theta).map_err(|_| bad("non-finite weights"))?;
        params.version = param_version;
        Ok(Self { params, config_hash })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }
}
