//! Parameter checkpoint files.
//!
//! Layout (all little-endian):
//!
//! | offset | size | field                                   |
//! |--------|------|-----------------------------------------|
//! | 0      | 4    | magic `PWZC`                            |
//! | 4      | 2    | format version, `1`                     |
//! | 6      | 2    | reserved, `0`                           |
//! | 8      | 4    | parameter count, `21313`                |
//! | 12     | 4    | reserved, `0`                           |
//! | 16     | 4·n  | `f32` values in [`TENSOR_NAMES`] order  |
//!
//! [`TENSOR_NAMES`]: super::params::TENSOR_NAMES

use std::path::Path;

use super::params::{DenoiserParams, PARAM_COUNT};
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"PWZC";
pub const VERSION: u16 = 1;
pub const HEADER_LEN: usize = 16;

pub fn encode(params: &DenoiserParams<f32>) -> Vec<u8> {
    let flat = params.to_flat();
    let mut out = Vec::with_capacity(HEADER_LEN + 4 * flat.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&0u16.to_le_bytes());
    out.extend_from_slice(&(flat.len() as u32).to_le_bytes());
    out.extend_from_slice(&0u32.to_le_bytes());
    for v in flat {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn decode(bytes: &[u8], path: &Path) -> Result<DenoiserParams<f32>> {
    if bytes.len() < HEADER_LEN || &bytes[..4] != MAGIC {
        return Err(Error::format(path, "missing PWZC header"));
    }
    let version = u16::from_le_bytes([bytes[4], bytes[5]]);
    if version != VERSION {
        return Err(Error::format(path, format!("unsupported version {version}")));
    }
    let count = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    if count != PARAM_COUNT {
        return Err(Error::format(path, format!("expected {PARAM_COUNT} parameters, header says {count}")));
    }
    let payload = &bytes[HEADER_LEN..];
    if payload.len() != 4 * count {
        return Err(Error::format(
            path,
            format!("payload is {} bytes, expected {}", payload.len(), 4 * count),
        ));
    }
    let flat: Vec<f32> = payload
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect();
    DenoiserParams::from_flat(&flat)
}

pub fn save(params: &DenoiserParams<f32>, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, encode(params)).map_err(|e| Error::io(path, e))
}

pub fn load(path: impl AsRef<Path>) -> Result<DenoiserParams<f32>> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&bytes, path)
}
