//! Reader for the IDX format used by the MNIST files.
//!
//! Layout: two zero bytes, a type byte (only `0x08`, unsigned byte, is
//! supported), a dimension count, one big-endian `u32` per dimension, then the
//! payload in row-major order.

use std::path::Path;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum IdxError {
    #[error("truncated header at offset {offset}")]
    TruncatedHeader { offset: usize },
    #[error("bad magic 0x{found:08x} at offset 0 (expected 0x000008NN)")]
    BadMagic { found: u32 },
    #[error("truncated payload at offset {offset}: expected {expected} data bytes after the header")]
    TruncatedPayload { offset: usize, expected: usize },
    #[error("{extra} trailing bytes at offset {offset}")]
    TrailingBytes { offset: usize, extra: usize },
    #[error("dimension sizes overflow at offset {offset}")]
    Overflow { offset: usize },
    #[error("reading {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IdxArray {
    pub dims: Vec<usize>,
    pub data: Vec<u8>,
}

pub fn read_idx(path: impl AsRef<Path>) -> Result<IdxArray, IdxError> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|source| IdxError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_idx(&bytes)
}

pub fn parse_idx(bytes: &[u8]) -> Result<IdxArray, IdxError> {
    if bytes.len() < 4 {
        return Err(IdxError::TruncatedHeader { offset: bytes.len() });
    }
    let magic = u32::from_be_bytes([bytes[0], bytes[1], bytes[2], bytes[3]]);
    let ndim = bytes[3] as usize;
    if magic >> 8 != 0x08 || ndim == 0 {
        return Err(IdxError::BadMagic { found: magic });
    }
    let header = 4 + 4 * ndim;
    if bytes.len() < header {
        return Err(IdxError::TruncatedHeader { offset: bytes.len() });
    }
    let dims: Vec<usize> = bytes[4..header]
        .chunks_exact(4)
        .map(|c| u32::from_be_bytes([c[0], c[1], c[2], c[3]]) as usize)
        .collect();
    let expected = dims
        .iter()
        .try_fold(1usize, |a, &d| a.checked_mul(d))
        .ok_or(IdxError::Overflow { offset: 4 })?;
    let payload = &bytes[header..];
    if payload.len() < expected {
        return Err(IdxError::TruncatedPayload {
            offset: bytes.len(),
            expected,
        });
    }
    if payload.len() > expected {
        return Err(IdxError::TrailingBytes {
            offset: header + expected,
            extra: payload.len() - expected,
        });
    }
    Ok(IdxArray {
        dims,
        data: payload.to_vec(),
    })
}
