//! Embedding dump: magic `LASI`, `u32` rows, `u32` columns, `u32` format
//! version, then the columns one after another as little-endian `f64`. All
//! integers are little-endian.

use lasi_core::EmbeddingMatrix;
use thiserror::Error;

pub const MAGIC: &[u8; 4] = b"LASI";
pub const VERSION: u32 = 1;
pub const HEADER_LEN: usize = 16;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EmbeddingFileError {
    #[error("missing LASI magic")]
    BadMagic,
    #[error("unsupported format version {0}")]
    Version(u32),
    #[error("expected {expected} bytes for a {rows}x{cols} embedding, found {found}")]
    Length { rows: u32, cols: u32, expected: usize, found: usize },
    #[error("embedding of {rows}x{cols} does not fit the u32 header")]
    TooLarge { rows: usize, cols: usize },
}

/// A decoded dump: `data[col * rows + row]`.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingDump {
    pub rows: u32,
    pub cols: u32,
    pub data: Vec<f64>,
}

pub fn encode(emb: &EmbeddingMatrix) -> Result<Vec<u8>, EmbeddingFileError> {
    let too_large = || EmbeddingFileError::TooLarge { rows: emb.dim(), cols: emb.columns() };
    let rows = u32::try_from(emb.dim()).map_err(|_| too_large())?;
    let cols = u32::try_from(emb.columns()).map_err(|_| too_large())?;
    let mut out = Vec::with_capacity(HEADER_LEN + 8 * emb.as_slice().len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&rows.to_le_bytes());
    out.extend_from_slice(&cols.to_le_bytes());
    out.extend_from_slice(&VERSION.to_le_bytes());
    for v in emb.as_slice() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    Ok(out)
}

pub fn decode(bytes: &[u8]) -> Result<EmbeddingDump, EmbeddingFileError> {
    if bytes.len() < HEADER_LEN || &bytes[..4] != MAGIC {
        return Err(EmbeddingFileError::BadMagic);
    }
    let word = |i: usize| u32::from_le_bytes(bytes[i..i + 4].try_into().unwrap());
    let (rows, cols) = (word(4), word(8));
    if word(12) != VERSION {
        return Err(EmbeddingFileError::Version(word(12)));
    }
    let expected = HEADER_LEN + 8 * rows as usize * cols as usize;
    if bytes.len() != expected {
        return Err(EmbeddingFileError::Length { rows, cols, expected, found: bytes.len() });
    }
    let data = bytes[HEADER_LEN..]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Ok(EmbeddingDump { rows, cols, data })
}

#[cfg(test)]
mod tests {
    use super::*;
    use lasi_core::{solve_embeddings, ImageTensor, LasiConfig};

    #[test]
    fn round_trip_and_size() {
        let img = ImageTensor::from_fn(3, 4, 1, |r, c, _| (r * 4 + c) as f64 / 12.0);
        let emb = solve_embeddings(&img, &LasiConfig::with_n(5)).unwrap();
        let bytes = encode(&emb).unwrap();
        assert_eq!(bytes.len(), 16 + 8 * 5 * 12);
        let dump = decode(&bytes).unwrap();
        assert_eq!((dump.rows, dump.cols), (5, 12));
        assert_eq!(dump.data, emb.as_slice());
    }

    #[test]
    fn rejects_bad_input() {
        assert_eq!(decode(b"LAS"), Err(EmbeddingFileError::BadMagic));
        let mut bytes = b"LASI".to_vec();
        bytes.extend(2u32.to_le_bytes());
        bytes.extend(1u32.to_le_bytes());
        bytes.extend(VERSION.to_le_bytes());
        bytes.extend(1.0f64.to_le_bytes());
        assert!(matches!(decode(&bytes), Err(EmbeddingFileError::Length { expected: 32, found: 24, .. })));
        bytes[12] = 9;
        assert!(matches!(decode(&bytes), Err(EmbeddingFileError::Version(9))));
    }
}
