//! Flat binary checkpoint format for parameter and data vectors: an 8-byte
//! magic, the length as a little-endian u64, then the entries as
//! little-endian f64.

use nalgebra::DVector;
use std::io::{Read, Write};
use std::path::Path;

use super::ModelError;

const MAGIC: &[u8; 8] = b"RRVECF64";

/// Serializes a vector into the checkpoint byte layout.
pub fn to_bytes(v: &DVector<f64>) -> Vec<u8> {
    let mut out = Vec::with_capacity(16 + 8 * v.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(v.len() as u64).to_le_bytes());
    for &x in v.iter() {
        out.extend_from_slice(&x.to_le_bytes());
    }
    out
}

/// Parses the checkpoint byte layout back into a vector.
pub fn from_bytes(bytes: &[u8]) -> Result<DVector<f64>, ModelError> {
    if bytes.len() < 16 {
        return Err(ModelError::BadCheckpoint("file shorter than the 16-byte header".into()));
    }
    if &bytes[0..8] != MAGIC {
        return Err(ModelError::BadCheckpoint("magic mismatch".into()));
    }
    let dim = u64::from_le_bytes(bytes[8..16].try_into().unwrap()) as usize;
    if bytes.len() != 16 + 8 * dim {
        return Err(ModelError::BadCheckpoint(format!(
            "expected {} payload bytes for dim {dim}, got {}",
            8 * dim,
            bytes.len() - 16
        )));
    }
    let mut v = DVector::zeros(dim);
    for i in 0..dim {
        let off = 16 + 8 * i;
        v[i] = f64::from_le_bytes(bytes[off..off + 8].try_into().unwrap());
    }
    Ok(v)
}

/// Writes a vector checkpoint to disk.
pub fn write_vector(path: &Path, v: &DVector<f64>) -> Result<(), ModelError> {
    let mut file = std::fs::File::create(path)?;
    file.write_all(&to_bytes(v))?;
    Ok(())
}

/// Reads a vector checkpoint from disk.
pub fn read_vector(path: &Path) -> Result<DVector<f64>, ModelError> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut bytes)?;
    from_bytes(&bytes)
}
