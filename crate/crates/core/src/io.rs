//! Embedding files.
//!
//! Binary layout: the ASCII magic `EMB1`, then `rows` and `dim` as
//! little-endian `u64`, then `rows·dim` little-endian `f32` values in
//! row-major order. The CSV variant starts with a `rows,dim` header line and
//! holds one node per line.

use std::fs;
use std::path::Path;

use ndarray::Array2;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::backbone::EmbeddingMatrix;
use crate::error::{Result, TspError};

pub const MAGIC: &[u8; 4] = b"EMB1";
const HEADER_LEN: usize = 4 + 8 + 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EmbeddingFormat {
    Binary,
    Csv,
}

impl EmbeddingFormat {
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some("csv") => EmbeddingFormat::Csv,
            _ => EmbeddingFormat::Binary,
        }
    }
}

pub fn encode_binary(x: &EmbeddingMatrix) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN + 4 * x.rows() * x.dim());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(x.rows() as u64).to_le_bytes());
    out.extend_from_slice(&(x.dim() as u64).to_le_bytes());
    for v in x.values().iter() {
        out.extend_from_slice(&(*v as f32).to_le_bytes());
    }
    out
}

pub fn decode_binary(bytes: &[u8]) -> Result<EmbeddingMatrix> {
    if bytes.len() < HEADER_LEN {
        return Err(TspError::Format(format!("file too short for a header ({} bytes)", bytes.len())));
    }
    if &bytes[..4] != MAGIC {
        return Err(TspError::Format("bad magic, expected EMB1".into()));
    }
    let read_u64 = |at: usize| u64::from_le_bytes(bytes[at..at + 8].try_into().expect("8 bytes"));
    let (rows, dim) = (read_u64(4) as usize, read_u64(12) as usize);
    let expected = rows
        .checked_mul(dim)
        .and_then(|n| n.checked_mul(4))
        .ok_or_else(|| TspError::Format(format!("header {rows}x{dim} overflows")))?;
    let payload = &bytes[HEADER_LEN..];
    if payload.len() != expected {
        return Err(TspError::Format(format!(
            "header declares {rows}x{dim} ({expected} payload bytes) but {} are present",
            payload.len()
        )));
    }
    let values: Vec<f64> = payload
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")) as f64)
        .collect();
    let values = Array2::from_shape_vec((rows, dim), values).map_err(|e| TspError::Format(e.to_string()))?;
    EmbeddingMatrix::new(values).map_err(|e| TspError::Format(e.to_string()))
}

pub fn encode_csv(x: &EmbeddingMatrix) -> String {
    let mut out = format!("{},{}\n", x.rows(), x.dim());
    for row in x.values().rows() {
        let line: Vec<String> = row.iter().map(|v| (*v as f32).to_string()).collect();
        out.push_str(&line.join(","));
        out.push('\n');
    }
    out
}

pub fn decode_csv(text: &str) -> Result<EmbeddingMatrix> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (_, header) = lines.next().ok_or_else(|| TspError::Format("empty embedding CSV".into()))?;
    let dims: Vec<usize> = header
        .split(',')
        .map(|f| f.trim().parse::<usize>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| TspError::Format(format!("header {header:?} is not rows,dim")))?;
    let [rows, dim] = dims[..] else {
        return Err(TspError::Format(format!("header {header:?} is not rows,dim")));
    };
    let mut values = Vec::with_capacity(rows * dim);
    let mut seen = 0usize;
    for (n, line) in lines {
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != dim {
            return Err(TspError::Format(format!(
                "line {}: header declares dimension {dim} but {} columns are present",
                n + 1,
                fields.len()
            )));
        }
        for f in fields {
            values.push(
                f.trim()
                    .parse::<f32>()
                    .map_err(|_| TspError::Format(format!("line {}: bad value {f:?}", n + 1)))? as f64,
            );
        }
        seen += 1;
    }
    if seen != rows {
        return Err(TspError::Format(format!("header declares {rows} rows but {seen} are present")));
    }
    let values = Array2::from_shape_vec((rows, dim), values).map_err(|e| TspError::Format(e.to_string()))?;
    EmbeddingMatrix::new(values).map_err(|e| TspError::Format(e.to_string()))
}

pub fn save_embeddings(path: &Path, x: &EmbeddingMatrix, format: EmbeddingFormat) -> Result<()> {
    let bytes = match format {
        EmbeddingFormat::Binary => encode_binary(x),
        EmbeddingFormat::Csv => encode_csv(x).into_bytes(),
    };
    fs::write(path, bytes).map_err(|e| TspError::io(format!("writing {}", path.display()), e))
}

pub fn load_embeddings(path: &Path, format: EmbeddingFormat) -> Result<EmbeddingMatrix> {
    let bytes = fs::read(path).map_err(|e| TspError::io(format!("reading {}", path.display()), e))?;
    match format {
        EmbeddingFormat::Binary => decode_binary(&bytes),
        EmbeddingFormat::Csv => {
            let text = String::from_utf8(bytes).map_err(|_| TspError::Format("embedding CSV is not UTF-8".into()))?;
            decode_csv(&text)
        }
    }
}

/// Hex SHA-256 of the compact JSON encoding of `value`.
pub fn json_hash<T: Serialize>(value: &T) -> Result<String> {
    Ok(hex::encode(Sha256::digest(serde_json::to_vec(value)?)))
}

/// Hex SHA-256 of a file's bytes.
pub fn file_hash(path: &Path) -> Result<String> {
    let bytes = fs::read(path).map_err(|e| TspError::io(format!("reading {}", path.display()), e))?;
    Ok(hex::encode(Sha256::digest(bytes)))
}
