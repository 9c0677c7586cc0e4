//! Row-major f32 matrices with a provenance hash, in the `CATEMB01` format.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

const MAGIC: &[u8; 8] = b"CATEMB01";

/// One row per class, `dim` values per row.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix {
    rows: usize,
    dim: usize,
    values: Vec<f32>,
    /// SHA-256 of whatever the rows are indexed by (a vocabulary, or a
    /// transfer plan plus seed).
    pub provenance: [u8; 32],
}

impl EmbeddingMatrix {
    pub fn new(rows: usize, dim: usize, values: Vec<f32>, provenance: [u8; 32]) -> Result<Self> {
        if values.len() != rows * dim {
            return Err(Error::Dimension(format!(
                "{} values for a {rows}x{dim} matrix",
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("embedding value"));
        }
        Ok(EmbeddingMatrix {
            rows,
            dim,
            values,
            provenance,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    pub fn row(&self, k: usize) -> &[f32] {
        &self.values[k * self.dim..(k + 1) * self.dim]
    }

    pub fn into_values(self) -> Vec<f32> {
        self.values
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(24 + 4 * self.values.len() + 32);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&(self.rows as u64).to_le_bytes());
        out.extend_from_slice(&(self.dim as u64).to_le_bytes());
        for v in &self.values {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out.extend_from_slice(&self.provenance);
        out
    }

    pub fn from_bytes(bytes: &[u8], file: &str) -> Result<Self> {
        let bad = |m: String| Error::malformed(file, 0, "embedding", m);
        if bytes.len() < 24 || &bytes[..8] != MAGIC {
            return Err(bad("missing CATEMB01 header".into()));
        }
        let rows = u64::from_le_bytes(bytes[8..16].try_into().unwrap());
        let dim = u64::from_le_bytes(bytes[16..24].try_into().unwrap());
        let n = rows
            .checked_mul(dim)
            .and_then(|n| n.checked_mul(4))
            .and_then(|n| n.checked_add(24 + 32))
            .ok_or_else(|| bad(format!("implausible shape {rows}x{dim}")))?;
        if bytes.len() as u64 != n {
            return Err(bad(format!(
                "{} bytes, expected {n} for a {rows}x{dim} matrix",
                bytes.len()
            )));
        }
        let body = &bytes[24..bytes.len() - 32];
        let values = body
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        let provenance = bytes[bytes.len() - 32..].try_into().unwrap();
        Self::new(rows as usize, dim as usize, values, provenance)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes, &path.display().to_string())
    }

    /// Human-readable export: a provenance comment, then one row per line.
    /// Values print with round-trip precision.
    pub fn to_tsv(&self) -> String {
        let mut s = format!("#provenance={}\n", hex::encode(self.provenance));
        for k in 0..self.rows {
            let row: Vec<String> = self.row(k).iter().map(|v| format!("{v:?}")).collect();
            let _ = writeln!(s, "{k}\t{}", row.join("\t"));
        }
        s
    }
}
