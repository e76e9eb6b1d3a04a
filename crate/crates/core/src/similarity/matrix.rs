//! Dense symmetric distance matrices and the `EDMX` binary format.
//!
//! `EDMX` layout (little-endian): magic `EDMX`, u32 `n`, then `n * n` f64 values
//! row-major. Row keys live in a JSON sidecar next to the binary file.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub const MATRIX_MAGIC: &[u8; 4] = b"EDMX";

/// Identifies one matrix row: a run, or one timestep of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RowKey {
    pub run: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub step: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t: Option<f64>,
}

impl RowKey {
    pub fn run(name: impl Into<String>) -> Self {
        Self {
            run: name.into(),
            step: None,
            t: None,
        }
    }

    pub fn timestep(name: impl Into<String>, step: usize, t: f64) -> Self {
        Self {
            run: name.into(),
            step: Some(step),
            t: Some(t),
        }
    }

    /// Display label, `run` or `run@step`.
    pub fn label(&self) -> String {
        match self.step {
            Some(s) => format!("{}@{s}", self.run),
            None => self.run.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
struct Sidecar {
    n: usize,
    row_keys: Vec<RowKey>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMatrix {
    entries: Vec<f64>,
    row_keys: Vec<RowKey>,
}

impl DistanceMatrix {
    /// Checks symmetry, zero diagonal and the `[0, 1]` range.
    pub fn new(row_keys: Vec<RowKey>, entries: Vec<f64>) -> Result<Self> {
        let m = Self::new_unchecked(row_keys, entries)?;
        m.validate()?;
        Ok(m)
    }

    /// Only checks the shape. Used for matrices that are not distances in `[0, 1]`.
    pub fn new_unchecked(row_keys: Vec<RowKey>, entries: Vec<f64>) -> Result<Self> {
        let n = row_keys.len();
        if entries.len() != n * n {
            return Err(Error::LengthMismatch {
                left: entries.len(),
                right: n * n,
            });
        }
        Ok(Self { entries, row_keys })
    }

    /// Builds a symmetric matrix from the strict upper triangle.
    pub(crate) fn from_upper(row_keys: Vec<RowKey>, upper: Vec<Vec<f64>>) -> Self {
        let n = row_keys.len();
        let mut entries = vec![0.0; n * n];
        for (i, row) in upper.into_iter().enumerate() {
            for (off, v) in row.into_iter().enumerate() {
                let j = i + 1 + off;
                entries[i * n + j] = v;
                entries[j * n + i] = v;
            }
        }
        Self { entries, row_keys }
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.len();
        for i in 0..n {
            if self.get(i, i) != 0.0 {
                return Err(Error::Invalid(format!("non-zero diagonal at row {i}")));
            }
            for j in i + 1..n {
                let v = self.get(i, j);
                if v.is_nan() {
                    return Err(Error::NonFinite("distance matrix"));
                }
                if v != self.get(j, i) {
                    return Err(Error::Invalid(format!("asymmetric entry at ({i}, {j})")));
                }
                if !(0.0..=1.0).contains(&v) {
                    return Err(Error::Invalid(format!("entry {v} at ({i}, {j}) outside [0, 1]")));
                }
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.row_keys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.row_keys.is_empty()
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.len() + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let n = self.len();
        &self.entries[i * n..(i + 1) * n]
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn row_keys(&self) -> &[RowKey] {
        &self.row_keys
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(8 + 8 * self.entries.len());
        out.extend_from_slice(MATRIX_MAGIC);
        out.extend_from_slice(&(self.len() as u32).to_le_bytes());
        for v in &self.entries {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    /// Decodes an `EDMX` buffer; `row_keys` must come from the sidecar.
    pub fn from_bytes(bytes: &[u8], row_keys: Vec<RowKey>) -> Result<Self> {
        if bytes.len() < 8 || &bytes[..4] != MATRIX_MAGIC {
            return Err(Error::Format("missing magic \"EDMX\"".into()));
        }
        let n = u32::from_le_bytes([bytes[4], bytes[5], bytes[6], bytes[7]]) as usize;
        if n != row_keys.len() {
            return Err(Error::Format(format!(
                "matrix has {n} rows but sidecar lists {} keys",
                row_keys.len()
            )));
        }
        let payload = &bytes[8..];
        if payload.len() != n * n * 8 {
            return Err(Error::Format(format!(
                "expected {} payload bytes, found {}",
                n * n * 8,
                payload.len()
            )));
        }
        let entries = payload
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
            .collect();
        Self::new_unchecked(row_keys, entries)
    }

    /// Sidecar path for an `EDMX` file: same stem, `.json` extension.
    pub fn sidecar_path(path: &Path) -> PathBuf {
        path.with_extension("json")
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))?;
        let sidecar = Sidecar {
            n: self.len(),
            row_keys: self.row_keys.clone(),
        };
        let side = Self::sidecar_path(path);
        fs::write(&side, serde_json::to_string_pretty(&sidecar)?).map_err(|e| Error::io(&side, e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let side = Self::sidecar_path(path);
        let text = fs::read_to_string(&side).map_err(|e| Error::io(&side, e))?;
        let sidecar: Sidecar = serde_json::from_str(&text)?;
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes, sidecar.row_keys)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> DistanceMatrix {
        DistanceMatrix::new(
            vec![RowKey::run("x"), RowKey::run("y")],
            vec![0.0, 0.25, 0.25, 0.0],
        )
        .unwrap()
    }

    #[test]
    fn edmx_layout() {
        let bytes = sample().to_bytes();
        assert_eq!(&bytes[..4], b"EDMX");
        assert_eq!(&bytes[4..8], &2u32.to_le_bytes());
        assert_eq!(&bytes[16..24], &0.25f64.to_le_bytes());
        assert_eq!(bytes.len(), 8 + 4 * 8);
    }

    #[test]
    fn file_round_trip_with_sidecar() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("dr.edmx");
        let m = sample();
        m.write(&path).unwrap();
        assert!(dir.path().join("dr.json").exists());
        assert_eq!(DistanceMatrix::read(&path).unwrap(), m);
    }

    #[test]
    fn validation() {
        let keys = vec![RowKey::run("x"), RowKey::run("y")];
        assert!(DistanceMatrix::new(keys.clone(), vec![0.0, 0.2, 0.3, 0.0]).is_err());
        assert!(DistanceMatrix::new(keys.clone(), vec![0.1, 0.2, 0.2, 0.0]).is_err());
        assert!(DistanceMatrix::new(keys.clone(), vec![0.0, 1.5, 1.5, 0.0]).is_err());
        assert!(DistanceMatrix::new(keys, vec![0.0; 3]).is_err());
    }

    #[test]
    fn timestep_keys_serialize_compactly() {
        let json = serde_json::to_string(&RowKey::run("r")).unwrap();
        assert_eq!(json, r#"{"run":"r"}"#);
        let json = serde_json::to_string(&RowKey::timestep("r", 2, 0.5)).unwrap();
        assert_eq!(json, r#"{"run":"r","step":2,"t":0.5}"#);
    }
}
