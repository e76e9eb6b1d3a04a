//! Manifest JSON and the `EFLD` binary field format.
//!
//! `EFLD` layout (little-endian): magic `EFLD`, u32 dimension count `D`,
//! `D` u32 extents, then `prod(extents)` f32 values in row-major order.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{Ensemble, Run, ScalarField, Timestep};
use crate::{Error, Result};

pub const FIELD_MAGIC: &[u8; 4] = b"EFLD";

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Manifest {
    pub parameter_names: Vec<String>,
    pub runs: Vec<ManifestRun>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ManifestRun {
    pub name: String,
    pub parameters: BTreeMap<String, f64>,
    pub timesteps: Vec<ManifestTimestep>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ManifestTimestep {
    pub t: f64,
    pub field: String,
}

/// Encodes a grid of f32 values with any number of axes.
pub fn encode_grid(magic: &[u8; 4], dims: &[usize], payload: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(8 + 4 * dims.len() + payload.len());
    out.extend_from_slice(magic);
    out.extend_from_slice(&(dims.len() as u32).to_le_bytes());
    for &d in dims {
        out.extend_from_slice(&(d as u32).to_le_bytes());
    }
    out.extend_from_slice(payload);
    out
}

/// Splits an `EFLD`-style buffer into extents and the raw payload.
pub fn decode_grid<'a>(magic: &[u8; 4], bytes: &'a [u8], elem_size: usize) -> Result<(Vec<usize>, &'a [u8])> {
    let read_u32 = |at: usize| -> Result<u32> {
        bytes
            .get(at..at + 4)
            .map(|b| u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
            .ok_or_else(|| Error::Format("truncated header".into()))
    };
    if bytes.len() < 8 || &bytes[..4] != magic {
        return Err(Error::Format(format!(
            "missing magic {:?}",
            String::from_utf8_lossy(magic)
        )));
    }
    let ndim = read_u32(4)? as usize;
    if ndim == 0 {
        return Err(Error::Format("zero dimension count".into()));
    }
    let dims = (0..ndim)
        .map(|k| read_u32(8 + 4 * k).map(|d| d as usize))
        .collect::<Result<Vec<_>>>()?;
    let header = 8 + 4 * ndim;
    let count: usize = dims.iter().product();
    let payload = &bytes[header..];
    if payload.len() != count * elem_size {
        return Err(Error::Format(format!(
            "expected {} payload bytes for extents {dims:?}, found {}",
            count * elem_size,
            payload.len()
        )));
    }
    Ok((dims, payload))
}

pub fn encode_field(field: &ScalarField) -> Vec<u8> {
    encode_f32_grid(field.dims(), field.values())
}

pub fn encode_f32_grid(dims: &[usize], values: &[f32]) -> Vec<u8> {
    let payload: Vec<u8> = values.iter().flat_map(|v| v.to_le_bytes()).collect();
    encode_grid(FIELD_MAGIC, dims, &payload)
}

pub fn decode_f32_grid(bytes: &[u8]) -> Result<(Vec<usize>, Vec<f32>)> {
    let (dims, payload) = decode_grid(FIELD_MAGIC, bytes, 4)?;
    let values = payload
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect();
    Ok((dims, values))
}

pub fn decode_field(bytes: &[u8]) -> Result<ScalarField> {
    let (dims, values) = decode_f32_grid(bytes)?;
    if !(2..=3).contains(&dims.len()) {
        return Err(Error::Format(format!(
            "fields must be 2D or 3D, found {} axes",
            dims.len()
        )));
    }
    ScalarField::new(dims, values)
}

pub fn read_field(path: &Path) -> Result<ScalarField> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_field(&bytes)
}

pub fn write_field(path: &Path, field: &ScalarField) -> Result<()> {
    fs::write(path, encode_field(field)).map_err(|e| Error::io(path, e))
}

/// Loads a manifest and every field it references. Fields are left unnormalized.
pub fn load_ensemble(manifest_path: &Path) -> Result<Ensemble> {
    let text = fs::read_to_string(manifest_path).map_err(|e| Error::io(manifest_path, e))?;
    let manifest: Manifest = serde_json::from_str(&text)?;
    let base = manifest_path.parent().map(Path::to_path_buf).unwrap_or_default();
    let mut runs = Vec::with_capacity(manifest.runs.len());
    for mrun in manifest.runs {
        let names_match = mrun.parameters.len() == manifest.parameter_names.len()
            && manifest
                .parameter_names
                .iter()
                .all(|p| mrun.parameters.contains_key(p));
        if !names_match {
            return Err(Error::ParameterMismatch { run: mrun.name });
        }
        let parameters = manifest
            .parameter_names
            .iter()
            .map(|p| mrun.parameters[p])
            .collect();
        let timesteps = mrun
            .timesteps
            .iter()
            .map(|ts| {
                Ok(Timestep {
                    t: ts.t,
                    field: read_field(&resolve(&base, &ts.field))?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        runs.push(Run {
            name: mrun.name,
            parameters,
            timesteps,
        });
    }
    Ensemble::new(manifest.parameter_names, runs)
}

fn resolve(base: &Path, rel: &str) -> PathBuf {
    let p = Path::new(rel);
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

/// Writes `manifest.json` plus one `EFLD` file per timestep under `dir/fields`.
pub fn write_ensemble(ensemble: &Ensemble, dir: &Path) -> Result<PathBuf> {
    let fields_dir = dir.join("fields");
    fs::create_dir_all(&fields_dir).map_err(|e| Error::io(&fields_dir, e))?;
    let mut runs = Vec::with_capacity(ensemble.runs().len());
    for run in ensemble.runs() {
        let mut timesteps = Vec::with_capacity(run.timesteps.len());
        for (k, step) in run.timesteps.iter().enumerate() {
            let rel = format!("fields/{}_{k:03}.efld", run.name);
            write_field(&dir.join(&rel), &step.field)?;
            timesteps.push(ManifestTimestep { t: step.t, field: rel });
        }
        runs.push(ManifestRun {
            name: run.name.clone(),
            parameters: ensemble
                .parameter_names()
                .iter()
                .cloned()
                .zip(run.parameters.iter().copied())
                .collect(),
            timesteps,
        });
    }
    let manifest = Manifest {
        parameter_names: ensemble.parameter_names().to_vec(),
        runs,
    };
    let path = dir.join("manifest.json");
    let json = serde_json::to_string_pretty(&manifest)?;
    fs::write(&path, json).map_err(|e| Error::io(&path, e))?;
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn efld_layout_is_bit_exact() {
        let field = ScalarField::new(vec![2, 3], vec![0.0, 1.0, 2.0, 3.0, 4.0, 0.5]).unwrap();
        let bytes = encode_field(&field);
        assert_eq!(&bytes[..4], b"EFLD");
        assert_eq!(&bytes[4..8], &2u32.to_le_bytes());
        assert_eq!(&bytes[8..12], &2u32.to_le_bytes());
        assert_eq!(&bytes[12..16], &3u32.to_le_bytes());
        assert_eq!(&bytes[16..20], &0.0f32.to_le_bytes());
        assert_eq!(&bytes[36..40], &0.5f32.to_le_bytes());
        assert_eq!(bytes.len(), 16 + 6 * 4);
        assert_eq!(decode_field(&bytes).unwrap(), field);
    }

    #[test]
    fn decode_rejects_bad_input() {
        assert!(decode_field(b"XXXX\x02\0\0\0").is_err());
        let field = ScalarField::new(vec![2, 2], vec![0.0; 4]).unwrap();
        let mut bytes = encode_field(&field);
        bytes.pop();
        assert!(decode_field(&bytes).is_err());
        let one_d = encode_f32_grid(&[4], &[0.0; 4]);
        assert!(decode_field(&one_d).is_err());
    }

    fn fixture(dir: &Path) -> Ensemble {
        let runs = (0..2)
            .map(|r| Run {
                name: format!("run{r}"),
                parameters: vec![r as f64, 0.5],
                timesteps: (0..3)
                    .map(|k| Timestep {
                        t: k as f64,
                        field: ScalarField::new(vec![4, 4], vec![(r * 3 + k) as f32; 16]).unwrap(),
                    })
                    .collect(),
            })
            .collect();
        let e = Ensemble::new(vec!["a".into(), "b".into()], runs).unwrap();
        write_ensemble(&e, dir).unwrap();
        e
    }

    #[test]
    fn manifest_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let written = fixture(dir.path());
        let loaded = load_ensemble(&dir.path().join("manifest.json")).unwrap();
        assert_eq!(loaded.runs().len(), 2);
        assert_eq!(loaded.field_dims(), &[4, 4]);
        assert_eq!(loaded, written);
    }

    #[test]
    fn missing_parameter_is_a_mismatch() {
        let dir = tempfile::tempdir().unwrap();
        fixture(dir.path());
        let path = dir.path().join("manifest.json");
        let mut manifest: Manifest =
            serde_json::from_str(&fs::read_to_string(&path).unwrap()).unwrap();
        manifest.runs[1].parameters.remove("b");
        fs::write(&path, serde_json::to_string(&manifest).unwrap()).unwrap();
        let err = load_ensemble(&path).unwrap_err();
        assert!(matches!(err, Error::ParameterMismatch { ref run } if run == "run1"));
        assert!(err.to_string().contains("parameter set mismatch"));
    }

    #[test]
    fn missing_field_file_is_io_error() {
        let dir = tempfile::tempdir().unwrap();
        fixture(dir.path());
        fs::remove_file(dir.path().join("fields/run0_001.efld")).unwrap();
        let err = load_ensemble(&dir.path().join("manifest.json")).unwrap_err();
        assert!(matches!(err, Error::Io { .. }));
    }
}
