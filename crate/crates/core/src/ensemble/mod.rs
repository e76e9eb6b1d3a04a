//! Ensemble domain types, file I/O, field sampling and the synthetic generator.

mod io;
mod sampling;
pub mod synthetic;

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub use io::{
    decode_f32_grid, decode_field, decode_grid, encode_f32_grid, encode_field, encode_grid,
    load_ensemble, read_field, write_ensemble, write_field, Manifest, ManifestRun,
    ManifestTimestep, FIELD_MAGIC,
};
pub use sampling::{draw_seeds, normalize_fields, sample_field, SampleVector};

/// A 2D or 3D scalar field stored row-major (last axis fastest).
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    dims: Vec<usize>,
    values: Vec<f32>,
}

impl ScalarField {
    pub fn new(dims: Vec<usize>, values: Vec<f32>) -> Result<Self> {
        if dims.is_empty() || dims.contains(&0) {
            return Err(Error::Invalid(format!("field extents must be positive, got {dims:?}")));
        }
        let len: usize = dims.iter().product();
        if len != values.len() {
            return Err(Error::LengthMismatch {
                left: len,
                right: values.len(),
            });
        }
        Ok(Self { dims, values })
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    pub(crate) fn values_mut(&mut self) -> &mut [f32] {
        &mut self.values
    }

    /// Flat index of a grid node.
    pub fn index(&self, node: &[usize]) -> usize {
        node.iter()
            .zip(&self.dims)
            .fold(0, |acc, (&i, &extent)| acc * extent + i)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Timestep {
    pub t: f64,
    pub field: ScalarField,
}

/// One simulation run. `parameters` is aligned with [`Ensemble::parameter_names`].
#[derive(Debug, Clone, PartialEq)]
pub struct Run {
    pub name: String,
    pub parameters: Vec<f64>,
    pub timesteps: Vec<Timestep>,
}

impl Run {
    pub fn times(&self) -> Vec<f64> {
        self.timesteps.iter().map(|s| s.t).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParameterRange {
    pub min: f64,
    pub max: f64,
}

impl ParameterRange {
    /// Maps a value to `[0, 1]`; a constant axis maps everything to 0.
    pub fn normalize(&self, value: f64) -> f64 {
        let span = self.max - self.min;
        if span > 0.0 {
            (value - self.min) / span
        } else {
            0.0
        }
    }

    pub fn denormalize(&self, unit: f64) -> f64 {
        self.min + unit * (self.max - self.min)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Ensemble {
    parameter_names: Vec<String>,
    runs: Vec<Run>,
    parameter_ranges: Vec<ParameterRange>,
}

impl Ensemble {
    /// Validates the ensemble invariants and derives the parameter ranges.
    pub fn new(parameter_names: Vec<String>, runs: Vec<Run>) -> Result<Self> {
        if runs.len() < 2 {
            return Err(Error::Invalid(format!(
                "an ensemble needs at least 2 runs, got {}",
                runs.len()
            )));
        }
        if parameter_names.is_empty() {
            return Err(Error::Invalid("an ensemble needs at least one parameter".into()));
        }
        let mut seen = HashSet::new();
        let dims = runs[0]
            .timesteps
            .first()
            .map(|s| s.field.dims().to_vec())
            .ok_or_else(|| Error::Invalid(format!("run {:?} has no timesteps", runs[0].name)))?;
        for run in &runs {
            if !seen.insert(run.name.as_str()) {
                return Err(Error::DuplicateRun(run.name.clone()));
            }
            if run.parameters.len() != parameter_names.len() {
                return Err(Error::ParameterMismatch {
                    run: run.name.clone(),
                });
            }
            if run.parameters.iter().any(|p| !p.is_finite()) {
                return Err(Error::NonFinite("run parameters"));
            }
            if run.timesteps.is_empty() {
                return Err(Error::Invalid(format!("run {:?} has no timesteps", run.name)));
            }
            for pair in run.timesteps.windows(2) {
                if pair[1].t <= pair[0].t {
                    return Err(Error::Invalid(format!(
                        "timestep times of run {:?} are not strictly increasing",
                        run.name
                    )));
                }
            }
            for step in &run.timesteps {
                if step.field.dims() != dims.as_slice() {
                    return Err(Error::DimsMismatch {
                        run: run.name.clone(),
                        expected: dims.clone(),
                        found: step.field.dims().to_vec(),
                    });
                }
            }
        }
        let parameter_ranges = (0..parameter_names.len())
            .map(|k| {
                let (min, max) = runs.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), r| {
                    (lo.min(r.parameters[k]), hi.max(r.parameters[k]))
                });
                ParameterRange { min, max }
            })
            .collect();
        Ok(Self {
            parameter_names,
            runs,
            parameter_ranges,
        })
    }

    pub fn parameter_names(&self) -> &[String] {
        &self.parameter_names
    }

    pub fn runs(&self) -> &[Run] {
        &self.runs
    }

    pub fn parameter_ranges(&self) -> &[ParameterRange] {
        &self.parameter_ranges
    }

    pub fn field_dims(&self) -> &[usize] {
        self.runs[0].timesteps[0].field.dims()
    }

    pub fn run_index(&self, name: &str) -> Option<usize> {
        self.runs.iter().position(|r| r.name == name)
    }

    pub fn parameter_index(&self, name: &str) -> Option<usize> {
        self.parameter_names.iter().position(|p| p == name)
    }

    /// Parameter vectors rescaled per axis to `[0, 1]`.
    pub fn normalized_parameters(&self) -> Vec<Vec<f64>> {
        self.runs
            .iter()
            .map(|r| {
                r.parameters
                    .iter()
                    .zip(&self.parameter_ranges)
                    .map(|(&v, range)| range.normalize(v))
                    .collect()
            })
            .collect()
    }

    pub(crate) fn runs_mut(&mut self) -> &mut [Run] {
        &mut self.runs
    }
}
