//! Regular grids over the normalized parameter space: segment labels from the
//! SVM and the nearest-sample uncertainty.
//!
//! Nodes are stored row-major with axis 0 varying slowest. Node `k` on an axis
//! of resolution `r` sits at normalized coordinate `k / (r - 1)`.

use serde::{Deserialize, Serialize};

use super::svm::SvmModel;
use crate::ensemble::Ensemble;
use crate::par;
use crate::{Error, Result};

/// Shape of a regular grid.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridShape {
    resolution: Vec<usize>,
}

impl GridShape {
    pub fn new(resolution: Vec<usize>) -> Result<Self> {
        if resolution.is_empty() {
            return Err(Error::Invalid("grid needs at least one axis".into()));
        }
        if let Some(r) = resolution.iter().find(|&&r| r < 2) {
            return Err(Error::Invalid(format!("grid resolution must be >= 2, got {r}")));
        }
        let fits = resolution
            .iter()
            .try_fold(1usize, |acc, &r| acc.checked_mul(r))
            .is_some_and(|t| t <= 1 << 28);
        if !fits {
            return Err(Error::Invalid("grid has too many nodes".into()));
        }
        Ok(Self { resolution })
    }

    pub fn resolution(&self) -> &[usize] {
        &self.resolution
    }

    pub fn dim(&self) -> usize {
        self.resolution.len()
    }

    pub fn node_count(&self) -> usize {
        self.resolution.iter().product()
    }

    pub fn flat(&self, idx: &[usize]) -> usize {
        idx.iter()
            .zip(&self.resolution)
            .fold(0, |acc, (&i, &r)| acc * r + i)
    }

    pub fn unflat(&self, mut flat: usize) -> Vec<usize> {
        let mut idx = vec![0; self.dim()];
        for a in (0..self.dim()).rev() {
            idx[a] = flat % self.resolution[a];
            flat /= self.resolution[a];
        }
        idx
    }

    /// Normalized coordinate of node `k` on `axis`.
    pub fn coordinate(&self, axis: usize, k: usize) -> f64 {
        k as f64 / (self.resolution[axis] - 1) as f64
    }

    pub fn position(&self, idx: &[usize]) -> Vec<f64> {
        idx.iter().enumerate().map(|(a, &k)| self.coordinate(a, k)).collect()
    }

    /// Index of the node nearest to normalized coordinate `x` on `axis`.
    pub fn nearest(&self, axis: usize, x: f64) -> usize {
        let r = self.resolution[axis] - 1;
        ((x.clamp(0.0, 1.0) * r as f64).round() as usize).min(r)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelGrid {
    pub shape: GridShape,
    pub labels: Vec<u32>,
}

impl LabelGrid {
    pub fn new(shape: GridShape, labels: Vec<u32>) -> Result<Self> {
        if labels.len() != shape.node_count() {
            return Err(Error::LengthMismatch {
                left: labels.len(),
                right: shape.node_count(),
            });
        }
        Ok(Self { shape, labels })
    }

    pub fn get(&self, idx: &[usize]) -> u32 {
        self.labels[self.shape.flat(idx)]
    }

    /// Sorted distinct labels.
    pub fn classes(&self) -> Vec<u32> {
        let mut c = self.labels.clone();
        c.sort_unstable();
        c.dedup();
        c
    }
}

/// Classifies every grid node with the model.
pub fn label_grid(model: &SvmModel, resolution: &[usize]) -> Result<LabelGrid> {
    if resolution.len() != model.dim() {
        return Err(Error::LengthMismatch {
            left: resolution.len(),
            right: model.dim(),
        });
    }
    let shape = GridShape::new(resolution.to_vec())?;
    let labels = par::map_range(shape.node_count(), |f| {
        model.predict(&shape.position(&shape.unflat(f)))
    });
    LabelGrid::new(shape, labels)
}

/// Normalized nearest-sample distance `d` per node; the saturation factor is `1 - d`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UncertaintyGrid {
    pub shape: GridShape,
    pub distance: Vec<f64>,
}

impl UncertaintyGrid {
    pub fn factor(&self, flat: usize) -> f64 {
        1.0 - self.distance[flat]
    }

    pub fn factors(&self) -> Vec<f64> {
        self.distance.iter().map(|d| 1.0 - d).collect()
    }
}

/// Uncertainty over the given normalized sample positions.
pub fn uncertainty_from_samples(samples: &[Vec<f64>], resolution: &[usize]) -> Result<UncertaintyGrid> {
    let shape = GridShape::new(resolution.to_vec())?;
    if samples.is_empty() {
        return Err(Error::Invalid("uncertainty needs at least one sample".into()));
    }
    if let Some(s) = samples.iter().find(|s| s.len() != shape.dim()) {
        return Err(Error::LengthMismatch {
            left: s.len(),
            right: shape.dim(),
        });
    }
    let raw = par::map_range(shape.node_count(), |f| {
        let p = shape.position(&shape.unflat(f));
        samples
            .iter()
            .map(|s| {
                s.iter()
                    .zip(&p)
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum::<f64>()
                    .sqrt()
            })
            .fold(f64::INFINITY, f64::min)
    });
    let max = raw.iter().copied().fold(0.0, f64::max);
    let distance = if max > 0.0 {
        raw.into_iter().map(|d| d / max).collect()
    } else {
        raw
    };
    Ok(UncertaintyGrid { shape, distance })
}

/// Uncertainty of the ensemble's runs over the parameter axes in `axes`.
pub fn uncertainty_grid(ensemble: &Ensemble, axes: &[usize], resolution: &[usize]) -> Result<UncertaintyGrid> {
    let p = ensemble.parameter_names().len();
    if let Some(&bad) = axes.iter().find(|&&a| a >= p) {
        return Err(Error::AxisOutOfRange(bad));
    }
    let samples: Vec<Vec<f64>> = ensemble
        .normalized_parameters()
        .into_iter()
        .map(|row| axes.iter().map(|&a| row[a]).collect())
        .collect();
    uncertainty_from_samples(&samples, resolution)
}
