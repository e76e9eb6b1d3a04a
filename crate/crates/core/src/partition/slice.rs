//! Axis-aligned 2D slices through the labelled parameter grid.

use serde::{Deserialize, Serialize};

use super::grid::{LabelGrid, UncertaintyGrid};
use super::mask::BinaryMask;
use crate::{Error, Result};

/// A run's position in normalized grid coordinates with its cluster id.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSample {
    pub run: String,
    pub position: Vec<f64>,
    pub cluster: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SliceSample {
    pub run: String,
    pub position: [f64; 2],
    pub cluster: u32,
}

/// Runs off the slice projected onto it; coincident runs share one marker.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProjectedSample {
    pub position: [f64; 2],
    pub runs: Vec<String>,
    pub clusters: Vec<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct HyperSlice {
    pub axes: (usize, usize),
    pub width: usize,
    pub height: usize,
    /// Grid node of the slice plane on every axis; the slice axes hold 0.
    pub plane: Vec<usize>,
    /// Labels with the first slice axis varying slowest.
    pub labels: Vec<u32>,
    /// Saturation factors `1 - d`, same layout as `labels`.
    pub uncertainty: Vec<f64>,
    pub in_slice: Vec<SliceSample>,
    pub projected: Vec<ProjectedSample>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mask: Option<BinaryMask>,
}

impl HyperSlice {
    pub fn label(&self, x: usize, y: usize) -> u32 {
        self.labels[x * self.height + y]
    }
}

/// All unordered axis pairs `(i, j)` with `i < j`.
pub fn axis_pairs(n: usize) -> Vec<(usize, usize)> {
    (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect()
}

/// Node index of the slice plane through `focus` (normalized) on each axis.
pub fn focus_nodes(grid: &LabelGrid, focus: &[f64]) -> Vec<usize> {
    focus
        .iter()
        .enumerate()
        .map(|(a, &f)| grid.shape.nearest(a, f))
        .collect()
}

/// Extracts the slice through the grid plane nearest to `focus` spanned by
/// `axes`. A sample is in the slice when each of its other coordinates lies
/// within `epsilon` of the focus; by default half a grid cell of that axis.
pub fn extract_slice(
    grid: &LabelGrid,
    unc: &UncertaintyGrid,
    samples: &[GridSample],
    focus: &[f64],
    axes: (usize, usize),
    epsilon: Option<f64>,
) -> Result<HyperSlice> {
    let shape = &grid.shape;
    let n = shape.dim();
    for a in [axes.0, axes.1] {
        if a >= n {
            return Err(Error::AxisOutOfRange(a));
        }
    }
    if axes.0 == axes.1 {
        return Err(Error::Invalid("slice axes must differ".into()));
    }
    if focus.len() != n {
        return Err(Error::LengthMismatch {
            left: focus.len(),
            right: n,
        });
    }
    if unc.shape != grid.shape {
        return Err(Error::Invalid("uncertainty grid shape differs from label grid".into()));
    }
    if let Some(e) = epsilon {
        if !(e >= 0.0) {
            return Err(Error::Invalid(format!("epsilon must be >= 0, got {e}")));
        }
    }
    let mut plane = focus_nodes(grid, focus);
    plane[axes.0] = 0;
    plane[axes.1] = 0;
    let (w, h) = (shape.resolution()[axes.0], shape.resolution()[axes.1]);
    let mut labels = Vec::with_capacity(w * h);
    let mut uncertainty = Vec::with_capacity(w * h);
    let mut idx = plane.clone();
    for x in 0..w {
        for y in 0..h {
            idx[axes.0] = x;
            idx[axes.1] = y;
            let f = shape.flat(&idx);
            labels.push(grid.labels[f]);
            uncertainty.push(unc.factor(f));
        }
    }

    let mut in_slice = Vec::new();
    let mut projected: Vec<ProjectedSample> = Vec::new();
    for s in samples {
        if s.position.len() != n {
            return Err(Error::LengthMismatch {
                left: s.position.len(),
                right: n,
            });
        }
        let position = [s.position[axes.0], s.position[axes.1]];
        let inside = (0..n).filter(|&a| a != axes.0 && a != axes.1).all(|a| {
            let eps = epsilon.unwrap_or(0.5 / (shape.resolution()[a] - 1) as f64);
            (s.position[a] - focus[a]).abs() <= eps
        });
        if inside {
            in_slice.push(SliceSample {
                run: s.run.clone(),
                position,
                cluster: s.cluster,
            });
        } else if let Some(p) = projected.iter_mut().find(|p| p.position == position) {
            p.runs.push(s.run.clone());
            p.clusters.push(s.cluster);
        } else {
            projected.push(ProjectedSample {
                position,
                runs: vec![s.run.clone()],
                clusters: vec![s.cluster],
            });
        }
    }
    Ok(HyperSlice {
        axes,
        width: w,
        height: h,
        plane,
        labels,
        uncertainty,
        in_slice,
        projected,
        mask: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::partition::grid::{uncertainty_from_samples, GridShape};

    fn lattice() -> (LabelGrid, UncertaintyGrid, Vec<GridSample>) {
        // 3 x 3 x 3 samples, grid resolution 5, label = x node
        let mut samples = Vec::new();
        for i in 0..3 {
            for j in 0..3 {
                for k in 0..3 {
                    samples.push(GridSample {
                        run: format!("r{i}{j}{k}"),
                        position: vec![i as f64 / 2.0, j as f64 / 2.0, k as f64 / 2.0],
                        cluster: i,
                    });
                }
            }
        }
        let shape = GridShape::new(vec![5, 5, 5]).unwrap();
        let labels = (0..125).map(|f| shape.unflat(f)[0] as u32).collect();
        let pos: Vec<Vec<f64>> = samples.iter().map(|s| s.position.clone()).collect();
        let unc = uncertainty_from_samples(&pos, &[5, 5, 5]).unwrap();
        (LabelGrid::new(shape, labels).unwrap(), unc, samples)
    }

    #[test]
    fn axis_pair_count() {
        for n in 2..8 {
            assert_eq!(axis_pairs(n).len(), n * (n - 1) / 2);
        }
        assert_eq!(axis_pairs(3), vec![(0, 1), (0, 2), (1, 2)]);
    }

    #[test]
    fn focus_on_sample_with_zero_epsilon() {
        let (g, u, s) = lattice();
        let slice = extract_slice(&g, &u, &s, &[0.5, 0.5, 0.5], (0, 1), Some(0.0)).unwrap();
        assert_eq!(slice.in_slice.len(), 9);
        assert!(slice.in_slice.iter().all(|x| x.run.ends_with('1')));
        // the other 18 runs collapse onto the 9 in-slice positions
        assert_eq!(slice.projected.len(), 9);
        assert!(slice.projected.iter().all(|p| p.runs.len() == 2));
        let total: usize = slice.in_slice.len() + slice.projected.iter().map(|p| p.runs.len()).sum::<usize>();
        assert_eq!(total, 27);
        assert_eq!(slice.plane, vec![0, 0, 2]);
        assert_eq!((slice.width, slice.height), (5, 5));
        assert_eq!(slice.label(3, 0), 3);
        assert_eq!(slice.uncertainty[0], 1.0);
    }

    #[test]
    fn default_epsilon_is_half_a_cell() {
        let (g, u, s) = lattice();
        // 0.55 rounds to node 2 (0.5); samples at 0.5 are within 0.125
        let slice = extract_slice(&g, &u, &s, &[0.0, 0.0, 0.55], (0, 1), None).unwrap();
        assert_eq!(slice.in_slice.len(), 9);
        let slice = extract_slice(&g, &u, &s, &[0.0, 0.0, 0.7], (0, 1), None).unwrap();
        assert_eq!(slice.in_slice.len(), 0);
        assert_eq!(slice.plane[2], 3);
    }

    #[test]
    fn errors() {
        let (g, u, s) = lattice();
        assert!(matches!(extract_slice(&g, &u, &s, &[0.0; 3], (0, 3), None), Err(Error::AxisOutOfRange(3))));
        assert!(extract_slice(&g, &u, &s, &[0.0; 3], (1, 1), None).is_err());
        assert!(extract_slice(&g, &u, &s, &[0.0; 2], (0, 1), None).is_err());
        assert!(extract_slice(&g, &u, &s, &[0.0; 3], (0, 1), Some(-1.0)).is_err());
    }
}
