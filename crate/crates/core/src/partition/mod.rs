//! Parameter-space partitioning: SVM segmentation on cluster labels, labelled
//! and uncertainty grids, hyper-slices, boundary projection masks and
//! correlation-based axis ranking.
//!
//! A partition on disk is a directory holding `labels.elbl` (magic `ELBL`,
//! u32 axis count, u32 extents, one u8 label per node), `uncertainty.efld`
//! (`EFLD` with f32 saturation factors per node) and `grid.json` metadata.

pub mod correlation;
pub mod expr;
mod grid;
mod mask;
mod slice;
mod svm;

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::clustering::{ClusterAssignment, ColorAssignment, GREY_HEX};
use crate::ensemble::{decode_f32_grid, decode_grid, encode_f32_grid, encode_grid, Ensemble, ParameterRange};
use crate::{Error, Result};

pub use correlation::{correlation_ranking, principal_coordinates, CorrelationResult, ParameterCorrelation};
pub use expr::{parse_projection_expr, BinaryOp, ParseError, ParseErrorKind, ProjectionExpr};
pub use grid::{label_grid, uncertainty_from_samples, uncertainty_grid, GridShape, LabelGrid, UncertaintyGrid};
pub use mask::{boundary_mask, union_mask, BinaryMask};
pub use slice::{axis_pairs, extract_slice, focus_nodes, GridSample, HyperSlice, ProjectedSample, SliceSample};
pub use svm::{train_svm, train_svm_on, SvmConfig, SvmModel};

pub const LABEL_MAGIC: &[u8; 4] = b"ELBL";
/// Default nodes per axis.
pub const DEFAULT_RESOLUTION: usize = 16;

/// Parameter values in original units, one per grid axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FocusPoint(pub Vec<f64>);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
struct GridMeta {
    parameter_names: Vec<String>,
    ranges: Vec<ParameterRange>,
    resolution: Vec<usize>,
    axis_order: String,
    class_colors: BTreeMap<u32, String>,
    samples: Vec<GridSample>,
}

/// Everything needed to slice and project a partitioned parameter space.
#[derive(Debug, Clone, PartialEq)]
pub struct Partition {
    /// Names of the grid axes, in grid order.
    pub parameter_names: Vec<String>,
    pub ranges: Vec<ParameterRange>,
    pub grid: LabelGrid,
    pub uncertainty: UncertaintyGrid,
    pub samples: Vec<GridSample>,
    /// Display color per class id.
    pub class_colors: BTreeMap<u32, String>,
}

impl Partition {
    /// Labels a grid with `model` and computes the uncertainty over the
    /// model's axes.
    pub fn build(
        ensemble: &Ensemble,
        assignment: &ClusterAssignment,
        colors: Option<&ColorAssignment>,
        model: &SvmModel,
        resolution: &[usize],
    ) -> Result<Self> {
        if assignment.labels.len() != ensemble.runs().len() {
            return Err(Error::LengthMismatch {
                left: assignment.labels.len(),
                right: ensemble.runs().len(),
            });
        }
        let grid = label_grid(model, resolution)?;
        let uncertainty = uncertainty_grid(ensemble, &model.axes, resolution)?;
        let normalized = ensemble.normalized_parameters();
        let samples = ensemble
            .runs()
            .iter()
            .zip(&normalized)
            .zip(&assignment.labels)
            .map(|((r, p), &cluster)| GridSample {
                run: r.name.clone(),
                position: model.axes.iter().map(|&a| p[a]).collect(),
                cluster,
            })
            .collect();
        let class_colors = model
            .classes
            .iter()
            .map(|&c| {
                let hex = colors.map_or(GREY_HEX, |ca| {
                    if (c as usize) < ca.colors.len() {
                        ca.hex(c)
                    } else {
                        GREY_HEX
                    }
                });
                (c, hex.to_string())
            })
            .collect();
        Ok(Self {
            parameter_names: model.axes.iter().map(|&a| ensemble.parameter_names()[a].clone()).collect(),
            ranges: model.axes.iter().map(|&a| ensemble.parameter_ranges()[a]).collect(),
            grid,
            uncertainty,
            samples,
            class_colors,
        })
    }

    pub fn dim(&self) -> usize {
        self.parameter_names.len()
    }

    /// Focus in normalized grid coordinates; rejects values outside the ranges.
    pub fn normalize_focus(&self, focus: &FocusPoint) -> Result<Vec<f64>> {
        if focus.0.len() != self.dim() {
            return Err(Error::LengthMismatch {
                left: focus.0.len(),
                right: self.dim(),
            });
        }
        focus
            .0
            .iter()
            .zip(&self.ranges)
            .zip(&self.parameter_names)
            .map(|((&v, r), name)| {
                let slack = 1e-9 * (r.max - r.min).abs().max(1.0);
                if !v.is_finite() || v < r.min - slack || v > r.max + slack {
                    Err(Error::Invalid(format!(
                        "focus value {v} for {name:?} outside [{}, {}]",
                        r.min, r.max
                    )))
                } else {
                    Ok(r.normalize(v).clamp(0.0, 1.0))
                }
            })
            .collect()
    }

    /// Focus at the center of the parameter ranges.
    pub fn center_focus(&self) -> FocusPoint {
        FocusPoint(self.ranges.iter().map(|r| r.denormalize(0.5)).collect())
    }

    pub fn axis_index(&self, name: &str) -> Option<usize> {
        self.parameter_names.iter().position(|n| n == name)
    }

    pub fn slice(&self, focus: &FocusPoint, axes: (usize, usize), epsilon: Option<f64>) -> Result<HyperSlice> {
        let f = self.normalize_focus(focus)?;
        extract_slice(&self.grid, &self.uncertainty, &self.samples, &f, axes, epsilon)
    }

    /// Parses `expression` and builds the mask of `segment` in the slice.
    pub fn projection(
        &self,
        segment: u32,
        expression: &str,
        focus: &FocusPoint,
        axes: (usize, usize),
    ) -> Result<BinaryMask> {
        for a in [axes.0, axes.1] {
            if a >= self.dim() {
                return Err(Error::AxisOutOfRange(a));
            }
        }
        let expr = parse_projection_expr(expression, axes, &self.parameter_names)?;
        let f = self.normalize_focus(focus)?;
        boundary_mask(&self.grid, segment, &expr, &focus_nodes(&self.grid, &f), axes)
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        if let Some(&c) = self.grid.labels.iter().find(|&&c| c > u8::MAX as u32) {
            return Err(Error::Invalid(format!("class id {c} does not fit the u8 label format")));
        }
        let payload: Vec<u8> = self.grid.labels.iter().map(|&c| c as u8).collect();
        let res = self.grid.shape.resolution();
        let write = |name: &str, bytes: &[u8]| {
            let p = dir.join(name);
            fs::write(&p, bytes).map_err(|e| Error::io(p, e))
        };
        write("labels.elbl", &encode_grid(LABEL_MAGIC, res, &payload))?;
        let factors: Vec<f32> = self.uncertainty.factors().iter().map(|&f| f as f32).collect();
        write("uncertainty.efld", &encode_f32_grid(res, &factors))?;
        let meta = GridMeta {
            parameter_names: self.parameter_names.clone(),
            ranges: self.ranges.clone(),
            resolution: res.to_vec(),
            axis_order: "row-major, axis 0 slowest".into(),
            class_colors: self.class_colors.clone(),
            samples: self.samples.clone(),
        };
        write("grid.json", serde_json::to_string_pretty(&meta)?.as_bytes())
    }

    pub fn read(dir: &Path) -> Result<Self> {
        let read = |name: &str| {
            let p = dir.join(name);
            fs::read(&p).map_err(|e| Error::io(p, e))
        };
        let meta: GridMeta = serde_json::from_slice(&read("grid.json")?)?;
        let shape = GridShape::new(meta.resolution.clone())?;
        let bytes = read("labels.elbl")?;
        let (dims, payload) = decode_grid(LABEL_MAGIC, &bytes, 1)?;
        if dims != meta.resolution {
            return Err(Error::Format("label grid extents differ from grid.json".into()));
        }
        let grid = LabelGrid::new(shape.clone(), payload.iter().map(|&b| b as u32).collect())?;
        let (udims, factors) = decode_f32_grid(&read("uncertainty.efld")?)?;
        if udims != meta.resolution {
            return Err(Error::Format("uncertainty extents differ from grid.json".into()));
        }
        let uncertainty = UncertaintyGrid {
            shape,
            distance: factors.iter().map(|&f| 1.0 - f as f64).collect(),
        };
        if meta.parameter_names.len() != meta.ranges.len() || meta.ranges.len() != grid.shape.dim() {
            return Err(Error::Format("grid.json axes are inconsistent".into()));
        }
        Ok(Self {
            parameter_names: meta.parameter_names,
            ranges: meta.ranges,
            grid,
            uncertainty,
            samples: meta.samples,
            class_colors: meta.class_colors,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clustering::Palette;
    use crate::ensemble::{Run, ScalarField, Timestep};

    fn fixture() -> (Ensemble, ClusterAssignment) {
        let field = ScalarField::new(vec![2, 2], vec![0.0; 4]).unwrap();
        let mut runs = Vec::new();
        let mut labels = Vec::new();
        for i in 0..4 {
            for j in 0..4 {
                runs.push(Run {
                    name: format!("r{i}{j}"),
                    parameters: vec![i as f64 * 10.0, j as f64, 7.0],
                    timesteps: vec![Timestep { t: 0.0, field: field.clone() }],
                });
                labels.push(u32::from(i + j >= 3));
            }
        }
        let e = Ensemble::new(vec!["x".into(), "y".into(), "z".into()], runs).unwrap();
        let a = ClusterAssignment {
            pruning_height: 0.5,
            cluster_count: 2,
            labels,
            nodes: vec![0, 1],
        };
        (e, a)
    }

    fn partition() -> Partition {
        let (e, a) = fixture();
        let colors = ColorAssignment { palette: Palette::Set1, colors: vec![1, 0] };
        let model = train_svm_on(&e, &a, SvmConfig { c: 100.0, gamma: 10.0 }, &[0, 1]).unwrap();
        assert!(model.training_misclassifications.is_empty());
        Partition::build(&e, &a, Some(&colors), &model, &[7, 7]).unwrap()
    }

    #[test]
    fn build_and_query() {
        let p = partition();
        assert_eq!(p.parameter_names, vec!["x", "y"]);
        assert_eq!(p.class_colors[&0], "#377eb8");
        assert_eq!(p.grid.labels.len(), 49);
        let focus = FocusPoint(vec![15.0, 1.5]);
        assert_eq!(p.normalize_focus(&focus).unwrap(), vec![0.5, 0.5]);
        assert!(p.normalize_focus(&FocusPoint(vec![31.0, 0.0])).is_err());
        let s = p.slice(&focus, (0, 1), None).unwrap();
        assert_eq!(s.in_slice.len(), 16);
        assert_eq!(s.label(0, 0), 0);
        assert_eq!(s.label(6, 6), 1);
        // 2D grid: atoms are impossible, Complete is the slice itself
        let m = p.projection(1, "Complete", &focus, (0, 1)).unwrap();
        for x in 0..7 {
            for y in 0..7 {
                assert_eq!(m.get(x, y), s.label(x, y) == 1);
            }
        }
        let err = p.projection(1, "x", &focus, (0, 1)).unwrap_err();
        assert!(matches!(err, Error::Parse(_)));
    }

    #[test]
    fn disk_round_trip() {
        let p = partition();
        let dir = tempfile::tempdir().unwrap();
        p.write(dir.path()).unwrap();
        let back = Partition::read(dir.path()).unwrap();
        assert_eq!(back.grid, p.grid);
        assert_eq!(back.samples, p.samples);
        assert_eq!(back.class_colors, p.class_colors);
        for (a, b) in back.uncertainty.factors().iter().zip(p.uncertainty.factors()) {
            assert!((a - b).abs() < 1e-6);
        }
        let bytes = fs::read(dir.path().join("labels.elbl")).unwrap();
        assert_eq!(&bytes[..4], b"ELBL");
        assert_eq!(bytes.len(), 4 + 4 + 8 + 49);
    }

    #[test]
    fn read_rejects_corrupt_labels() {
        let p = partition();
        let dir = tempfile::tempdir().unwrap();
        p.write(dir.path()).unwrap();
        fs::write(dir.path().join("labels.elbl"), b"ELBLxx").unwrap();
        assert!(Partition::read(dir.path()).is_err());
    }
}
