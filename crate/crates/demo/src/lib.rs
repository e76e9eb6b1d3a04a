//! Browser demo: the synthetic ensemble clustered, partitioned and rendered
//! to RGBA buffers for a canvas.

pub mod render;

use hyperslice_core::clustering::{
    assign_colors, hierarchical_cluster, prune_to_count, ClusterAssignment, ClusterTree, Linkage, Palette,
};
use hyperslice_core::ensemble::synthetic::generate_synthetic;
use hyperslice_core::ensemble::{normalize_fields, Ensemble};
use hyperslice_core::partition::{train_svm, FocusPoint, Partition, SvmConfig};
use hyperslice_core::similarity::{compute_run_matrix, compute_timestep_matrix};
use wasm_bindgen::prelude::*;

use render::{overlay_mask, render_field, render_slice, Image};

const SVM: SvmConfig = SvmConfig { c: 1000.0, gamma: 8.0 };
const OVERLAY: [u8; 3] = [20, 20, 20];

/// Pipeline state independent of the JavaScript bindings.
pub struct DemoState {
    ensemble: Ensemble,
    tree: ClusterTree,
    assignment: ClusterAssignment,
    partition: Partition,
    resolution: usize,
}

impl DemoState {
    /// Generates the synthetic ensemble, clusters it with ward.D into
    /// `clusters` groups and partitions a `resolution`^4 grid.
    pub fn new(seed: u64, seed_count: usize, clusters: usize, resolution: usize) -> Result<Self, String> {
        let ensemble = normalize_fields(generate_synthetic(seed).ensemble);
        let dt = compute_timestep_matrix(&ensemble, seed_count, seed).map_err(|e| e.to_string())?;
        let dr = compute_run_matrix(&dt, None, None).map_err(|e| e.to_string())?;
        let tree = hierarchical_cluster(&dr, Linkage::WardD).map_err(|e| e.to_string())?;
        let assignment = prune_to_count(&tree, clusters).map_err(|e| e.to_string())?;
        let partition = Self::partition(&ensemble, &tree, &assignment, resolution)?;
        Ok(Self {
            ensemble,
            tree,
            assignment,
            partition,
            resolution,
        })
    }

    fn partition(
        ensemble: &Ensemble,
        tree: &ClusterTree,
        assignment: &ClusterAssignment,
        resolution: usize,
    ) -> Result<Partition, String> {
        let colors = assign_colors(tree, assignment, Palette::Set1, None);
        let model = train_svm(ensemble, assignment, SVM).map_err(|e| e.to_string())?;
        let res = vec![resolution; ensemble.parameter_names().len()];
        Partition::build(ensemble, assignment, Some(&colors), &model, &res).map_err(|e| e.to_string())
    }

    /// Re-prunes the tree to `clusters` groups and retrains the partition.
    pub fn set_cluster_count(&mut self, clusters: usize) -> Result<(), String> {
        let assignment = prune_to_count(&self.tree, clusters).map_err(|e| e.to_string())?;
        self.partition = Self::partition(&self.ensemble, &self.tree, &assignment, self.resolution)?;
        self.assignment = assignment;
        Ok(())
    }

    pub fn partition_ref(&self) -> &Partition {
        &self.partition
    }

    pub fn cluster_count(&self) -> usize {
        self.assignment.cluster_count
    }

    fn focus(&self, unit: &[f64]) -> Result<FocusPoint, String> {
        if unit.len() != self.partition.dim() {
            return Err(format!("focus needs {} values, got {}", self.partition.dim(), unit.len()));
        }
        Ok(FocusPoint(
            unit.iter()
                .zip(&self.partition.ranges)
                .map(|(&u, r)| r.denormalize(u.clamp(0.0, 1.0)))
                .collect(),
        ))
    }

    /// Hyper-slice through `focus` (unit coordinates) spanned by `axes`.
    pub fn slice_image(
        &self,
        axes: (usize, usize),
        focus: &[f64],
        show_uncertainty: bool,
        scale: usize,
    ) -> Result<Image, String> {
        let slice = self
            .partition
            .slice(&self.focus(focus)?, axes, None)
            .map_err(|e| e.to_string())?;
        Ok(render_slice(&slice, &self.partition.class_colors, scale, show_uncertainty))
    }

    /// Slice image with the projection mask of `segment` under `expression`
    /// drawn on top.
    pub fn projection_image(
        &self,
        segment: u32,
        expression: &str,
        axes: (usize, usize),
        focus: &[f64],
        show_uncertainty: bool,
        scale: usize,
    ) -> Result<Image, String> {
        let f = self.focus(focus)?;
        let mask = self
            .partition
            .projection(segment, expression, &f, axes)
            .map_err(|e| e.to_string())?;
        let mut img = self.slice_image(axes, focus, show_uncertainty, scale)?;
        overlay_mask(&mut img, &mask, scale, OVERLAY);
        Ok(img)
    }

    /// Heatmap of timestep `step` of run `run`.
    pub fn field_image(&self, run: usize, step: usize) -> Result<Image, String> {
        let r = self
            .ensemble
            .runs()
            .get(run)
            .ok_or_else(|| format!("run index {run} out of range"))?;
        let ts = r
            .timesteps
            .get(step)
            .ok_or_else(|| format!("timestep {step} out of range for {}", r.name))?;
        render_field(&ts.field, 0).ok_or_else(|| "field is not 2D or 3D".to_string())
    }
}

/// JavaScript handle around [`DemoState`].
#[wasm_bindgen]
pub struct Demo {
    state: DemoState,
}

fn js_err(e: String) -> JsValue {
    JsValue::from_str(&e)
}

#[wasm_bindgen]
impl Demo {
    #[wasm_bindgen(constructor)]
    pub fn new(seed: u64, seed_count: usize, clusters: usize, resolution: usize) -> Result<Demo, JsValue> {
        DemoState::new(seed, seed_count, clusters, resolution)
            .map(|state| Demo { state })
            .map_err(js_err)
    }

    #[wasm_bindgen(js_name = setClusterCount)]
    pub fn set_cluster_count(&mut self, clusters: usize) -> Result<(), JsValue> {
        self.state.set_cluster_count(clusters).map_err(js_err)
    }

    #[wasm_bindgen(js_name = clusterCount)]
    pub fn cluster_count(&self) -> usize {
        self.state.cluster_count()
    }

    #[wasm_bindgen(js_name = parameterNames)]
    pub fn parameter_names(&self) -> Vec<String> {
        self.state.partition.parameter_names.clone()
    }

    #[wasm_bindgen(js_name = classColor)]
    pub fn class_color(&self, class: u32) -> Option<String> {
        self.state.partition.class_colors.get(&class).cloned()
    }

    #[wasm_bindgen(js_name = runCount)]
    pub fn run_count(&self) -> usize {
        self.state.ensemble.runs().len()
    }

    #[wasm_bindgen(js_name = runName)]
    pub fn run_name(&self, run: usize) -> Option<String> {
        self.state.ensemble.runs().get(run).map(|r| r.name.clone())
    }

    #[wasm_bindgen(js_name = timestepCount)]
    pub fn timestep_count(&self, run: usize) -> usize {
        self.state.ensemble.runs().get(run).map_or(0, |r| r.timesteps.len())
    }

    pub fn resolution(&self) -> usize {
        self.state.resolution
    }

    /// RGBA bytes of a slice, `resolution * scale` pixels square.
    #[wasm_bindgen(js_name = sliceRgba)]
    pub fn slice_rgba(
        &self,
        axis_i: usize,
        axis_j: usize,
        focus: Vec<f64>,
        uncertainty: bool,
        scale: usize,
    ) -> Result<Vec<u8>, JsValue> {
        self.state
            .slice_image((axis_i, axis_j), &focus, uncertainty, scale)
            .map(|img| img.pixels)
            .map_err(js_err)
    }

    /// RGBA bytes of a slice with a projection overlay; parse errors carry
    /// the offending position.
    #[wasm_bindgen(js_name = projectionRgba)]
    #[allow(clippy::too_many_arguments)]
    pub fn projection_rgba(
        &self,
        segment: u32,
        expression: &str,
        axis_i: usize,
        axis_j: usize,
        focus: Vec<f64>,
        uncertainty: bool,
        scale: usize,
    ) -> Result<Vec<u8>, JsValue> {
        self.state
            .projection_image(segment, expression, (axis_i, axis_j), &focus, uncertainty, scale)
            .map(|img| img.pixels)
            .map_err(js_err)
    }

    /// Field heatmap as `[width, height, rgba...]` packed into one buffer.
    #[wasm_bindgen(js_name = fieldRgba)]
    pub fn field_rgba(&self, run: usize, step: usize) -> Result<Vec<u8>, JsValue> {
        let img = self.state.field_image(run, step).map_err(js_err)?;
        let mut out = Vec::with_capacity(8 + img.pixels.len());
        out.extend_from_slice(&(img.width as u32).to_le_bytes());
        out.extend_from_slice(&(img.height as u32).to_le_bytes());
        out.extend_from_slice(&img.pixels);
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::OnceLock;

    fn state() -> &'static DemoState {
        static S: OnceLock<DemoState> = OnceLock::new();
        S.get_or_init(|| DemoState::new(1, 64, 4, 9).unwrap())
    }

    #[test]
    fn slice_and_projection_render() {
        let s = state();
        assert_eq!(s.cluster_count(), 4);
        let img = s.slice_image((1, 2), &[0.5; 4], true, 4).unwrap();
        assert_eq!((img.width, img.height), (36, 36));
        let proj = s.projection_image(0, "a", (1, 2), &[0.5; 4], true, 4).unwrap();
        assert_eq!(proj.pixels.len(), img.pixels.len());
    }

    #[test]
    fn errors_are_reported() {
        let s = state();
        let e = s.projection_image(0, "b or c", (1, 2), &[0.5; 4], false, 4).unwrap_err();
        assert!(e.contains("position 0"), "{e}");
        assert!(s.slice_image((1, 2), &[0.5; 3], false, 4).is_err());
        assert!(s.slice_image((1, 7), &[0.5; 4], false, 4).is_err());
        assert!(s.field_image(10_000, 0).is_err());
    }

    #[test]
    fn field_heatmap_matches_dims() {
        let s = state();
        let img = s.field_image(0, 0).unwrap();
        assert_eq!((img.width, img.height), (64, 64));
    }

    #[test]
    fn recluster_changes_partition() {
        let mut s = DemoState::new(1, 32, 4, 5).unwrap();
        s.set_cluster_count(2).unwrap();
        assert_eq!(s.cluster_count(), 2);
        assert!(s.partition_ref().class_colors.len() <= 2);
        assert!(s.set_cluster_count(0).is_err());
    }
}
