//! RGBA rasterization of slices, projection masks and scalar fields.

use std::collections::BTreeMap;

use hyperslice_core::ensemble::ScalarField;
use hyperslice_core::partition::{BinaryMask, HyperSlice};

/// Row-major RGBA8 image with the origin at the top-left.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<u8>,
}

impl Image {
    pub fn new(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            pixels: vec![255; width * height * 4],
        }
    }

    pub fn pixel(&self, x: usize, y: usize) -> [u8; 4] {
        let i = (y * self.width + x) * 4;
        [self.pixels[i], self.pixels[i + 1], self.pixels[i + 2], self.pixels[i + 3]]
    }

    fn put(&mut self, x: usize, y: usize, rgb: [u8; 3]) {
        if x < self.width && y < self.height {
            let i = (y * self.width + x) * 4;
            self.pixels[i..i + 3].copy_from_slice(&rgb);
            self.pixels[i + 3] = 255;
        }
    }

    fn disc(&mut self, cx: f64, cy: f64, r: f64, rgb: [u8; 3]) {
        let (x0, x1) = ((cx - r).floor().max(0.0) as usize, (cx + r).ceil() as usize);
        let (y0, y1) = ((cy - r).floor().max(0.0) as usize, (cy + r).ceil() as usize);
        for y in y0..=y1 {
            for x in x0..=x1 {
                let (dx, dy) = (x as f64 + 0.5 - cx, y as f64 + 0.5 - cy);
                if dx * dx + dy * dy <= r * r {
                    self.put(x, y, rgb);
                }
            }
        }
    }
}

/// `#rrggbb` to RGB; malformed input gives mid grey.
pub fn parse_hex(hex: &str) -> [u8; 3] {
    let h = hex.trim_start_matches('#');
    let c = |i: usize| h.get(i..i + 2).and_then(|s| u8::from_str_radix(s, 16).ok());
    match (h.len(), c(0), c(2), c(4)) {
        (6, Some(r), Some(g), Some(b)) => [r, g, b],
        _ => [128, 128, 128],
    }
}

/// Blends toward the color's own luma; `factor` 1 keeps the color, 0 gives grey.
pub fn desaturate(rgb: [u8; 3], factor: f64) -> [u8; 3] {
    let f = factor.clamp(0.0, 1.0);
    let luma = 0.299 * rgb[0] as f64 + 0.587 * rgb[1] as f64 + 0.114 * rgb[2] as f64;
    rgb.map(|c| (luma + f * (c as f64 - luma)).round().clamp(0.0, 255.0) as u8)
}

fn class_rgb(colors: &BTreeMap<u32, String>, class: u32) -> [u8; 3] {
    colors.get(&class).map_or([128, 128, 128], |h| parse_hex(h))
}

/// Pixel center of slice node `(x, y)`; the second axis points up.
fn node_center(slice: &HyperSlice, scale: usize, x: f64, y: f64) -> (f64, f64) {
    let s = scale as f64;
    (x * s + 0.5 * s, (slice.height as f64 - 1.0 - y) * s + 0.5 * s)
}

/// Paints each slice node as a `scale`-sized block in its class color, dimmed
/// by the uncertainty when `show_uncertainty` is set, then draws the runs:
/// filled dots with a white rim for runs in the slice, black rings for the
/// projected rest.
pub fn render_slice(
    slice: &HyperSlice,
    colors: &BTreeMap<u32, String>,
    scale: usize,
    show_uncertainty: bool,
) -> Image {
    let scale = scale.max(1);
    let mut img = Image::new(slice.width * scale, slice.height * scale);
    for x in 0..slice.width {
        for y in 0..slice.height {
            let k = x * slice.height + y;
            let mut rgb = class_rgb(colors, slice.labels[k]);
            if show_uncertainty {
                rgb = desaturate(rgb, slice.uncertainty[k]);
            }
            let top = (slice.height - 1 - y) * scale;
            for py in top..top + scale {
                for px in x * scale..(x + 1) * scale {
                    img.put(px, py, rgb);
                }
            }
        }
    }
    let cells = |p: f64, n: usize| p * (n as f64 - 1.0);
    let r = (scale as f64 * 0.35).max(1.5);
    for s in &slice.projected {
        let (cx, cy) = node_center(slice, scale, cells(s.position[0], slice.width), cells(s.position[1], slice.height));
        img.disc(cx, cy, r, [0, 0, 0]);
        img.disc(cx, cy, r * 0.6, class_rgb(colors, s.clusters[0]));
    }
    for s in &slice.in_slice {
        let (cx, cy) = node_center(slice, scale, cells(s.position[0], slice.width), cells(s.position[1], slice.height));
        img.disc(cx, cy, r, [255, 255, 255]);
        img.disc(cx, cy, r * 0.7, class_rgb(colors, s.cluster));
    }
    img
}

/// Draws a dot texture on a grid rotated by 45 degrees over every mask node
/// that is set.
pub fn overlay_mask(img: &mut Image, mask: &BinaryMask, scale: usize, rgb: [u8; 3]) {
    let scale = scale.max(1);
    let spacing = (scale / 3).max(3);
    for x in 0..mask.width {
        for y in 0..mask.height {
            if !mask.get(x, y) {
                continue;
            }
            let top = (mask.height - 1 - y) * scale;
            for py in top..top + scale {
                for px in x * scale..(x + 1) * scale {
                    if (px + py) % spacing == 0 && (px + 2 * spacing - py % (2 * spacing)) % (2 * spacing) < 2 {
                        img.put(px, py, rgb);
                    }
                }
            }
        }
    }
}

/// Perceptual ramp from dark blue through green to yellow.
pub fn ramp(v: f64) -> [u8; 3] {
    const STOPS: [[f64; 3]; 5] = [
        [68.0, 1.0, 84.0],
        [59.0, 82.0, 139.0],
        [33.0, 145.0, 140.0],
        [94.0, 201.0, 98.0],
        [253.0, 231.0, 37.0],
    ];
    let t = if v.is_finite() { v.clamp(0.0, 1.0) } else { 0.0 } * (STOPS.len() - 1) as f64;
    let k = (t.floor() as usize).min(STOPS.len() - 2);
    let w = t - k as f64;
    let mut out = [0u8; 3];
    for (c, o) in out.iter_mut().enumerate() {
        *o = (STOPS[k][c] + w * (STOPS[k + 1][c] - STOPS[k][c])).round() as u8;
    }
    out
}

/// Heatmap of a 2D field, or of plane `layer` along the first axis of a 3D
/// field. Values are expected in `[0, 1]`. The last axis runs horizontally.
pub fn render_field(field: &ScalarField, layer: usize) -> Option<Image> {
    let dims = field.dims();
    let (offset, rows, cols) = match dims {
        [r, c] => (0, *r, *c),
        [d, r, c] if layer < *d => (layer * r * c, *r, *c),
        _ => return None,
    };
    let mut img = Image::new(cols, rows);
    for y in 0..rows {
        for x in 0..cols {
            img.put(x, y, ramp(field.values()[offset + y * cols + x] as f64));
        }
    }
    Some(img)
}

#[cfg(test)]
mod tests {
    use super::*;
    use hyperslice_core::partition::{ProjectedSample, SliceSample};

    fn slice() -> HyperSlice {
        HyperSlice {
            axes: (0, 1),
            width: 2,
            height: 3,
            plane: vec![0, 0],
            labels: vec![0, 0, 1, 1, 1, 1],
            uncertainty: vec![1.0, 0.0, 1.0, 1.0, 0.5, 1.0],
            in_slice: vec![SliceSample {
                run: "r".into(),
                position: [0.0, 0.0],
                cluster: 0,
            }],
            projected: vec![ProjectedSample {
                position: [1.0, 1.0],
                runs: vec!["q".into()],
                clusters: vec![1],
            }],
            mask: None,
        }
    }

    fn colors() -> BTreeMap<u32, String> {
        [(0, "#e41a1c".to_string()), (1, "#377eb8".to_string())].into()
    }

    #[test]
    fn hex_and_desaturation() {
        assert_eq!(parse_hex("#377eb8"), [0x37, 0x7e, 0xb8]);
        assert_eq!(parse_hex("nonsense"), [128, 128, 128]);
        let c = [200, 20, 40];
        assert_eq!(desaturate(c, 1.0), c);
        let g = desaturate(c, 0.0);
        assert!(g[0] == g[1] && g[1] == g[2]);
    }

    #[test]
    fn slice_layout_puts_second_axis_up() {
        let img = render_slice(&slice(), &colors(), 10, false);
        assert_eq!((img.width, img.height), (20, 30));
        // node (0, 2) is class 1 and sits in the top-left block
        assert_eq!(&img.pixel(2, 2)[..3], &parse_hex("#377eb8"));
        // node (0, 1) is class 0 in the middle-left block
        assert_eq!(&img.pixel(2, 12)[..3], &parse_hex("#e41a1c"));
    }

    #[test]
    fn uncertainty_toggle() {
        let on = render_slice(&slice(), &colors(), 10, true);
        let off = render_slice(&slice(), &colors(), 10, false);
        // node (0, 1) has factor 0: grey with the toggle, full color without
        let p = on.pixel(2, 12);
        assert!(p[0] == p[1] && p[1] == p[2]);
        assert_eq!(&off.pixel(2, 12)[..3], &parse_hex("#e41a1c"));
    }

    #[test]
    fn markers_are_drawn() {
        let img = render_slice(&slice(), &colors(), 10, false);
        // in-slice run at node (0, 0): bottom-left block center
        assert_eq!(&img.pixel(5, 25)[..3], &parse_hex("#e41a1c"));
        // projected run at unit (1, 1) is node (1, 2): black ring around its center
        assert_eq!(&img.pixel(12, 5)[..3], &[0, 0, 0]);
    }

    #[test]
    fn mask_overlay_only_touches_set_nodes() {
        let mut img = render_slice(&slice(), &colors(), 12, false);
        let before = img.clone();
        let mask = BinaryMask {
            width: 2,
            height: 3,
            data: vec![true, false, false, false, false, false],
        };
        overlay_mask(&mut img, &mask, 12, [0, 0, 0]);
        let mut changed_outside = false;
        let mut changed_inside = false;
        for y in 0..img.height {
            for x in 0..img.width {
                if img.pixel(x, y) != before.pixel(x, y) {
                    if x < 12 && y >= 24 {
                        changed_inside = true;
                    } else {
                        changed_outside = true;
                    }
                }
            }
        }
        assert!(changed_inside && !changed_outside);
    }

    #[test]
    fn field_heatmap() {
        let f = ScalarField::new(vec![2, 3], vec![0.0, 0.5, 1.0, 1.0, 0.5, 0.0]).unwrap();
        let img = render_field(&f, 0).unwrap();
        assert_eq!((img.width, img.height), (3, 2));
        assert_eq!(&img.pixel(0, 0)[..3], &ramp(0.0));
        assert_eq!(&img.pixel(2, 0)[..3], &ramp(1.0));
        assert_eq!(&img.pixel(0, 1)[..3], &ramp(1.0));
        let g = ScalarField::new(vec![2, 1, 1], vec![0.0, 1.0]).unwrap();
        assert_eq!(&render_field(&g, 1).unwrap().pixel(0, 0)[..3], &ramp(1.0));
        assert!(render_field(&g, 2).is_none());
    }
}
