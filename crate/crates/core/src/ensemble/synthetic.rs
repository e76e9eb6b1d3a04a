//! Synthetic four-parameter ensemble with known ground-truth segments.
//!
//! Parameters `a, b, c, d` are sampled on `{0, 0.25, 0.5, 0.75, 1}^4` (625 runs).
//! Each run renders Gaussian kernels on a 64x64 grid for four timesteps. The
//! kernel layout is chosen by the run's segment; positions and widths vary
//! slightly with `a`, `b`, `c`. Parameter `d` never affects the output.
//!
//! Segments, in steps of 0.25 (`ia = 4a` etc.):
//!
//! | id | name   | rule                         |
//! |----|--------|------------------------------|
//! | 1  | green  | `ib + ic >= 5`               |
//! | 0  | red    | otherwise, `ic <= 1`         |
//! | 3  | purple | otherwise, `ia + ic >= 5`    |
//! | 2  | blue   | otherwise                    |
//!
//! Green occupies large `c` with a diagonal boundary in the b-c plane; purple
//! has a diagonal boundary in the a-c plane.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Ensemble, Run, ScalarField, Timestep};

pub const PARAMETER_NAMES: [&str; 4] = ["a", "b", "c", "d"];
pub const SAMPLES_PER_AXIS: usize = 5;
pub const RESOLUTION: usize = 64;
pub const TIMES: [f64; 4] = [0.0, 0.5, 1.0, 1.5];
pub const CLASS_COUNT: usize = 4;

pub const RED: u32 = 0;
pub const GREEN: u32 = 1;
pub const BLUE: u32 = 2;
pub const PURPLE: u32 = 3;

pub struct SyntheticEnsemble {
    pub ensemble: Ensemble,
    /// Ground-truth segment per run, aligned with `ensemble.runs()`.
    pub labels: Vec<u32>,
}

/// Ground-truth segment for grid indices `ia, ib, ic` in `0..5`.
pub fn segment_of(ia: usize, ib: usize, ic: usize) -> u32 {
    if ib + ic >= 5 {
        GREEN
    } else if ic <= 1 {
        RED
    } else if ia + ic >= 5 {
        PURPLE
    } else {
        BLUE
    }
}

/// Ground-truth segment for a point of `[0,1]^3`, matching [`segment_of`] on the samples.
pub fn segment_at(a: f64, b: f64, c: f64) -> u32 {
    let eps = 1e-9;
    if b + c >= 1.25 - eps {
        GREEN
    } else if c <= 0.25 + eps {
        RED
    } else if a + c >= 1.25 - eps {
        PURPLE
    } else {
        BLUE
    }
}

fn kernel_centers(segment: u32) -> &'static [(f64, f64)] {
    match segment {
        RED => &[(16.0, 16.0)],
        GREEN => &[(48.0, 14.0), (48.0, 34.0)],
        BLUE => &[(14.0, 48.0), (31.0, 50.0), (48.0, 52.0)],
        _ => &[(24.0, 26.0), (36.0, 26.0), (24.0, 38.0), (36.0, 38.0)],
    }
}

fn render(segment: u32, a: f64, b: f64, c: f64, t: f64, amplitudes: &[f64]) -> ScalarField {
    let centers = kernel_centers(segment);
    let dx = 2.0 * (a - 0.5);
    let dy = 2.0 * (b - 0.5);
    let sigma = (4.0 + c) * (1.0 + 0.4 * t);
    let two_sigma_sq = 2.0 * sigma * sigma;
    let scale = 0.6 + 0.4 * t / TIMES[TIMES.len() - 1];
    let mut values = vec![0f32; RESOLUTION * RESOLUTION];
    for (y, row) in values.chunks_exact_mut(RESOLUTION).enumerate() {
        for (x, v) in row.iter_mut().enumerate() {
            let mut sum = 0.0;
            for (&(cx, cy), &amp) in centers.iter().zip(amplitudes) {
                let rx = x as f64 - (cx + dx);
                let ry = y as f64 - (cy + dy);
                sum += scale * amp * (-(rx * rx + ry * ry) / two_sigma_sq).exp();
            }
            *v = sum as f32;
        }
    }
    ScalarField::new(vec![RESOLUTION, RESOLUTION], values).expect("dims match")
}

/// Builds the 625-run ensemble. Deterministic in `rng_seed`, which only drives
/// small per-kernel amplitude jitter shared by all runs with equal `(a, b, c)`.
pub fn generate_synthetic(rng_seed: u64) -> SyntheticEnsemble {
    let n = SAMPLES_PER_AXIS;
    let step = 1.0 / (n - 1) as f64;
    let mut groups = Vec::with_capacity(n * n * n);
    for ia in 0..n {
        for ib in 0..n {
            for ic in 0..n {
                let group = (ia * n + ib) * n + ic;
                let mut rng = ChaCha8Rng::seed_from_u64(rng_seed ^ (group as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
                let segment = segment_of(ia, ib, ic);
                let amplitudes: Vec<f64> = kernel_centers(segment)
                    .iter()
                    .map(|_| 1.0 + 0.06 * (rng.random::<f64>() - 0.5))
                    .collect();
                let (a, b, c) = (ia as f64 * step, ib as f64 * step, ic as f64 * step);
                let timesteps: Vec<Timestep> = TIMES
                    .iter()
                    .map(|&t| Timestep {
                        t,
                        field: render(segment, a, b, c, t, &amplitudes),
                    })
                    .collect();
                groups.push((segment, timesteps));
            }
        }
    }

    let mut runs = Vec::with_capacity(n.pow(4));
    let mut labels = Vec::with_capacity(n.pow(4));
    for ia in 0..n {
        for ib in 0..n {
            for ic in 0..n {
                let (segment, timesteps) = &groups[(ia * n + ib) * n + ic];
                for id in 0..n {
                    runs.push(Run {
                        name: format!("run_{ia}{ib}{ic}{id}"),
                        parameters: vec![
                            ia as f64 * step,
                            ib as f64 * step,
                            ic as f64 * step,
                            id as f64 * step,
                        ],
                        timesteps: timesteps.clone(),
                    });
                    labels.push(*segment);
                }
            }
        }
    }
    let names = PARAMETER_NAMES.iter().map(|s| s.to_string()).collect();
    SyntheticEnsemble {
        ensemble: Ensemble::new(names, runs).expect("synthetic ensemble is valid"),
        labels,
    }
}
