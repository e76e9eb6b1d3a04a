//! Field-level and run-level dissimilarities.
//!
//! The timestep matrix holds the field distance between every pair of
//! `(run, timestep)` objects. Run distances are averages of bilinearly
//! interpolated timestep-matrix entries over a resampled common time grid, so
//! changing the time interval never touches the fields again.

mod matrix;

use serde::{Deserialize, Serialize};

use crate::ensemble::{draw_seeds, sample_field, Ensemble, SampleVector};
use crate::{par, Error, Result};

pub use matrix::{DistanceMatrix, RowKey, MATRIX_MAGIC};

/// `1 - sum(1 - max(a_k, b_k)) / sum(1 - min(a_k, b_k))`, with 0 when the
/// denominator vanishes (both vectors all ones).
pub fn field_distance(a: &SampleVector, b: &SampleVector) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    if a.is_empty() {
        return Err(Error::Invalid("sample vectors must not be empty".into()));
    }
    Ok(field_distance_raw(a.values(), b.values()))
}

#[inline]
pub(crate) fn field_distance_raw(a: &[f64], b: &[f64]) -> f64 {
    let mut num = 0.0;
    let mut den = 0.0;
    for (&x, &y) in a.iter().zip(b) {
        let (lo, hi) = if x < y { (x, y) } else { (y, x) };
        num += 1.0 - hi;
        den += 1.0 - lo;
    }
    if den == 0.0 {
        0.0
    } else {
        1.0 - num / den
    }
}

/// Equidistant resampling of `[t_min, t_max]` with `count` points.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    pub t_min: f64,
    pub t_max: f64,
    pub count: usize,
}

impl TimeGrid {
    pub fn new(t_min: f64, t_max: f64, count: usize) -> Result<Self> {
        if !(t_max > t_min) || count < 2 {
            return Err(Error::Invalid(format!(
                "time grid needs t_max > t_min and at least 2 samples, got [{t_min}, {t_max}] x {count}"
            )));
        }
        Ok(Self { t_min, t_max, count })
    }

    pub fn step(&self) -> f64 {
        (self.t_max - self.t_min) / (self.count - 1) as f64
    }

    /// The `n`-th sample time. The last one is pinned to `t_max` exactly.
    pub fn time(&self, n: usize) -> f64 {
        if n + 1 == self.count {
            self.t_max
        } else {
            self.t_min + n as f64 * self.step()
        }
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.count).map(|n| self.time(n))
    }
}

/// Time-shift search for the shifted run distance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ShiftOptions {
    pub enabled: bool,
    pub tau_max: f64,
    pub tau_step: f64,
}

impl ShiftOptions {
    pub fn new(tau_max: f64, tau_step: f64) -> Result<Self> {
        let s = Self {
            enabled: true,
            tau_max,
            tau_step,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tau_max >= 0.0) || !(self.tau_step > 0.0) {
            return Err(Error::Invalid("shift needs tau_max >= 0 and tau_step > 0".into()));
        }
        let ratio = self.tau_max / self.tau_step;
        if (ratio - ratio.round()).abs() > 1e-9 * ratio.max(1.0) {
            return Err(Error::Invalid(format!(
                "tau_max {} is not a multiple of tau_step {}",
                self.tau_max, self.tau_step
            )));
        }
        Ok(())
    }

    /// Shift candidates `-tau_max, ..., 0, ..., tau_max`.
    pub fn shifts(&self) -> Vec<f64> {
        let m = (self.tau_max / self.tau_step).round() as i64;
        (-m..=m).map(|s| s as f64 * self.tau_step).collect()
    }
}

/// Native timeline of one run inside a timestep matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct RunTimeline {
    pub name: String,
    pub offset: usize,
    pub times: Vec<f64>,
}

impl RunTimeline {
    pub fn start(&self) -> f64 {
        self.times[0]
    }

    pub fn end(&self) -> f64 {
        self.times[self.times.len() - 1]
    }

    /// Finest native time resolution, or infinity for a single timestep.
    pub fn min_spacing(&self) -> f64 {
        self.times
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(f64::INFINITY, f64::min)
    }

    fn count_within(&self, lo: f64, hi: f64) -> usize {
        self.times.iter().filter(|&&t| t >= lo && t <= hi).count()
    }

    /// Interpolation stencil: up to two `(row, weight)` pairs.
    fn stencil(&self, t: f64) -> Result<[(usize, f64); 2]> {
        if !(t >= self.start() && t <= self.end()) {
            return Err(Error::TimeOutOfSpan {
                run: self.name.clone(),
                t,
                start: self.start(),
                end: self.end(),
            });
        }
        let times = &self.times;
        if times.len() == 1 {
            return Ok([(self.offset, 1.0), (self.offset, 0.0)]);
        }
        let k = times.partition_point(|&x| x <= t).saturating_sub(1).min(times.len() - 2);
        let w = (t - times[k]) / (times[k + 1] - times[k]);
        Ok([(self.offset + k, 1.0 - w), (self.offset + k + 1, w)])
    }
}

/// The timestep-level matrix together with each run's timeline.
#[derive(Debug, Clone, PartialEq)]
pub struct TimestepMatrix {
    matrix: DistanceMatrix,
    timelines: Vec<RunTimeline>,
}

impl TimestepMatrix {
    /// Recovers run timelines from the row keys; rows of a run must be contiguous
    /// and carry increasing times.
    pub fn new(matrix: DistanceMatrix) -> Result<Self> {
        let mut timelines: Vec<RunTimeline> = Vec::new();
        for (row, key) in matrix.row_keys().iter().enumerate() {
            let t = key
                .t
                .ok_or_else(|| Error::Invalid(format!("row {row} has no timestep time")))?;
            match timelines.last_mut() {
                Some(tl) if tl.name == key.run => {
                    if t <= *tl.times.last().expect("non-empty") {
                        return Err(Error::Invalid(format!(
                            "times of run {:?} are not increasing",
                            key.run
                        )));
                    }
                    tl.times.push(t);
                }
                _ => {
                    if timelines.iter().any(|tl| tl.name == key.run) {
                        return Err(Error::Invalid(format!(
                            "rows of run {:?} are not contiguous",
                            key.run
                        )));
                    }
                    timelines.push(RunTimeline {
                        name: key.run.clone(),
                        offset: row,
                        times: vec![t],
                    });
                }
            }
        }
        Ok(Self { matrix, timelines })
    }

    pub fn matrix(&self) -> &DistanceMatrix {
        &self.matrix
    }

    pub fn timelines(&self) -> &[RunTimeline] {
        &self.timelines
    }

    pub fn run_count(&self) -> usize {
        self.timelines.len()
    }

    pub fn run_index(&self, name: &str) -> Option<usize> {
        self.timelines.iter().position(|t| t.name == name)
    }

    pub fn into_matrix(self) -> DistanceMatrix {
        self.matrix
    }
}

/// Field distances between all timesteps of all runs, sampled at `seed_count`
/// shared Monte Carlo positions drawn from `rng_seed`.
pub fn compute_timestep_matrix(
    ensemble: &Ensemble,
    seed_count: usize,
    rng_seed: u64,
) -> Result<TimestepMatrix> {
    if seed_count == 0 {
        return Err(Error::Invalid("seed count must be positive".into()));
    }
    let seeds = draw_seeds(ensemble.field_dims(), seed_count, rng_seed);
    let mut keys = Vec::new();
    let mut fields = Vec::new();
    for run in ensemble.runs() {
        for (k, step) in run.timesteps.iter().enumerate() {
            keys.push(RowKey::timestep(run.name.clone(), k, step.t));
            fields.push(&step.field);
        }
    }
    let samples = par::map_slice(&fields, |f| sample_field(f, &seeds))
        .into_iter()
        .collect::<Result<Vec<SampleVector>>>()?;
    let n = samples.len();
    let upper = par::map_range(n, |i| {
        let a = samples[i].values();
        ((i + 1)..n)
            .map(|j| field_distance_raw(a, samples[j].values()))
            .collect::<Vec<_>>()
    });
    TimestepMatrix::new(DistanceMatrix::from_upper(keys, upper))
}

/// Bilinear interpolation of timestep-matrix entries at times `t_a` of run `i`
/// and `t_b` of run `j`.
pub fn interpolated_timestep_distance(
    dt: &TimestepMatrix,
    run_i: usize,
    run_j: usize,
    t_a: f64,
    t_b: f64,
) -> Result<f64> {
    let si = timeline(dt, run_i)?.stencil(t_a)?;
    let sj = timeline(dt, run_j)?.stencil(t_b)?;
    Ok(bilinear(&dt.matrix, &si, &sj))
}

#[inline]
fn bilinear(m: &DistanceMatrix, si: &[(usize, f64); 2], sj: &[(usize, f64); 2]) -> f64 {
    let mut v = 0.0;
    for &(ra, wa) in si {
        if wa == 0.0 {
            continue;
        }
        for &(rb, wb) in sj {
            if wb == 0.0 {
                continue;
            }
            v += wa * wb * m.get(ra, rb);
        }
    }
    v
}

fn timeline(dt: &TimestepMatrix, run: usize) -> Result<&RunTimeline> {
    dt.timelines
        .get(run)
        .ok_or_else(|| Error::Invalid(format!("run index {run} out of range")))
}

/// Overlap of two runs' spans, optionally intersected with `interval`, and the
/// resampling count. `None` when the overlap is a single instant.
fn overlap_grid(
    a: &RunTimeline,
    b: &RunTimeline,
    interval: Option<(f64, f64)>,
) -> Result<(f64, Option<TimeGrid>)> {
    let (mut lo, mut hi) = (a.start().max(b.start()), a.end().min(b.end()));
    if let Some((t0, t1)) = interval {
        lo = lo.max(t0);
        hi = hi.min(t1);
    }
    if !(lo <= hi) {
        return Err(Error::EmptyOverlap(a.name.clone(), b.name.clone()));
    }
    if lo == hi {
        return Ok((lo, None));
    }
    let count = a.count_within(lo, hi).max(b.count_within(lo, hi)).max(2);
    Ok((lo, Some(TimeGrid::new(lo, hi, count)?)))
}

/// Mean interpolated field distance over the resampled common interval.
pub fn run_distance(
    dt: &TimestepMatrix,
    run_i: usize,
    run_j: usize,
    interval: Option<(f64, f64)>,
) -> Result<f64> {
    // canonical order keeps the floating-point summation identical for (i, j) and (j, i)
    let (i, j) = if run_i <= run_j { (run_i, run_j) } else { (run_j, run_i) };
    let (a, b) = (timeline(dt, i)?, timeline(dt, j)?);
    match overlap_grid(a, b, interval)? {
        (t, None) => Ok(bilinear(&dt.matrix, &a.stencil(t)?, &b.stencil(t)?)),
        (_, Some(grid)) => {
            let mut sum = 0.0;
            for t in grid.times() {
                sum += bilinear(&dt.matrix, &a.stencil(t)?, &b.stencil(t)?);
            }
            Ok(sum / grid.count as f64)
        }
    }
}

/// Minimum over shifts `tau` of the mean distance between run `i` at `t_n` and
/// run `j` at `t_n + tau`. Shifted times are clamped to run `j`'s span.
pub fn run_distance_shifted(
    dt: &TimestepMatrix,
    run_i: usize,
    run_j: usize,
    interval: Option<(f64, f64)>,
    shift: &ShiftOptions,
) -> Result<f64> {
    if !shift.enabled {
        return run_distance(dt, run_i, run_j, interval);
    }
    shift.validate()?;
    let (a, b) = (timeline(dt, run_i)?, timeline(dt, run_j)?);
    let (t0, grid) = overlap_grid(a, b, interval)?;
    let times: Vec<f64> = match grid {
        Some(g) => g.times().collect(),
        None => vec![t0],
    };
    let stencils_a = times
        .iter()
        .map(|&t| a.stencil(t))
        .collect::<Result<Vec<_>>>()?;
    let mut best = f64::INFINITY;
    for tau in shift.shifts() {
        let mut sum = 0.0;
        for (sa, &t) in stencils_a.iter().zip(&times) {
            let tb = (t + tau).clamp(b.start(), b.end());
            sum += bilinear(&dt.matrix, sa, &b.stencil(tb)?);
        }
        best = best.min(sum / times.len() as f64);
    }
    Ok(best)
}

/// Default shift step for a pair: the finer of the two native resolutions.
pub fn default_tau_step(dt: &TimestepMatrix, run_i: usize, run_j: usize) -> Result<f64> {
    let step = timeline(dt, run_i)?
        .min_spacing()
        .min(timeline(dt, run_j)?.min_spacing());
    if step.is_finite() {
        Ok(step)
    } else {
        Err(Error::Invalid("both runs have a single timestep".into()))
    }
}

/// Run-level matrix using each pair's largest temporal overlap.
pub fn compute_run_matrix(
    dt: &TimestepMatrix,
    interval: Option<(f64, f64)>,
    shift: Option<&ShiftOptions>,
) -> Result<DistanceMatrix> {
    let n = dt.run_count();
    let rows = par::map_range(n, |i| {
        ((i + 1)..n)
            .map(|j| match shift {
                Some(s) if s.enabled => run_distance_shifted(dt, i, j, interval, s),
                _ => run_distance(dt, i, j, interval),
            })
            .collect::<Result<Vec<f64>>>()
    });
    let upper = rows.into_iter().collect::<Result<Vec<_>>>()?;
    let keys = dt.timelines.iter().map(|t| RowKey::run(t.name.clone())).collect();
    Ok(DistanceMatrix::from_upper(keys, upper))
}
