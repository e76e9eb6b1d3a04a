use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Ensemble, ScalarField};
use crate::{Error, Result};

/// Monte Carlo samples of one normalized field, one component per seed point.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleVector(Vec<f64>);

impl SampleVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::Invalid("sample vector components must lie in [0, 1]".into()));
        }
        Ok(Self(values))
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Affine rescaling of every field using the global min/max over all runs.
pub fn normalize_fields(mut ensemble: Ensemble) -> Ensemble {
    let (lo, hi) = ensemble
        .runs()
        .iter()
        .flat_map(|r| &r.timesteps)
        .flat_map(|s| s.field.values())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v as f64), hi.max(v as f64))
        });
    let span = hi - lo;
    for run in ensemble.runs_mut() {
        for step in &mut run.timesteps {
            for v in step.field.values_mut() {
                *v = if span > 0.0 {
                    (((*v as f64) - lo) / span).clamp(0.0, 1.0) as f32
                } else {
                    0.0
                };
            }
        }
    }
    ensemble
}

/// Uniform seed positions over the field domain, in grid-index coordinates.
pub fn draw_seeds(dims: &[usize], count: usize, rng_seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    (0..count)
        .map(|_| {
            dims.iter()
                .map(|&d| rng.random::<f64>() * (d - 1) as f64)
                .collect()
        })
        .collect()
}

/// Multilinear interpolation of the field at each seed position.
pub fn sample_field(field: &ScalarField, seeds: &[Vec<f64>]) -> Result<SampleVector> {
    let dims = field.dims();
    let mut out = Vec::with_capacity(seeds.len());
    let mut base = vec![0usize; dims.len()];
    let mut frac = vec![0f64; dims.len()];
    let mut node = vec![0usize; dims.len()];
    for seed in seeds {
        if seed.len() != dims.len() {
            return Err(Error::LengthMismatch {
                left: seed.len(),
                right: dims.len(),
            });
        }
        for (k, (&x, &extent)) in seed.iter().zip(dims).enumerate() {
            let upper = (extent - 1) as f64;
            if !(0.0..=upper).contains(&x) {
                return Err(Error::SeedOutOfDomain(seed.clone()));
            }
            // the last node belongs to the cell below it so that base + 1 stays in range
            let b = (x.floor() as usize).min(extent.saturating_sub(2));
            base[k] = b;
            frac[k] = x - b as f64;
        }
        let mut value = 0.0;
        for corner in 0..(1usize << dims.len()) {
            let mut weight = 1.0;
            for k in 0..dims.len() {
                let hi = corner >> k & 1 == 1;
                if dims[k] == 1 {
                    if hi {
                        weight = 0.0;
                    }
                    node[k] = 0;
                    continue;
                }
                node[k] = base[k] + hi as usize;
                weight *= if hi { frac[k] } else { 1.0 - frac[k] };
            }
            if weight != 0.0 {
                value += weight * field.values()[field.index(&node)] as f64;
            }
        }
        out.push(value.clamp(0.0, 1.0));
    }
    Ok(SampleVector(out))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensemble::{Run, Timestep};

    fn ensemble_of(fields: Vec<Vec<f32>>) -> Ensemble {
        let runs = fields
            .into_iter()
            .enumerate()
            .map(|(i, values)| Run {
                name: format!("r{i}"),
                parameters: vec![i as f64],
                timesteps: vec![Timestep {
                    t: 0.0,
                    field: ScalarField::new(vec![1, values.len()], values).unwrap(),
                }],
            })
            .collect();
        Ensemble::new(vec!["p".into()], runs).unwrap()
    }

    fn values(e: &Ensemble) -> Vec<Vec<f32>> {
        e.runs()
            .iter()
            .map(|r| r.timesteps[0].field.values().to_vec())
            .collect()
    }

    #[test]
    fn normalization_is_global_affine() {
        let e = normalize_fields(ensemble_of(vec![vec![0.0, 5.0], vec![10.0, 10.0]]));
        assert_eq!(values(&e), vec![vec![0.0, 0.5], vec![1.0, 1.0]]);
        // disjoint ranges share the global scale
        let e = normalize_fields(ensemble_of(vec![vec![0.0, 1.0], vec![3.0, 4.0]]));
        assert_eq!(values(&e), vec![vec![0.0, 0.25], vec![0.75, 1.0]]);
    }

    #[test]
    fn constant_ensemble_maps_to_zero() {
        let e = normalize_fields(ensemble_of(vec![vec![7.0, 7.0], vec![7.0, 7.0]]));
        assert_eq!(values(&e), vec![vec![0.0, 0.0], vec![0.0, 0.0]]);
    }

    #[test]
    fn interpolation_identities() {
        let f = ScalarField::new(vec![2, 2], vec![0.0, 0.0, 1.0, 1.0]).unwrap();
        let s = sample_field(&f, &[vec![0.5, 0.5], vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        assert_eq!(s.values(), &[0.5, 1.0, 0.0]);
        let g = ScalarField::new(vec![3, 3], (0..9).map(|v| v as f32 / 8.0).collect()).unwrap();
        let s = sample_field(&g, &[vec![1.0, 2.0], vec![2.0, 2.0]]).unwrap();
        assert_eq!(s.values(), &[5.0 / 8.0, 1.0]);
    }

    #[test]
    fn trilinear_on_3d_field() {
        let values: Vec<f32> = (0..8).map(|v| (v & 1) as f32).collect();
        let f = ScalarField::new(vec![2, 2, 2], values).unwrap();
        let s = sample_field(&f, &[vec![0.3, 0.9, 0.25]]).unwrap();
        assert!((s.values()[0] - 0.25).abs() < 1e-12);
    }

    #[test]
    fn out_of_domain_seed_is_rejected() {
        let f = ScalarField::new(vec![2, 2], vec![0.0; 4]).unwrap();
        assert!(matches!(
            sample_field(&f, &[vec![1.5, 0.0]]),
            Err(Error::SeedOutOfDomain(_))
        ));
    }

    #[test]
    fn seeds_are_deterministic_and_in_domain() {
        let a = draw_seeds(&[128, 128, 128], 32768, 9);
        assert_eq!(a, draw_seeds(&[128, 128, 128], 32768, 9));
        assert!(a.iter().flatten().all(|&x| (0.0..=127.0).contains(&x)));
        let f = ScalarField::new(vec![128, 128, 128], vec![0.5; 128 * 128 * 128]).unwrap();
        assert_eq!(sample_field(&f, &a).unwrap().len(), 32768);
    }
}
