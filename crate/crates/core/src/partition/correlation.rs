//! Ranking parameters by their correlation with the dominant direction of the
//! similarity embedding.

use serde::{Deserialize, Serialize};

use crate::embedding::Embedding;
use crate::ensemble::Ensemble;
use crate::linalg::symmetric_eigen;
use crate::metrics::pearson;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterCorrelation {
    pub parameter: String,
    /// Pearson coefficient in `[-1, 1]`.
    pub coefficient: f64,
    /// Set when the coefficient is undefined (zero variance or too few runs) and reported as 0.
    pub degenerate: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationResult {
    /// One entry per parameter, in ensemble order.
    pub parameters: Vec<ParameterCorrelation>,
    /// Parameter indices by decreasing `|coefficient|`; ties keep ensemble order.
    pub ranking: Vec<usize>,
    /// Fewer than 3 runs.
    pub degenerate: bool,
}

/// Coordinates of the embedded points along the principal axis of their
/// covariance, in embedding order.
pub fn principal_coordinates(emb: &Embedding) -> Vec<f64> {
    let pts = emb.coords();
    let dim = emb.dim;
    if pts.is_empty() || dim == 0 {
        return vec![0.0; pts.len()];
    }
    let n = pts.len() as f64;
    let mean: Vec<f64> = (0..dim).map(|k| pts.iter().map(|p| p[k]).sum::<f64>() / n).collect();
    let mut cov = vec![0.0; dim * dim];
    for p in pts {
        for a in 0..dim {
            for b in 0..dim {
                cov[a * dim + b] += (p[a] - mean[a]) * (p[b] - mean[b]);
            }
        }
    }
    let (_, vecs) = symmetric_eigen(&cov, dim);
    let axis = &vecs[0];
    pts.iter()
        .map(|p| (0..dim).map(|k| (p[k] - mean[k]) * axis[k]).sum())
        .collect()
}

/// Pearson correlation of each parameter with the embedding's principal coordinate.
pub fn correlation_ranking(ensemble: &Ensemble, sim_emb: &Embedding) -> Result<CorrelationResult> {
    let v_all = principal_coordinates(sim_emb);
    let v: Vec<f64> = ensemble
        .runs()
        .iter()
        .map(|r| {
            sim_emb
                .keys()
                .iter()
                .position(|k| *k == r.name)
                .map(|i| v_all[i])
                .ok_or_else(|| Error::Invalid(format!("run {:?} is missing from the embedding", r.name)))
        })
        .collect::<Result<_>>()?;
    let degenerate = v.len() < 3;
    let parameters: Vec<ParameterCorrelation> = ensemble
        .parameter_names()
        .iter()
        .enumerate()
        .map(|(k, name)| {
            let p: Vec<f64> = ensemble.runs().iter().map(|r| r.parameters[k]).collect();
            let c = if degenerate { None } else { pearson(&p, &v) };
            ParameterCorrelation {
                parameter: name.clone(),
                coefficient: c.unwrap_or(0.0),
                degenerate: c.is_none(),
            }
        })
        .collect();
    let mut ranking: Vec<usize> = (0..parameters.len()).collect();
    ranking.sort_by(|&a, &b| {
        parameters[b]
            .coefficient
            .abs()
            .total_cmp(&parameters[a].coefficient.abs())
            .then(a.cmp(&b))
    });
    Ok(CorrelationResult {
        parameters,
        ranking,
        degenerate,
    })
}
