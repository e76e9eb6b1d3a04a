//! Metric MDS embeddings via SMACOF stress majorization: runs in similarity
//! space, timesteps as temporal curves, and parameter vectors.

mod smacof;

use std::collections::BTreeMap;

use serde::de::{MapAccess, Visitor};
use serde::ser::SerializeMap;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::clustering::{ClusterAssignment, GREY};
use crate::ensemble::Ensemble;
use crate::similarity::{DistanceMatrix, RowKey, TimestepMatrix};
use crate::{Error, Result};

pub use smacof::{classical_scaling, mds_embed, normalized_stress, smacof, MdsOptions, Smacof};

/// Embedded objects with their keys in input order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Embedding {
    pub dim: usize,
    /// Normalized stress-1 of the final configuration.
    pub stress: f64,
    #[serde(flatten)]
    pub points: Points,
}

/// Ordered `key -> coordinates` map; serialized as a JSON object in key order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Points {
    pub keys: Vec<String>,
    pub coords: Vec<Vec<f64>>,
}

impl Serialize for Points {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        #[derive(Serialize)]
        struct Wrapper<'a> {
            points: Inner<'a>,
        }
        struct Inner<'a>(&'a Points);
        impl Serialize for Inner<'_> {
            fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
                let mut map = s.serialize_map(Some(self.0.keys.len()))?;
                for (k, c) in self.0.keys.iter().zip(&self.0.coords) {
                    map.serialize_entry(k, c)?;
                }
                map.end()
            }
        }
        Wrapper { points: Inner(self) }.serialize(s)
    }
}

impl<'de> Deserialize<'de> for Points {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        struct Ordered(Points);
        impl<'de> Deserialize<'de> for Ordered {
            fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
                struct V;
                impl<'de> Visitor<'de> for V {
                    type Value = Points;
                    fn expecting(&self, f: &mut std::fmt::Formatter) -> std::fmt::Result {
                        f.write_str("a map of coordinate arrays")
                    }
                    fn visit_map<A: MapAccess<'de>>(
                        self,
                        mut map: A,
                    ) -> std::result::Result<Points, A::Error> {
                        let mut p = Points::default();
                        while let Some((k, v)) = map.next_entry::<String, Vec<f64>>()? {
                            p.keys.push(k);
                            p.coords.push(v);
                        }
                        Ok(p)
                    }
                }
                d.deserialize_map(V).map(Ordered)
            }
        }
        #[derive(Deserialize)]
        struct Wrapper {
            points: Ordered,
        }
        Wrapper::deserialize(d).map(|w| w.points.0)
    }
}

impl Embedding {
    pub fn len(&self) -> usize {
        self.points.keys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.keys.is_empty()
    }

    pub fn keys(&self) -> &[String] {
        &self.points.keys
    }

    pub fn coords(&self) -> &[Vec<f64>] {
        &self.points.coords
    }

    pub fn get(&self, key: &str) -> Option<&[f64]> {
        let i = self.points.keys.iter().position(|k| k == key)?;
        Some(&self.points.coords[i])
    }
}

fn from_matrix(d: &DistanceMatrix, opts: &MdsOptions) -> Result<Embedding> {
    let fit = mds_embed(d, opts)?;
    Ok(Embedding {
        dim: opts.dim,
        stress: fit.stress(),
        points: Points {
            keys: d.row_keys().iter().map(RowKey::label).collect(),
            coords: fit.points,
        },
    })
}

/// Embedding of any distance matrix in `dim` dimensions (1 to 3).
pub fn embed_matrix(d: &DistanceMatrix, dim: usize) -> Result<Embedding> {
    from_matrix(d, &MdsOptions::new(dim))
}

/// 2D embedding of the run-level matrix; one point per run.
pub fn similarity_embedding(dr: &DistanceMatrix) -> Result<Embedding> {
    from_matrix(dr, &MdsOptions::new(2))
}

/// Embedding of every parameter vector, using Euclidean distances between
/// per-axis min-max normalized parameters.
pub fn parameter_embedding(ensemble: &Ensemble) -> Result<Embedding> {
    let p = ensemble.normalized_parameters();
    let n = p.len();
    let mut entries = vec![0.0; n * n];
    for i in 0..n {
        for j in i + 1..n {
            let v = p[i]
                .iter()
                .zip(&p[j])
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            entries[i * n + j] = v;
            entries[j * n + i] = v;
        }
    }
    let keys = ensemble.runs().iter().map(|r| RowKey::run(r.name.clone())).collect();
    let d = DistanceMatrix::new_unchecked(keys, entries)?;
    from_matrix(&d, &MdsOptions::new(2))
}

/// One run's path through the timestep embedding.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Curve {
    pub run: String,
    pub times: Vec<f64>,
    pub points: Vec<Vec<f64>>,
}

impl Curve {
    /// `(t, coordinate)` pairs for 1D plots with time as the second axis.
    pub fn time_series(&self) -> Vec<[f64; 2]> {
        self.times
            .iter()
            .zip(&self.points)
            .map(|(&t, p)| [t, p[0]])
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TemporalCurves {
    pub dim: usize,
    pub stress: f64,
    /// Selected time interval; curve parts outside it are drawn dimmed.
    pub interval: Option<(f64, f64)>,
    pub curves: Vec<Curve>,
    /// `(t, coordinate)` pairs per run, present for 1D embeddings.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub series: Option<Vec<Vec<[f64; 2]>>>,
}

/// Embeds all timesteps of all runs and connects each run's points in time order.
pub fn temporal_evolution(
    dt: &TimestepMatrix,
    dim: usize,
    interval: Option<(f64, f64)>,
) -> Result<TemporalCurves> {
    let fit = mds_embed(dt.matrix(), &MdsOptions::new(dim))?;
    let curves: Vec<Curve> = dt
        .timelines()
        .iter()
        .map(|tl| Curve {
            run: tl.name.clone(),
            times: tl.times.clone(),
            points: fit.points[tl.offset..tl.offset + tl.times.len()].to_vec(),
        })
        .collect();
    let series = (dim == 1).then(|| curves.iter().map(Curve::time_series).collect());
    Ok(TemporalCurves {
        dim,
        stress: fit.stress(),
        interval,
        curves,
        series,
    })
}

/// Mean embedded position of each cluster, keyed by cluster id. Points are
/// matched to the assignment by position; grey runs are skipped.
pub fn barycenters(
    emb: &Embedding,
    assignment: &ClusterAssignment,
) -> Result<BTreeMap<u32, Vec<f64>>> {
    if assignment.labels.len() != emb.len() {
        return Err(Error::LengthMismatch {
            left: assignment.labels.len(),
            right: emb.len(),
        });
    }
    let mut sums: BTreeMap<u32, (Vec<f64>, usize)> = BTreeMap::new();
    for (&label, p) in assignment.labels.iter().zip(emb.coords()) {
        if label == GREY {
            continue;
        }
        let e = sums.entry(label).or_insert_with(|| (vec![0.0; emb.dim], 0));
        e.0.iter_mut().zip(p).for_each(|(s, x)| *s += x);
        e.1 += 1;
    }
    Ok(sums
        .into_iter()
        .map(|(k, (s, c))| (k, s.into_iter().map(|x| x / c as f64).collect()))
        .collect())
}
