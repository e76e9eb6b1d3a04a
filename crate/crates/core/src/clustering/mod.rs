//! Agglomerative hierarchical clustering with Lance-Williams updates, pruning,
//! sub-tree selection and top-down color assignment.

mod colors;
mod prune;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::similarity::DistanceMatrix;
use crate::{Error, Result};

pub use colors::{assign_colors, select_subtree, ColorAssignment, Palette, GREY_HEX};
pub use prune::{prune, prune_to_count, ClusterAssignment, GREY};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Linkage {
    /// Ward's update applied to the distances as given.
    #[serde(rename = "ward.D")]
    WardD,
    /// Ward's update on squared distances; heights are reported unsquared.
    #[serde(rename = "ward.D2")]
    WardD2,
    #[serde(rename = "single")]
    Single,
    #[serde(rename = "complete")]
    Complete,
    #[serde(rename = "UPGMA")]
    Upgma,
    #[serde(rename = "WPGMA")]
    Wpgma,
}

impl Linkage {
    pub const ALL: [Linkage; 6] = [
        Linkage::WardD,
        Linkage::WardD2,
        Linkage::Single,
        Linkage::Complete,
        Linkage::Upgma,
        Linkage::Wpgma,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Linkage::WardD => "ward.D",
            Linkage::WardD2 => "ward.D2",
            Linkage::Single => "single",
            Linkage::Complete => "complete",
            Linkage::Upgma => "UPGMA",
            Linkage::Wpgma => "WPGMA",
        }
    }

    /// Distance from cluster `k` to the union of `i` and `j`.
    #[inline]
    fn update(self, d_ki: f64, d_kj: f64, d_ij: f64, n_i: f64, n_j: f64, n_k: f64) -> f64 {
        match self {
            Linkage::Single => d_ki.min(d_kj),
            Linkage::Complete => d_ki.max(d_kj),
            Linkage::Upgma => (n_i * d_ki + n_j * d_kj) / (n_i + n_j),
            Linkage::Wpgma => 0.5 * (d_ki + d_kj),
            Linkage::WardD | Linkage::WardD2 => {
                ((n_i + n_k) * d_ki + (n_j + n_k) * d_kj - n_k * d_ij) / (n_i + n_j + n_k)
            }
        }
    }
}

impl fmt::Display for Linkage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Linkage {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.to_ascii_lowercase().as_str() {
            "ward.d" | "ward" => Linkage::WardD,
            "ward.d2" => Linkage::WardD2,
            "single" => Linkage::Single,
            "complete" => Linkage::Complete,
            "upgma" | "average" => Linkage::Upgma,
            "wpgma" | "mcquitty" => Linkage::Wpgma,
            _ => return Err(Error::Invalid(format!("unknown linkage {s:?}"))),
        })
    }
}

/// One agglomeration step: `[left, right, height]`. Ids below the leaf count
/// are leaves; id `n + m` is the cluster formed by merge `m`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Merge(pub usize, pub usize, pub f64);

impl Merge {
    pub fn left(&self) -> usize {
        self.0
    }

    pub fn right(&self) -> usize {
        self.1
    }

    pub fn height(&self) -> f64 {
        self.2
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterTree {
    pub linkage: Linkage,
    pub merges: Vec<Merge>,
}

impl ClusterTree {
    pub fn leaf_count(&self) -> usize {
        self.merges.len() + 1
    }

    pub fn root(&self) -> usize {
        2 * self.merges.len()
    }

    pub fn is_leaf(&self, node: usize) -> bool {
        node < self.leaf_count()
    }

    pub fn children(&self, node: usize) -> Option<(usize, usize)> {
        let n = self.leaf_count();
        self.merges
            .get(node.checked_sub(n)?)
            .map(|m| (m.left(), m.right()))
    }

    /// Height of a node; leaves sit at 0.
    pub fn height(&self, node: usize) -> f64 {
        let n = self.leaf_count();
        if node < n {
            0.0
        } else {
            self.merges[node - n].height()
        }
    }

    /// Leaf count below each node, indexed by node id.
    pub fn subtree_sizes(&self) -> Vec<usize> {
        let n = self.leaf_count();
        let mut sizes = vec![1; 2 * n - 1];
        for (m, merge) in self.merges.iter().enumerate() {
            sizes[n + m] = sizes[merge.left()] + sizes[merge.right()];
        }
        sizes
    }

    /// Leaves below `node` in ascending order.
    pub fn leaves(&self, node: usize) -> Vec<usize> {
        let mut out = Vec::new();
        let mut stack = vec![node];
        while let Some(v) = stack.pop() {
            match self.children(v) {
                Some((l, r)) => {
                    stack.push(l);
                    stack.push(r);
                }
                None => out.push(v),
            }
        }
        out.sort_unstable();
        out
    }

    pub fn validate_node(&self, node: usize) -> Result<()> {
        if node <= self.root() {
            Ok(())
        } else {
            Err(Error::Invalid(format!("node {node} is not in the tree")))
        }
    }
}

/// Agglomerates the matrix rows bottom-up. Ties on equal distance go to the
/// lexicographically smallest pair of cluster slots; a merged cluster takes
/// the smaller slot.
pub fn hierarchical_cluster(dr: &DistanceMatrix, linkage: Linkage) -> Result<ClusterTree> {
    let n = dr.len();
    if n < 2 {
        return Err(Error::Invalid("clustering needs at least 2 objects".into()));
    }
    if dr.entries().iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("distance matrix"));
    }
    let mut d: Vec<f64> = match linkage {
        Linkage::WardD2 => dr.entries().iter().map(|v| v * v).collect(),
        _ => dr.entries().to_vec(),
    };
    let mut active = vec![true; n];
    let mut size = vec![1usize; n];
    let mut node: Vec<usize> = (0..n).collect();
    let mut nn = vec![usize::MAX; n];
    let mut nn_dist = vec![f64::INFINITY; n];

    let nearest = |d: &[f64], active: &[bool], i: usize| -> (usize, f64) {
        let mut best = (usize::MAX, f64::INFINITY);
        for j in i + 1..n {
            if active[j] && d[i * n + j] < best.1 {
                best = (j, d[i * n + j]);
            }
        }
        best
    };
    for i in 0..n {
        (nn[i], nn_dist[i]) = nearest(&d, &active, i);
    }

    let mut merges = Vec::with_capacity(n - 1);
    for step in 0..n - 1 {
        let mut i = usize::MAX;
        let mut best = f64::INFINITY;
        for k in 0..n {
            if active[k] && nn[k] != usize::MAX && (i == usize::MAX || nn_dist[k] < best) {
                i = k;
                best = nn_dist[k];
            }
        }
        let j = nn[i];
        let d_ij = d[i * n + j];
        let (n_i, n_j) = (size[i] as f64, size[j] as f64);
        for k in 0..n {
            if !active[k] || k == i || k == j {
                continue;
            }
            let v = linkage.update(d[k * n + i], d[k * n + j], d_ij, n_i, n_j, size[k] as f64);
            d[k * n + i] = v;
            d[i * n + k] = v;
        }
        let height = match linkage {
            Linkage::WardD2 => d_ij.max(0.0).sqrt(),
            _ => d_ij,
        };
        let (a, b) = (node[i].min(node[j]), node[i].max(node[j]));
        merges.push(Merge(a, b, height));
        node[i] = n + step;
        size[i] += size[j];
        active[j] = false;
        nn[j] = usize::MAX;

        (nn[i], nn_dist[i]) = nearest(&d, &active, i);
        for k in 0..i {
            if !active[k] {
                continue;
            }
            if nn[k] == i || nn[k] == j {
                (nn[k], nn_dist[k]) = nearest(&d, &active, k);
            } else {
                let v = d[k * n + i];
                if v < nn_dist[k] || (v == nn_dist[k] && i < nn[k]) {
                    nn[k] = i;
                    nn_dist[k] = v;
                }
            }
        }
        for k in i + 1..j {
            if active[k] && nn[k] == j {
                (nn[k], nn_dist[k]) = nearest(&d, &active, k);
            }
        }
    }
    Ok(ClusterTree { linkage, merges })
}

#[cfg(test)]
mod tests;
