use serde::{Deserialize, Serialize};

use super::ClusterTree;
use crate::{Error, Result};

/// Label of runs outside a selected sub-tree.
pub const GREY: u32 = u32::MAX;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ClusterAssignment {
    pub pruning_height: f64,
    pub cluster_count: usize,
    /// Cluster id per leaf; [`GREY`] for unselected leaves.
    pub labels: Vec<u32>,
    /// Tree node at the top of each cluster, indexed by cluster id.
    pub nodes: Vec<usize>,
}

impl ClusterAssignment {
    /// Leaves of each cluster, ascending.
    pub fn members(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.cluster_count];
        for (leaf, &l) in self.labels.iter().enumerate() {
            if l != GREY {
                out[l as usize].push(leaf);
            }
        }
        out
    }
}

/// Applies the first `applied` merges restricted to `within` (all merges when
/// `None`) and numbers the resulting components by their smallest leaf.
pub(super) fn components(
    tree: &ClusterTree,
    applied: usize,
    within: Option<usize>,
    pruning_height: f64,
) -> ClusterAssignment {
    let n = tree.leaf_count();
    let scope: Option<Vec<bool>> = within.map(|node| {
        let mut mask = vec![false; 2 * n - 1];
        let mut stack = vec![node];
        while let Some(v) = stack.pop() {
            mask[v] = true;
            if let Some((l, r)) = tree.children(v) {
                stack.push(l);
                stack.push(r);
            }
        }
        mask
    });
    let in_scope = |node: usize| scope.as_ref().is_none_or(|m| m[node]);

    let mut parent: Vec<usize> = (0..2 * n - 1).collect();
    for (m, merge) in tree.merges.iter().enumerate().take(applied) {
        if in_scope(n + m) {
            parent[merge.left()] = n + m;
            parent[merge.right()] = n + m;
        }
    }
    let top: Vec<usize> = (0..n)
        .map(|leaf| {
            let mut v = leaf;
            while parent[v] != v {
                v = parent[v];
            }
            v
        })
        .collect();

    let mut labels = vec![GREY; n];
    let mut nodes: Vec<usize> = Vec::new();
    for leaf in 0..n {
        if !in_scope(leaf) {
            continue;
        }
        let id = match nodes.iter().position(|&node| node == top[leaf]) {
            Some(id) => id,
            None => {
                nodes.push(top[leaf]);
                nodes.len() - 1
            }
        };
        labels[leaf] = id as u32;
    }
    ClusterAssignment {
        pruning_height,
        cluster_count: nodes.len(),
        labels,
        nodes,
    }
}

/// Cuts the tree at `height`: merges at or below it are kept.
pub fn prune(tree: &ClusterTree, height: f64) -> Result<ClusterAssignment> {
    if !(height >= 0.0) {
        return Err(Error::Invalid(format!("pruning height must be >= 0, got {height}")));
    }
    let applied = tree.merges.iter().take_while(|m| m.height() <= height).count();
    Ok(components(tree, applied, None, height))
}

/// Cuts the tree into `count` clusters by keeping the first `n - count` merges.
/// The reported height lies midway between the last kept and first cut merge.
pub fn prune_to_count(tree: &ClusterTree, count: usize) -> Result<ClusterAssignment> {
    let n = tree.leaf_count();
    if count == 0 || count > n {
        return Err(Error::Invalid(format!("cluster count must be in 1..={n}, got {count}")));
    }
    let applied = n - count;
    let height = match (applied.checked_sub(1), tree.merges.get(applied)) {
        (Some(last), Some(next)) => 0.5 * (tree.merges[last].height() + next.height()),
        (None, Some(next)) => 0.5 * next.height(),
        (Some(last), None) => tree.merges[last].height(),
        (None, None) => 0.0,
    };
    Ok(components(tree, applied, None, height))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clustering::{Linkage, Merge};

    /// ((0,1),(2,(3,4))) with heights 0.1, 0.2, 0.5, 0.9
    pub(crate) fn five_leaf_tree() -> ClusterTree {
        ClusterTree {
            linkage: Linkage::Complete,
            merges: vec![
                Merge(0, 1, 0.1),
                Merge(3, 4, 0.2),
                Merge(2, 6, 0.5),
                Merge(5, 7, 0.9),
            ],
        }
    }

    #[test]
    fn extremes() {
        let t = five_leaf_tree();
        let all = prune(&t, 1.0).unwrap();
        assert_eq!(all.cluster_count, 1);
        assert_eq!(all.nodes, vec![8]);
        let none = prune(&t, 0.05).unwrap();
        assert_eq!(none.cluster_count, 5);
        assert_eq!(none.labels, vec![0, 1, 2, 3, 4]);
    }

    #[test]
    fn intermediate_cut() {
        let t = five_leaf_tree();
        let a = prune(&t, 0.3).unwrap();
        assert_eq!(a.labels, vec![0, 0, 1, 2, 2]);
        assert_eq!(a.nodes, vec![5, 2, 6]);
        assert_eq!(a.members(), vec![vec![0, 1], vec![2], vec![3, 4]]);
        let b = prune_to_count(&t, 2).unwrap();
        assert_eq!(b.labels, vec![0, 0, 1, 1, 1]);
        assert!((b.pruning_height - 0.7).abs() < 1e-15);
        assert_eq!(prune(&t, b.pruning_height).unwrap().labels, b.labels);
    }

    #[test]
    fn count_is_a_step_function_of_height() {
        let t = five_leaf_tree();
        let mut last = usize::MAX;
        for k in 0..=110 {
            let c = prune(&t, k as f64 / 100.0).unwrap().cluster_count;
            assert!(c <= last);
            last = c;
        }
        assert!(prune(&t, -1.0).is_err());
        assert!(prune_to_count(&t, 0).is_err());
        assert!(prune_to_count(&t, 6).is_err());
    }
}
