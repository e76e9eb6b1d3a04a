use serde::{Deserialize, Serialize};

use super::prune::{components, ClusterAssignment, GREY};
use super::ClusterTree;
use crate::Result;

pub const GREY_HEX: &str = "#d3d3d3";

/// Qualitative ColorBrewer schemes. `Set1` (8 classes) is the default.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Palette {
    #[default]
    Set1,
    Set3,
    Paired,
}

impl Palette {
    pub fn colors(self) -> &'static [&'static str] {
        match self {
            Palette::Set1 => &[
                "#e41a1c", "#377eb8", "#4daf4a", "#984ea3", "#ff7f00", "#ffff33", "#a65628",
                "#f781bf",
            ],
            Palette::Set3 => &[
                "#8dd3c7", "#ffffb3", "#bebada", "#fb8072", "#80b1d3", "#fdb462", "#b3de69",
                "#fccde5", "#d9d9d9", "#bc80bd", "#ccebc5", "#ffed6f",
            ],
            Palette::Paired => &[
                "#a6cee3", "#1f78b4", "#b2df8a", "#33a02c", "#fb9a99", "#e31a1c", "#fdbf6f",
                "#ff7f00", "#cab2d6", "#6a3d9a", "#ffff99", "#b15928",
            ],
        }
    }

    pub fn len(self) -> usize {
        self.colors().len()
    }

    pub fn is_empty(self) -> bool {
        false
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColorAssignment {
    pub palette: Palette,
    /// Palette index per cluster id.
    pub colors: Vec<usize>,
}

impl ColorAssignment {
    pub fn hex(&self, cluster: u32) -> &'static str {
        if cluster == GREY {
            return GREY_HEX;
        }
        self.palette.colors()[self.colors[cluster as usize]]
    }
}

/// Walks the merges above the cut in decreasing merge order. The larger child (left on
/// ties) inherits the parent's color; the other child takes the next unused
/// palette color, or the parent's when none is left.
fn top_down(
    tree: &ClusterTree,
    start: usize,
    start_color: usize,
    cut_applied: usize,
    palette: Palette,
) -> Vec<Option<usize>> {
    let n = tree.leaf_count();
    let sizes = tree.subtree_sizes();
    let mut node_color: Vec<Option<usize>> = vec![None; 2 * n - 1];
    let mut used = vec![false; palette.len()];
    node_color[start] = Some(start_color);
    used[start_color] = true;
    // parents always carry a higher merge index than their children
    for m in (cut_applied..tree.merges.len()).rev() {
        let v = n + m;
        let Some(parent) = node_color[v] else {
            continue;
        };
        let (l, r) = (tree.merges[m].left(), tree.merges[m].right());
        let (keep, fresh) = if sizes[r] > sizes[l] { (r, l) } else { (l, r) };
        node_color[keep] = Some(parent);
        node_color[fresh] = Some(match used.iter().position(|&u| !u) {
            Some(c) => {
                used[c] = true;
                c
            }
            None => parent,
        });
    }
    node_color
}

fn finalize(
    assignment: &ClusterAssignment,
    node_color: &[Option<usize>],
    palette: Palette,
    previous: Option<(&ClusterAssignment, &ColorAssignment)>,
) -> ColorAssignment {
    let mut colors: Vec<usize> = assignment
        .nodes
        .iter()
        .map(|&node| node_color[node].expect("cluster nodes are colored"))
        .collect();
    let Some((prev_assign, prev_colors)) = previous else {
        return ColorAssignment { palette, colors };
    };
    if prev_colors.palette != palette {
        return ColorAssignment { palette, colors };
    }
    let prev_members = prev_assign.members();
    let members = assignment.members();
    let mut fixed = vec![false; colors.len()];
    let mut taken = vec![false; palette.len()];
    for (id, m) in members.iter().enumerate() {
        if let Some(pid) = prev_members.iter().position(|p| p == m) {
            colors[id] = prev_colors.colors[pid];
            fixed[id] = true;
            taken[colors[id]] = true;
        }
    }
    for id in 0..colors.len() {
        if fixed[id] {
            continue;
        }
        if taken[colors[id]] {
            if let Some(c) = taken.iter().position(|&t| !t) {
                colors[id] = c;
            }
        }
        taken[colors[id]] = true;
    }
    ColorAssignment { palette, colors }
}

/// Colors for a plain pruning of the whole tree. With `previous`, clusters whose
/// leaf sets are unchanged keep their earlier color.
pub fn assign_colors(
    tree: &ClusterTree,
    assignment: &ClusterAssignment,
    palette: Palette,
    previous: Option<(&ClusterAssignment, &ColorAssignment)>,
) -> ColorAssignment {
    let n = tree.leaf_count();
    let applied = tree.merges.len() - (assignment.cluster_count.max(1) - 1);
    let node_color = top_down(tree, tree.root(), 0, applied.min(n - 1), palette);
    finalize(assignment, &node_color, palette, previous)
}

/// Restricts the view to the sub-tree under `node`, pruned at `local_height`.
/// Runs outside are labelled [`GREY`]. The sub-tree root keeps the color its
/// cluster had in `previous`.
pub fn select_subtree(
    tree: &ClusterTree,
    node: usize,
    local_height: f64,
    palette: Palette,
    previous: Option<(&ClusterAssignment, &ColorAssignment)>,
) -> Result<(ClusterAssignment, ColorAssignment)> {
    tree.validate_node(node)?;
    let applied = tree
        .merges
        .iter()
        .take_while(|m| m.height() <= local_height)
        .count();
    let assignment = components(tree, applied, Some(node), local_height);
    let root_color = previous
        .and_then(|(pa, pc)| {
            let leaf = tree.leaves(node)[0];
            let id = pa.labels[leaf];
            (id != GREY && pc.palette == palette).then(|| pc.colors[id as usize])
        })
        .unwrap_or(0);
    let node_color = top_down(tree, node, root_color, applied, palette);
    Ok((
        assignment.clone(),
        finalize(&assignment, &node_color, palette, previous),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clustering::prune::{prune, prune_to_count};
    use crate::clustering::{Linkage, Merge};

    fn tree() -> ClusterTree {
        // ((0,1),(2,(3,4))) heights 0.1, 0.2, 0.5, 0.9
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
    fn single_cluster_gets_first_color() {
        let t = tree();
        let a = prune(&t, 2.0).unwrap();
        let c = assign_colors(&t, &a, Palette::Set1, None);
        assert_eq!(c.colors, vec![0]);
        assert_eq!(c.hex(0), "#e41a1c");
    }

    #[test]
    fn larger_child_keeps_parent_color() {
        let t = tree();
        let two = prune_to_count(&t, 2).unwrap();
        let c2 = assign_colors(&t, &two, Palette::Set1, None);
        // {0,1} vs {2,3,4}: the larger right child keeps color 0
        assert_eq!(c2.colors, vec![1, 0]);
        let three = prune_to_count(&t, 3).unwrap();
        let c3 = assign_colors(&t, &three, Palette::Set1, Some((&two, &c2)));
        // {2} splits off {3,4}; {3,4} is larger and keeps 0, {0,1} unchanged
        assert_eq!(three.members(), vec![vec![0, 1], vec![2], vec![3, 4]]);
        assert_eq!(c3.colors, vec![1, 2, 0]);
        assert_eq!(assign_colors(&t, &three, Palette::Set1, None), c3);
    }

    #[test]
    fn exhausted_palette_shares_colors() {
        // 14 leaves chained so every cut is a single split
        let n = 14;
        let mut merges = vec![Merge(0, 1, 1.0)];
        for k in 2..n {
            merges.push(Merge(k, n + k - 2, k as f64));
        }
        let t = ClusterTree {
            linkage: Linkage::Single,
            merges,
        };
        let a = prune(&t, 0.5).unwrap();
        assert_eq!(a.cluster_count, 14);
        let c = assign_colors(&t, &a, Palette::Paired, None);
        let mut distinct = c.colors.clone();
        distinct.sort_unstable();
        distinct.dedup();
        assert_eq!(distinct.len(), 12);
    }

    #[test]
    fn subtree_selection() {
        let t = tree();
        let full = prune(&t, 0.3).unwrap();
        let colors = assign_colors(&t, &full, Palette::Set1, None);
        let (root_sel, root_colors) = select_subtree(&t, t.root(), 0.3, Palette::Set1, None).unwrap();
        assert_eq!(root_sel, full);
        assert_eq!(root_colors, colors);

        let (leaf_sel, leaf_colors) = select_subtree(&t, 2, 0.0, Palette::Set1, None).unwrap();
        assert_eq!(leaf_sel.labels, vec![GREY, GREY, 0, GREY, GREY]);
        assert_eq!(leaf_colors.hex(GREY), GREY_HEX);

        // select {2,3,4} (node 7) from a 2-clustering and split it once
        let two = prune_to_count(&t, 2).unwrap();
        let c2 = assign_colors(&t, &two, Palette::Set1, None);
        let (sub, sub_colors) = select_subtree(&t, 7, 0.3, Palette::Set1, Some((&two, &c2))).unwrap();
        assert_eq!(sub.labels, vec![GREY, GREY, 0, 1, 1]);
        // {3,4} is the larger child and keeps the selected cluster's color
        assert_eq!(sub_colors.colors[1], c2.colors[1]);
        assert_ne!(sub_colors.colors[0], sub_colors.colors[1]);
    }
}
