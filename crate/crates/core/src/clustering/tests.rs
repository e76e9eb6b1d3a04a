use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::similarity::RowKey;

fn matrix(n: usize, f: impl Fn(usize, usize) -> f64) -> DistanceMatrix {
    let mut e = vec![0.0; n * n];
    for i in 0..n {
        for j in i + 1..n {
            e[i * n + j] = f(i, j);
            e[j * n + i] = f(i, j);
        }
    }
    let keys = (0..n).map(|i| RowKey::run(format!("r{i}"))).collect();
    DistanceMatrix::new(keys, e).unwrap()
}

fn random_matrix(n: usize, seed: u64) -> DistanceMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let vals: Vec<f64> = (0..n * n).map(|_| rng.random::<f64>()).collect();
    matrix(n, |i, j| vals[i * n + j])
}

/// Naive reference: full scan for the closest active pair at every step and a
/// fresh cluster table on each merge.
fn naive(d: &DistanceMatrix, linkage: Linkage) -> Vec<(usize, usize, f64)> {
    let n = d.len();
    let square = linkage == Linkage::WardD2;
    // clusters as (node id, size) in slots; distances in a nested vector
    let mut dist: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| if square { d.get(i, j).powi(2) } else { d.get(i, j) })
                .collect()
        })
        .collect();
    let mut slots: Vec<Option<(usize, usize)>> = (0..n).map(|i| Some((i, 1))).collect();
    let mut out = Vec::new();
    for step in 0..n - 1 {
        let mut best: Option<(usize, usize)> = None;
        for i in 0..n {
            for j in i + 1..n {
                if slots[i].is_none() || slots[j].is_none() {
                    continue;
                }
                if best.is_none_or(|(a, b)| dist[i][j] < dist[a][b]) {
                    best = Some((i, j));
                }
            }
        }
        let (i, j) = best.unwrap();
        let ((id_i, ni), (id_j, nj)) = (slots[i].unwrap(), slots[j].unwrap());
        let dij = dist[i][j];
        for k in 0..n {
            let Some((_, nk)) = slots[k] else { continue };
            if k == i || k == j {
                continue;
            }
            let (a, b) = (dist[k][i], dist[k][j]);
            let (ni, nj, nk) = (ni as f64, nj as f64, nk as f64);
            let v = match linkage {
                Linkage::Single => a.min(b),
                Linkage::Complete => a.max(b),
                Linkage::Upgma => (ni * a + nj * b) / (ni + nj),
                Linkage::Wpgma => (a + b) / 2.0,
                Linkage::WardD | Linkage::WardD2 => {
                    let t = ni + nj + nk;
                    (ni + nk) / t * a + (nj + nk) / t * b - nk / t * dij
                }
            };
            dist[k][i] = v;
            dist[i][k] = v;
        }
        let h = if square { dij.sqrt() } else { dij };
        out.push((id_i.min(id_j), id_i.max(id_j), h));
        slots[i] = Some((n + step, ni + nj));
        slots[j] = None;
    }
    out
}

fn assert_matches_naive(d: &DistanceMatrix, linkage: Linkage) {
    let tree = hierarchical_cluster(d, linkage).unwrap();
    let reference = naive(d, linkage);
    assert_eq!(tree.merges.len(), reference.len());
    for (m, r) in tree.merges.iter().zip(&reference) {
        assert_eq!((m.left(), m.right()), (r.0, r.1), "{linkage}");
        assert!((m.height() - r.2).abs() < 1e-12, "{linkage}: {} vs {}", m.height(), r.2);
    }
}

#[test]
fn two_points_merge_at_their_distance() {
    let d = matrix(2, |_, _| 0.42);
    for linkage in Linkage::ALL {
        let t = hierarchical_cluster(&d, linkage).unwrap();
        assert_eq!(t.merges, vec![Merge(0, 1, 0.42)], "{linkage}");
    }
}

#[test]
fn single_linkage_merges_closest_pair_first() {
    let d = matrix(3, |i, j| if (i, j) == (1, 2) { 0.1 } else { 0.5 });
    let t = hierarchical_cluster(&d, Linkage::Single).unwrap();
    assert_eq!(t.merges[0], Merge(1, 2, 0.1));
    assert_eq!(t.merges[1], Merge(0, 3, 0.5));
}

#[test]
fn six_point_fixture_matches_reference() {
    let pts: [(f64, f64); 6] = [(0.0, 0.0), (0.1, 0.05), (0.5, 0.5), (0.55, 0.45), (0.9, 0.1), (0.2, 0.8)];
    let d = matrix(6, |i, j| {
        let (a, b) = (pts[i], pts[j]);
        ((a.0 - b.0).powi(2) + (a.1 - b.1).powi(2)).sqrt() / 2.0
    });
    for linkage in Linkage::ALL {
        assert_matches_naive(&d, linkage);
    }
}

#[test]
fn ties_break_toward_smallest_pair() {
    let d = matrix(4, |_, _| 0.5);
    let t = hierarchical_cluster(&d, Linkage::Complete).unwrap();
    assert_eq!(t.merges[0], Merge(0, 1, 0.5));
    assert_eq!(t.merges[1], Merge(2, 4, 0.5));
    assert_eq!(t.merges[2], Merge(3, 5, 0.5));
}

#[test]
fn rejects_nan() {
    let keys = vec![RowKey::run("a"), RowKey::run("b")];
    let d = DistanceMatrix::new_unchecked(keys, vec![0.0, f64::NAN, f64::NAN, 0.0]).unwrap();
    assert!(matches!(
        hierarchical_cluster(&d, Linkage::Single),
        Err(Error::NonFinite(_))
    ));
}

#[test]
fn linkage_names_round_trip() {
    for linkage in Linkage::ALL {
        assert_eq!(linkage.name().parse::<Linkage>().unwrap(), linkage);
        let json = serde_json::to_string(&linkage).unwrap();
        assert_eq!(json, format!("\"{}\"", linkage.name()));
    }
    assert!("centroid".parse::<Linkage>().is_err());
}

#[test]
fn tree_json_layout() {
    let d = matrix(3, |i, j| if (i, j) == (0, 1) { 0.25 } else { 0.5 });
    let t = hierarchical_cluster(&d, Linkage::WardD).unwrap();
    let json = serde_json::to_value(&t).unwrap();
    assert_eq!(json["linkage"], "ward.D");
    assert_eq!(json["merges"][0], serde_json::json!([0, 1, 0.25]));
    assert_eq!(json["merges"][1][1], 3);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn heights_are_monotone(n in 2usize..50, seed in any::<u64>()) {
        let d = random_matrix(n, seed);
        for linkage in Linkage::ALL {
            let t = hierarchical_cluster(&d, linkage).unwrap();
            prop_assert_eq!(t.merges.len(), n - 1);
            for w in t.merges.windows(2) {
                prop_assert!(w[1].height() >= w[0].height() - 1e-12, "{}", linkage);
            }
        }
    }

    #[test]
    fn matches_reference_on_random_matrices(n in 2usize..14, seed in any::<u64>()) {
        let d = random_matrix(n, seed);
        for linkage in Linkage::ALL {
            assert_matches_naive(&d, linkage);
        }
    }

    #[test]
    fn leaf_permutation_preserves_structure(n in 3usize..20, seed in any::<u64>()) {
        let d = random_matrix(n, seed);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 1);
        let mut perm: Vec<usize> = (0..n).collect();
        for i in (1..n).rev() {
            perm.swap(i, rng.random_range(0..=i));
        }
        let pd = matrix(n, |i, j| d.get(perm[i], perm[j]));
        for linkage in Linkage::ALL {
            let a = hierarchical_cluster(&d, linkage).unwrap();
            let b = hierarchical_cluster(&pd, linkage).unwrap();
            // same cluster structure: leaf sets per merge agree after mapping
            for (ma, mb) in a.merges.iter().zip(&b.merges) {
                prop_assert!((ma.height() - mb.height()).abs() < 1e-12);
            }
            for k in 1..=n {
                let pa = prune_to_count(&a, k).unwrap().members();
                let mut pb: Vec<Vec<usize>> = prune_to_count(&b, k)
                    .unwrap()
                    .members()
                    .into_iter()
                    .map(|m| {
                        let mut v: Vec<usize> = m.into_iter().map(|i| perm[i]).collect();
                        v.sort_unstable();
                        v
                    })
                    .collect();
                pb.sort();
                let mut pa = pa;
                pa.sort();
                prop_assert_eq!(pa, pb);
            }
        }
    }

    #[test]
    fn single_split_refinement_keeps_other_colors(n in 3usize..30, seed in any::<u64>()) {
        let d = random_matrix(n, seed);
        let t = hierarchical_cluster(&d, Linkage::WardD2).unwrap();
        for k in 1..n.min(8) {
            let coarse = prune_to_count(&t, k).unwrap();
            let fine = prune_to_count(&t, k + 1).unwrap();
            let cc = assign_colors(&t, &coarse, Palette::Set1, None);
            let cf = assign_colors(&t, &fine, Palette::Set1, Some((&coarse, &cc)));
            let coarse_members = coarse.members();
            for (id, m) in fine.members().iter().enumerate() {
                if let Some(pid) = coarse_members.iter().position(|p| p == m) {
                    prop_assert_eq!(cf.colors[id], cc.colors[pid]);
                }
            }
            // the split cluster's larger part keeps its color
            let split: Vec<usize> = (0..coarse.cluster_count)
                .filter(|&c| !fine.members().contains(&coarse_members[c]))
                .collect();
            prop_assert_eq!(split.len(), 1);
            let parent_color = cc.colors[split[0]];
            prop_assert!(cf.colors.contains(&parent_color));
        }
    }
}
