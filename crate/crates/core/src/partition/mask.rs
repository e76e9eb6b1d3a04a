//! Boundary projection masks: where a segment occurs along other parameter
//! axes, projected onto a slice and combined by Boolean expressions.

use serde::{Deserialize, Serialize};

use super::expr::ProjectionExpr;
use super::grid::LabelGrid;
use crate::{Error, Result};

/// Boolean image aligned with a slice: `width` nodes along the first slice
/// axis, `height` along the second, stored with the first axis slowest.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BinaryMask {
    pub width: usize,
    pub height: usize,
    #[serde(with = "bits")]
    pub data: Vec<bool>,
}

mod bits {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &[bool], s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq(v.iter().map(|&b| b as u8))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<bool>, D::Error> {
        Ok(Vec::<u8>::deserialize(d)?.into_iter().map(|b| b != 0).collect())
    }
}

impl BinaryMask {
    pub fn get(&self, x: usize, y: usize) -> bool {
        self.data[x * self.height + y]
    }

    pub fn count_ones(&self) -> usize {
        self.data.iter().filter(|&&b| b).count()
    }
}

fn check(grid: &LabelGrid, focus: &[usize], axes: (usize, usize)) -> Result<()> {
    let shape = &grid.shape;
    let n = shape.dim();
    for a in [axes.0, axes.1] {
        if a >= n {
            return Err(Error::AxisOutOfRange(a));
        }
    }
    if axes.0 == axes.1 {
        return Err(Error::Invalid("slice axes must differ".into()));
    }
    if focus.len() != n {
        return Err(Error::LengthMismatch {
            left: focus.len(),
            right: n,
        });
    }
    if focus.iter().zip(shape.resolution()).any(|(&f, &r)| f >= r) {
        return Err(Error::Invalid("focus node outside the grid".into()));
    }
    Ok(())
}

/// Does `segment` occur at the slice pixel `(x, y)` when the axes in `free`
/// range jointly over all their nodes and the rest stay at `focus`?
fn exists(grid: &LabelGrid, segment: u32, focus: &[usize], axes: (usize, usize), x: usize, y: usize, free: &[usize]) -> bool {
    let shape = &grid.shape;
    let mut idx = focus.to_vec();
    idx[axes.0] = x;
    idx[axes.1] = y;
    for &a in free {
        idx[a] = 0;
    }
    loop {
        if grid.get(&idx) == segment {
            return true;
        }
        // odometer over the free axes
        let mut carry = true;
        for &a in free.iter().rev() {
            idx[a] += 1;
            if idx[a] < shape.resolution()[a] {
                carry = false;
                break;
            }
            idx[a] = 0;
        }
        if carry {
            return false;
        }
    }
}

fn sweep(grid: &LabelGrid, segment: u32, focus: &[usize], axes: (usize, usize), free: &[usize]) -> Vec<bool> {
    let (w, h) = (grid.shape.resolution()[axes.0], grid.shape.resolution()[axes.1]);
    let mut out = Vec::with_capacity(w * h);
    for x in 0..w {
        for y in 0..h {
            out.push(exists(grid, segment, focus, axes, x, y, free));
        }
    }
    out
}

/// Mask of `expr` for `segment` in the slice through the `focus` node spanned
/// by `axes`. Each atom sweeps its own axis with the others held at the focus;
/// `Complete` sweeps all non-slice axes jointly.
pub fn boundary_mask(
    grid: &LabelGrid,
    segment: u32,
    expr: &ProjectionExpr,
    focus: &[usize],
    axes: (usize, usize),
) -> Result<BinaryMask> {
    check(grid, focus, axes)?;
    if !grid.labels.contains(&segment) {
        return Err(Error::Invalid(format!("segment {segment} does not occur in the grid")));
    }
    let n = grid.shape.dim();
    let atoms = expr.atoms();
    if let Some(&bad) = atoms.iter().find(|&&k| k >= n) {
        return Err(Error::AxisOutOfRange(bad));
    }
    if atoms.contains(&axes.0) || atoms.contains(&axes.1) {
        return Err(Error::Invalid("expression references a slice axis".into()));
    }
    let atom_masks: Vec<Option<Vec<bool>>> = (0..n)
        .map(|k| atoms.contains(&k).then(|| sweep(grid, segment, focus, axes, &[k])))
        .collect();
    let complete = matches!(expr, ProjectionExpr::Complete).then(|| {
        let free: Vec<usize> = (0..n).filter(|&a| a != axes.0 && a != axes.1).collect();
        sweep(grid, segment, focus, axes, &free)
    });
    let (w, h) = (grid.shape.resolution()[axes.0], grid.shape.resolution()[axes.1]);
    let data = (0..w * h)
        .map(|p| {
            let atom = |k: usize| atom_masks[k].as_ref().expect("atom mask computed")[p];
            expr.eval(&atom, complete.as_ref().is_some_and(|c| c[p]))
        })
        .collect();
    Ok(BinaryMask {
        width: w,
        height: h,
        data,
    })
}

/// Union of the single-axis sweeps over every non-slice axis; the per-axis
/// counterpart of `Complete`.
pub fn union_mask(grid: &LabelGrid, segment: u32, focus: &[usize], axes: (usize, usize)) -> Result<BinaryMask> {
    check(grid, focus, axes)?;
    let n = grid.shape.dim();
    let (w, h) = (grid.shape.resolution()[axes.0], grid.shape.resolution()[axes.1]);
    let mut data = vec![false; w * h];
    for k in (0..n).filter(|&a| a != axes.0 && a != axes.1) {
        for (d, v) in data.iter_mut().zip(sweep(grid, segment, focus, axes, &[k])) {
            *d |= v;
        }
    }
    if n == 2 {
        data = sweep(grid, segment, focus, axes, &[]);
    }
    Ok(BinaryMask {
        width: w,
        height: h,
        data,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::partition::expr::{parse_projection_expr, BinaryOp};
    use crate::partition::grid::GridShape;

    fn grid3() -> LabelGrid {
        // 3 x 3 x 3; segment 1 only at z = 2 on the diagonal x == y
        let shape = GridShape::new(vec![3, 3, 3]).unwrap();
        let labels = (0..27)
            .map(|f| {
                let i = shape.unflat(f);
                u32::from(i[0] == i[1] && i[2] == 2)
            })
            .collect();
        LabelGrid::new(shape, labels).unwrap()
    }

    #[test]
    fn uniform_grid_all_ones() {
        let shape = GridShape::new(vec![3, 3, 3, 3]).unwrap();
        let g = LabelGrid::new(shape, vec![4; 81]).unwrap();
        let names: Vec<String> = ["a", "b", "c", "d"].iter().map(|s| s.to_string()).collect();
        for text in ["c", "c or d", "c and d", "c xor d implies c", "Complete"] {
            let e = parse_projection_expr(text, (0, 1), &names).unwrap();
            let m = boundary_mask(&g, 4, &e, &[1, 1, 1, 1], (0, 1)).unwrap();
            assert_eq!(m.count_ones(), 9, "{text}");
        }
    }

    #[test]
    fn atom_sweeps_its_axis() {
        let g = grid3();
        let atom = ProjectionExpr::Atom(2);
        let m = boundary_mask(&g, 1, &atom, &[0, 0, 0], (0, 1)).unwrap();
        for x in 0..3 {
            for y in 0..3 {
                assert_eq!(m.get(x, y), x == y);
            }
        }
        let c = boundary_mask(&g, 1, &ProjectionExpr::Complete, &[0, 0, 0], (0, 1)).unwrap();
        assert_eq!(c, m);
        assert_eq!(union_mask(&g, 1, &[0, 0, 0], (0, 1)).unwrap(), m);
        let not = boundary_mask(&g, 1, &ProjectionExpr::negate(atom), &[0, 0, 0], (0, 1)).unwrap();
        assert_eq!(not.count_ones(), 6);
    }

    #[test]
    fn complete_is_joint() {
        // 4D: segment only where both free axes are at their top node
        let shape = GridShape::new(vec![2, 2, 2, 2]).unwrap();
        let labels = (0..16)
            .map(|f| {
                let i = shape.unflat(f);
                u32::from(i[2] == 1 && i[3] == 1)
            })
            .collect();
        let g = LabelGrid::new(shape, labels).unwrap();
        let focus = [0, 0, 0, 0];
        let c = boundary_mask(&g, 1, &ProjectionExpr::Complete, &focus, (0, 1)).unwrap();
        assert_eq!(c.count_ones(), 4);
        let u = union_mask(&g, 1, &focus, (0, 1)).unwrap();
        assert_eq!(u.count_ones(), 0);
        let or = boundary_mask(&g, 1, &ProjectionExpr::binary(BinaryOp::Or, ProjectionExpr::Atom(2), ProjectionExpr::Atom(3)), &focus, (0, 1)).unwrap();
        assert_eq!(or, u);
    }

    #[test]
    fn rejects_bad_input() {
        let g = grid3();
        assert!(boundary_mask(&g, 7, &ProjectionExpr::Atom(2), &[0, 0, 0], (0, 1)).is_err());
        assert!(boundary_mask(&g, 1, &ProjectionExpr::Atom(0), &[0, 0, 0], (0, 1)).is_err());
        assert!(boundary_mask(&g, 1, &ProjectionExpr::Atom(2), &[0, 0, 3], (0, 1)).is_err());
        assert!(boundary_mask(&g, 1, &ProjectionExpr::Atom(2), &[0, 0, 0], (0, 0)).is_err());
        assert!(boundary_mask(&g, 1, &ProjectionExpr::Atom(2), &[0, 0, 0], (0, 5)).is_err());
    }

    #[test]
    fn json_is_compact() {
        let m = BinaryMask { width: 1, height: 2, data: vec![true, false] };
        assert_eq!(serde_json::to_string(&m).unwrap(), r#"{"width":1,"height":2,"data":[1,0]}"#);
    }
}
