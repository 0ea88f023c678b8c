//! Exact decomposition of overlapping axis-aligned observation squares.
//!
//! Every point of the union belongs to exactly one segment, identified by the
//! set of squares covering it. Areas come from coordinate compression: the
//! distinct x and y edges cut the plane into a grid of cells, each cell lies
//! wholly inside or outside each square, and cells with the same cover set
//! are merged. Squares are half-open, so edges shared by two squares never
//! produce zero-area segments.

use std::collections::BTreeMap;

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObservationSquare {
    pub owner: usize,
    pub center: (f64, f64),
    pub side: f64,
}

impl ObservationSquare {
    pub fn new(owner: usize, center: (f64, f64), side: f64) -> Self {
        Self {
            owner,
            center,
            side,
        }
    }

    fn bounds(&self) -> (f64, f64, f64, f64) {
        let h = self.side / 2.0;
        (
            self.center.0 - h,
            self.center.0 + h,
            self.center.1 - h,
            self.center.1 + h,
        )
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        let (x0, x1, y0, y1) = self.bounds();
        x >= x0 && x < x1 && y >= y0 && y < y1
    }
}

/// A maximal region covered by exactly `members`.
#[derive(Debug, Clone, PartialEq)]
pub struct Segment {
    /// Sorted, nonempty owner indices.
    pub members: Vec<usize>,
    pub area: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SegmentDecomposition {
    /// Sorted by member list.
    pub segments: Vec<Segment>,
}

impl SegmentDecomposition {
    pub fn len(&self) -> usize {
        self.segments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.segments.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Segment> {
        self.segments.iter()
    }

    /// Total area of segments that contain `uav`.
    pub fn covered_by(&self, uav: usize) -> f64 {
        self.segments
            .iter()
            .filter(|s| s.members.contains(&uav))
            .map(|s| s.area)
            .sum()
    }
}

pub fn decompose(squares: &[ObservationSquare]) -> SegmentDecomposition {
    let mut xs = Vec::with_capacity(2 * squares.len());
    let mut ys = Vec::with_capacity(2 * squares.len());
    let bounds: Vec<_> = squares.iter().map(ObservationSquare::bounds).collect();
    for &(x0, x1, y0, y1) in &bounds {
        xs.extend([x0, x1]);
        ys.extend([y0, y1]);
    }
    xs.sort_by(f64::total_cmp);
    xs.dedup();
    ys.sort_by(f64::total_cmp);
    ys.dedup();

    let mut merged: BTreeMap<Vec<usize>, f64> = BTreeMap::new();
    let mut members = Vec::with_capacity(squares.len());
    for xw in xs.windows(2) {
        let (cx, w) = ((xw[0] + xw[1]) / 2.0, xw[1] - xw[0]);
        for yw in ys.windows(2) {
            let (cy, h) = ((yw[0] + yw[1]) / 2.0, yw[1] - yw[0]);
            members.clear();
            for (k, &(x0, x1, y0, y1)) in bounds.iter().enumerate() {
                if cx >= x0 && cx < x1 && cy >= y0 && cy < y1 {
                    members.push(squares[k].owner);
                }
            }
            if members.is_empty() {
                continue;
            }
            members.sort_unstable();
            members.dedup();
            *merged.entry(members.clone()).or_insert(0.0) += w * h;
        }
    }
    SegmentDecomposition {
        segments: merged
            .into_iter()
            .map(|(members, area)| Segment { members, area })
            .collect(),
    }
}

/// Area-weighted mean number of UAVs observing points of `uav`'s square.
pub fn shared_coverage_degree(uav: usize, decomp: &SegmentDecomposition, side: f64) -> Result<f64> {
    let mut weighted = 0.0;
    let mut seen = false;
    for s in decomp.iter().filter(|s| s.members.contains(&uav)) {
        weighted += s.area * s.members.len() as f64;
        seen = true;
    }
    if !seen {
        return Err(Error::UnknownUav(uav));
    }
    Ok(weighted / (side * side))
}

pub fn union_area(decomp: &SegmentDecomposition) -> f64 {
    decomp.iter().map(|s| s.area).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn sq(owner: usize, cx: f64, cy: f64, side: f64) -> ObservationSquare {
        ObservationSquare::new(owner, (cx, cy), side)
    }

    fn area_of(d: &SegmentDecomposition, members: &[usize]) -> f64 {
        d.iter()
            .find(|s| s.members == members)
            .map_or(0.0, |s| s.area)
    }

    #[test]
    fn disjoint_squares() {
        let d = decompose(&[sq(0, 5.0, 5.0, 10.0), sq(1, 50.0, 50.0, 10.0)]);
        assert_eq!(d.len(), 2);
        assert_eq!(area_of(&d, &[0]), 100.0);
        assert_eq!(area_of(&d, &[1]), 100.0);
        assert_eq!(union_area(&d), 200.0);
    }

    #[test]
    fn two_overlapping_squares() {
        // [0,10]^2 and [5,15]^2
        let d = decompose(&[sq(0, 5.0, 5.0, 10.0), sq(1, 10.0, 10.0, 10.0)]);
        assert_eq!(d.len(), 3);
        assert_eq!(area_of(&d, &[0]), 75.0);
        assert_eq!(area_of(&d, &[1]), 75.0);
        assert_eq!(area_of(&d, &[0, 1]), 25.0);
        assert_eq!(union_area(&d), 175.0);
    }

    #[test]
    fn three_squares_make_seven_segments() {
        let d = decompose(&[
            sq(0, 10.0, 10.0, 20.0),
            sq(1, 22.0, 12.0, 20.0),
            sq(2, 15.0, 22.0, 20.0),
        ]);
        assert_eq!(d.len(), 7);
        for i in 0..3 {
            assert!((d.covered_by(i) - 400.0).abs() < 1e-9);
        }
    }

    #[test]
    fn shared_edges_do_not_create_slivers() {
        let d = decompose(&[sq(0, 5.0, 5.0, 10.0), sq(1, 15.0, 5.0, 10.0)]);
        assert_eq!(d.len(), 2);
    }

    #[test]
    fn coverage_degree_examples() {
        let d = decompose(&[sq(0, 5.0, 5.0, 10.0)]);
        assert_eq!(shared_coverage_degree(0, &d, 10.0).unwrap(), 1.0);
        assert_eq!(union_area(&d), 100.0);

        let d = decompose(&[sq(0, 5.0, 5.0, 10.0), sq(1, 5.0, 5.0, 10.0)]);
        assert_eq!(d.len(), 1);
        assert_eq!(shared_coverage_degree(0, &d, 10.0).unwrap(), 2.0);

        // right half of square 0 shared with square 1
        let d = decompose(&[sq(0, 5.0, 5.0, 10.0), sq(1, 10.0, 5.0, 10.0)]);
        assert_eq!(shared_coverage_degree(0, &d, 10.0).unwrap(), 1.5);

        assert!(matches!(
            shared_coverage_degree(3, &d, 10.0),
            Err(Error::UnknownUav(3))
        ));
    }

    #[test]
    fn monte_carlo_agrees_with_exact_areas() {
        let squares = [
            sq(0, 10.0, 10.0, 20.0),
            sq(1, 22.0, 12.0, 16.0),
            sq(2, 15.0, 22.0, 24.0),
        ];
        let d = decompose(&squares);
        let (lo, hi) = (-5.0, 40.0);
        let box_area = (hi - lo) * (hi - lo);
        let n = 200_000;
        let mut counts: BTreeMap<Vec<usize>, usize> = BTreeMap::new();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..n {
            let (x, y) = (rng.gen_range(lo..hi), rng.gen_range(lo..hi));
            let m: Vec<usize> = squares
                .iter()
                .filter(|s| s.contains(x, y))
                .map(|s| s.owner)
                .collect();
            if !m.is_empty() {
                *counts.entry(m).or_default() += 1;
            }
        }
        for s in d.iter() {
            let p = s.area / box_area;
            let se = (p * (1.0 - p) / n as f64).sqrt() * box_area;
            let est = counts.get(&s.members).copied().unwrap_or(0) as f64 / n as f64 * box_area;
            assert!(
                (est - s.area).abs() <= 3.0 * se,
                "{:?}: {est} vs {}",
                s.members,
                s.area
            );
        }
    }

    fn squares_strategy() -> impl Strategy<Value = Vec<ObservationSquare>> {
        prop::collection::vec((0.0f64..100.0, 0.0f64..100.0, 20.0f64..40.0), 1..7).prop_map(|v| {
            v.into_iter()
                .enumerate()
                .map(|(i, (x, y, d))| sq(i, x, y, d))
                .collect()
        })
    }

    proptest! {
        #[test]
        fn partition_identity(squares in squares_strategy()) {
            let d = decompose(&squares);
            for s in &squares {
                prop_assert!((d.covered_by(s.owner) - s.side * s.side).abs() < 1e-9);
                let z = shared_coverage_degree(s.owner, &d, s.side).unwrap();
                prop_assert!(z >= 1.0 - 1e-12 && z <= squares.len() as f64 + 1e-12);
            }
            for seg in d.iter() {
                prop_assert!(seg.area > 0.0);
            }
        }

        #[test]
        fn permutation_invariant(squares in squares_strategy(), seed in any::<u64>()) {
            use rand::seq::SliceRandom;
            let mut shuffled = squares.clone();
            shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
            let a = decompose(&squares);
            let b = decompose(&shuffled);
            prop_assert_eq!(a.len(), b.len());
            for (x, y) in a.iter().zip(b.iter()) {
                prop_assert_eq!(&x.members, &y.members);
                prop_assert!((x.area - y.area).abs() < 1e-9);
            }
        }
    }
}
