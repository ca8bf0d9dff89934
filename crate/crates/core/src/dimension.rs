//! Dimension estimators: self-similarity dimension, box counting with a
//! least-squares fit, and `d`-dimensional covering sums.

mod cover;

use std::collections::HashSet;

pub use cover::{
    cover_refinement, cover_refinement_summary, BoxRun, CoverBox, CoverGeneration, CoverSummary, MAX_PARENT_BOXES,
    MAX_ROWS,
};

use crate::cantor::Rect;
use crate::error::{Error, Result};

/// Compensated (Neumaier) summation.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct NeumaierSum {
    sum: f64,
    compensation: f64,
}

impl NeumaierSum {
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.compensation += (self.sum - t) + x;
        } else {
            self.compensation += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn merge(&mut self, other: &NeumaierSum) {
        self.add(other.sum);
        self.add(other.compensation);
    }

    pub fn value(&self) -> f64 {
        self.sum + self.compensation
    }
}

impl FromIterator<f64> for NeumaierSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut s = NeumaierSum::default();
        for x in iter {
            s.add(x);
        }
        s
    }
}

/// `log N / log(1/s)` for a set made of `N` copies of itself scaled by `s`.
pub fn self_similarity_dimension(n_pieces: u64, ratio: f64) -> Result<f64> {
    if n_pieces < 2 {
        return Err(Error::Domain(format!("need at least two pieces, got {n_pieces}")));
    }
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(Error::Domain(format!("ratio must lie in (0, 1), got {ratio}")));
    }
    Ok((n_pieces as f64).ln() / (1.0 / ratio).ln())
}

/// Number of occupied grid cells of side `scale`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoxCount {
    pub scale: f64,
    pub count: u64,
}

fn check_scales(scales: &[f64]) -> Result<()> {
    if scales.is_empty() {
        return Err(Error::Domain("no scales given".into()));
    }
    if scales.iter().any(|s| !(*s > 0.0 && s.is_finite())) {
        return Err(Error::Domain("scales must be positive and finite".into()));
    }
    if scales.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::Domain("scales must be strictly decreasing".into()));
    }
    Ok(())
}

/// Counts the cells `[i s, (i+1) s) × [j s, (j+1) s)` containing at least one point.
pub fn box_counts(points: &[(f64, f64)], scales: &[f64]) -> Result<Vec<BoxCount>> {
    check_scales(scales)?;
    if points.is_empty() {
        return Err(Error::Domain("box counting needs at least one point".into()));
    }
    if points.iter().any(|(x, y)| !x.is_finite() || !y.is_finite()) {
        return Err(Error::Domain("points must be finite".into()));
    }
    Ok(scales
        .iter()
        .map(|&s| {
            let cells: HashSet<(i64, i64)> =
                points.iter().map(|&(x, y)| ((x / s).floor() as i64, (y / s).floor() as i64)).collect();
            BoxCount { scale: s, count: cells.len() as u64 }
        })
        .collect())
}

/// Relative tolerance, in cell units, used when snapping rectangle edges to the grid.
const SNAP_TOL: f64 = 1e-9;

/// Counts grid cells meeting the rectangles, treating each rectangle as
/// half-open `[x_lo, x_hi) × [y_lo, y_hi)` and snapping edges that lie
/// within `1e-9` cells of a grid line onto it.
pub fn box_counts_rects(rects: &[Rect], scales: &[f64]) -> Result<Vec<BoxCount>> {
    check_scales(scales)?;
    if rects.is_empty() {
        return Err(Error::Domain("box counting needs at least one rectangle".into()));
    }
    scales
        .iter()
        .map(|&s| {
            let boxes: Vec<[i64; 4]> = rects
                .iter()
                .map(|r| {
                    let i0 = (r.x_lo / s + SNAP_TOL).floor() as i64;
                    let i1 = ((r.x_hi / s - SNAP_TOL).ceil() as i64).max(i0 + 1);
                    let j0 = (r.y_lo / s + SNAP_TOL).floor() as i64;
                    let j1 = ((r.y_hi / s - SNAP_TOL).ceil() as i64).max(j0 + 1);
                    [i0, i1, j0, j1]
                })
                .collect();
            let cells = union_cell_count(&boxes);
            let count = u64::try_from(cells)
                .map_err(|_| Error::Domain(format!("box count at scale {s:e} exceeds the 64-bit range")))?;
            Ok(BoxCount { scale: s, count })
        })
        .collect()
}

/// Number of integer cells in the union of half-open integer boxes
/// `[i0, i1) × [j0, j1)`, by a sweep over `i` with a segment tree over `j`.
fn union_cell_count(boxes: &[[i64; 4]]) -> u128 {
    let mut ys: Vec<i64> = boxes.iter().flat_map(|b| [b[2], b[3]]).collect();
    ys.sort_unstable();
    ys.dedup();
    let mut events: Vec<(i64, i32, usize, usize)> = Vec::with_capacity(2 * boxes.len());
    for b in boxes {
        let lo = ys.binary_search(&b[2]).expect("compressed");
        let hi = ys.binary_search(&b[3]).expect("compressed");
        events.push((b[0], 1, lo, hi));
        events.push((b[1], -1, lo, hi));
    }
    events.sort_unstable();
    let mut tree = CoverTree::new(&ys);
    let mut total: u128 = 0;
    let mut prev_x = events.first().map_or(0, |e| e.0);
    for (x, delta, lo, hi) in events {
        total += (x - prev_x) as u128 * tree.covered() as u128;
        tree.update(lo, hi, delta);
        prev_x = x;
    }
    total
}

struct CoverTree {
    ys: Vec<i64>,
    count: Vec<i32>,
    length: Vec<u64>,
}

impl CoverTree {
    fn new(ys: &[i64]) -> Self {
        let n = ys.len().max(2) - 1;
        CoverTree { ys: ys.to_vec(), count: vec![0; 4 * n], length: vec![0; 4 * n] }
    }

    fn covered(&self) -> u64 {
        self.length[1]
    }

    fn update(&mut self, lo: usize, hi: usize, delta: i32) {
        if lo < hi {
            let n = self.ys.len() - 1;
            self.update_node(1, 0, n, lo, hi, delta);
        }
    }

    fn update_node(&mut self, node: usize, l: usize, r: usize, lo: usize, hi: usize, delta: i32) {
        if hi <= l || r <= lo {
            return;
        }
        if lo <= l && r <= hi {
            self.count[node] += delta;
        } else {
            let mid = (l + r) / 2;
            self.update_node(2 * node, l, mid, lo, hi, delta);
            self.update_node(2 * node + 1, mid, r, lo, hi, delta);
        }
        self.length[node] = if self.count[node] > 0 {
            (self.ys[r] - self.ys[l]) as u64
        } else if r - l == 1 {
            0
        } else {
            self.length[2 * node] + self.length[2 * node + 1]
        };
    }
}

/// Least-squares slope of `log N(s)` against `log(1/s)` and its coefficient
/// of determination. Constant counts give slope 0 with `r² = 1`.
pub fn box_counting_dimension(counts: &[BoxCount]) -> Result<(f64, f64)> {
    if counts.len() < 4 {
        return Err(Error::Domain(format!("need at least 4 box counts, got {}", counts.len())));
    }
    let mut scales: Vec<f64> = counts.iter().map(|c| c.scale).collect();
    scales.sort_by(f64::total_cmp);
    scales.dedup();
    if scales.len() != counts.len() {
        return Err(Error::Domain("box counts must have distinct scales".into()));
    }
    if counts.iter().any(|c| c.count == 0) {
        return Err(Error::DegenerateFit("a box count is zero".into()));
    }
    let xs: Vec<f64> = counts.iter().map(|c| -c.scale.ln()).collect();
    let ys: Vec<f64> = counts.iter().map(|c| (c.count as f64).ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my) * (y - my)).sum();
    let slope = sxy / sxx;
    let r_squared = if syy == 0.0 { 1.0 } else { (sxy * sxy) / (sxx * syy) };
    Ok((slope, r_squared))
}

/// `Σ diam^d` over the cover, at the generation's exponent.
pub fn cover_measure(cover: &CoverGeneration) -> f64 {
    cover.measure_at(cover.d)
}
