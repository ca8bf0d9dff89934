//! Cantor-type constructions: variable-ratio and fat Cantor sets, product
//! squares, and Karpińska's nested squares joined by rectangular tubes.

use std::cmp::{Ordering, Reverse};
use std::collections::{BTreeMap, BinaryHeap};

use rayon::prelude::*;

use crate::error::{Error, Result};

pub const MAX_CANTOR_DEPTH: usize = 30;
pub const MAX_FAT_CANTOR_DEPTH: usize = 25;
pub const MAX_KARPINSKA_DEPTH: usize = 8;

/// Default ratio by which tube widths shrink between generations.
pub const DEFAULT_TUBE_WIDTH_RATIO: f64 = 0.7;

/// Sorted, pairwise disjoint closed intervals of one generation.
#[derive(Debug, Clone, PartialEq)]
pub struct IntervalSet {
    pub intervals: Vec<(f64, f64)>,
    pub generation: usize,
}

impl IntervalSet {
    pub fn unit() -> Self {
        IntervalSet { intervals: vec![(0.0, 1.0)], generation: 0 }
    }

    /// Total length, summed with compensation.
    pub fn measure(&self) -> f64 {
        let mut sum = crate::dimension::NeumaierSum::default();
        for &(lo, hi) in &self.intervals {
            sum.add(hi - lo);
        }
        sum.value()
    }

    pub fn midpoints(&self) -> Vec<f64> {
        self.intervals.iter().map(|&(lo, hi)| 0.5 * (lo + hi)).collect()
    }

    pub fn len(&self) -> usize {
        self.intervals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.intervals.is_empty()
    }

    /// Checks ordering, positivity and disjointness.
    pub fn is_valid(&self) -> bool {
        self.intervals.iter().all(|&(lo, hi)| lo < hi)
            && self.intervals.windows(2).all(|w| w[0].1 < w[1].0)
    }
}

fn split_generation(set: &IntervalSet, f: impl Fn(f64, f64) -> [(f64, f64); 2] + Sync) -> IntervalSet {
    let intervals = set.intervals.par_iter().flat_map_iter(|&(lo, hi)| f(lo, hi)).collect();
    IntervalSet { intervals, generation: set.generation + 1 }
}

/// Cantor set whose generation-`g` intervals have length `∏_{i≤g} s_i`,
/// with the two children of every interval flush with its endpoints.
pub fn cantor_intervals(ratios: &[f64], depth: usize) -> Result<IntervalSet> {
    if depth > ratios.len() || depth > MAX_CANTOR_DEPTH {
        return Err(Error::Domain(format!(
            "depth {depth} needs depth ≤ {} ratios and ≤ {MAX_CANTOR_DEPTH}",
            ratios.len()
        )));
    }
    if let Some(bad) = ratios.iter().find(|s| !(**s > 0.0 && **s < 0.5)) {
        return Err(Error::Domain(format!("Cantor ratios must lie in (0, 1/2), got {bad}")));
    }
    let mut set = IntervalSet::unit();
    for &s in &ratios[..depth] {
        set = split_generation(&set, |lo, hi| {
            let child = (hi - lo) * s;
            [(lo, lo + child), (hi - child, hi)]
        });
    }
    Ok(set)
}

/// The middle-third Cantor set at the given depth.
pub fn middle_third(depth: usize) -> Result<IntervalSet> {
    cantor_intervals(&vec![1.0 / 3.0; depth], depth)
}

/// Fat Cantor set: generation `j` removes a centred open interval of length
/// `(1/10)(1/20)^{j-1}` from each of the `2^{j-1}` remaining intervals.
pub fn fat_cantor(depth: usize) -> Result<IntervalSet> {
    if depth > MAX_FAT_CANTOR_DEPTH {
        return Err(Error::Domain(format!("fat Cantor depth must be ≤ {MAX_FAT_CANTOR_DEPTH}")));
    }
    let mut set = IntervalSet::unit();
    let mut removal = 0.1;
    for generation in 1..=depth {
        if set.intervals.iter().any(|&(lo, hi)| removal >= hi - lo) {
            return Err(Error::InfeasibleRemoval { generation });
        }
        let half = removal / 2.0;
        set = split_generation(&set, |lo, hi| {
            let mid = 0.5 * (lo + hi);
            [(lo, mid - half), (mid + half, hi)]
        });
        removal /= 20.0;
    }
    Ok(set)
}

/// Closed-form length of the fat Cantor set after `depth` generations.
pub fn fat_cantor_measure(depth: usize) -> f64 {
    1.0 - (1.0 - 10f64.powi(-(depth as i32))) / 9.0
}

/// Axis-aligned rectangle `[x_lo, x_hi] × [y_lo, y_hi]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rect {
    pub x_lo: f64,
    pub x_hi: f64,
    pub y_lo: f64,
    pub y_hi: f64,
}

impl Rect {
    pub fn new(x_lo: f64, x_hi: f64, y_lo: f64, y_hi: f64) -> Self {
        Rect { x_lo, x_hi, y_lo, y_hi }
    }

    pub fn square(x_lo: f64, y_lo: f64, side: f64) -> Self {
        Rect::new(x_lo, x_lo + side, y_lo, y_lo + side)
    }

    pub fn width(&self) -> f64 {
        self.x_hi - self.x_lo
    }

    pub fn height(&self) -> f64 {
        self.y_hi - self.y_lo
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    pub fn contains_rect(&self, other: &Rect, slack: f64) -> bool {
        other.x_lo >= self.x_lo - slack
            && other.x_hi <= self.x_hi + slack
            && other.y_lo >= self.y_lo - slack
            && other.y_hi <= self.y_hi + slack
    }

    /// Overlap of the two rectangles, or `None` if they meet in at most a
    /// segment.
    pub fn intersection(&self, other: &Rect) -> Option<Rect> {
        let r = Rect::new(
            self.x_lo.max(other.x_lo),
            self.x_hi.min(other.x_hi),
            self.y_lo.max(other.y_lo),
            self.y_hi.min(other.y_hi),
        );
        (r.x_lo < r.x_hi && r.y_lo < r.y_hi).then_some(r)
    }

    /// Whether the rectangles share a boundary segment of positive length.
    pub fn shares_edge(&self, other: &Rect, slack: f64) -> bool {
        let x_overlap = self.x_hi.min(other.x_hi) - self.x_lo.max(other.x_lo);
        let y_overlap = self.y_hi.min(other.y_hi) - self.y_lo.max(other.y_lo);
        let touching_x = (self.x_hi - other.x_lo).abs() <= slack || (other.x_hi - self.x_lo).abs() <= slack;
        let touching_y = (self.y_hi - other.y_lo).abs() <= slack || (other.y_hi - self.y_lo).abs() <= slack;
        (touching_x && y_overlap > slack) || (touching_y && x_overlap > slack)
    }
}

/// `base × base`, as rectangles `I × J` ordered by `(I, J)`.
pub fn product_square(base: &IntervalSet) -> Vec<Rect> {
    base.intervals
        .iter()
        .flat_map(|&(x_lo, x_hi)| base.intervals.iter().map(move |&(y_lo, y_hi)| Rect::new(x_lo, x_hi, y_lo, y_hi)))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RectKind {
    Square,
    Tube,
}

/// A rectilinear tube: a polyline of constant width, stored both as its
/// centre line and as a disjoint decomposition into rectangles.
#[derive(Debug, Clone, PartialEq)]
pub struct Tube {
    pub width: f64,
    pub centerline: Vec<(f64, f64)>,
    pub rects: Vec<Rect>,
    /// Index of the square this tube reaches.
    pub square: usize,
}

/// Squares and tubes of one generation of Karpińska's construction.
#[derive(Debug, Clone, PartialEq)]
pub struct RectSet {
    pub generation: usize,
    pub squares: Vec<Rect>,
    pub tubes: Vec<Tube>,
}

impl RectSet {
    /// Every rectangle with its kind: squares first, then tube pieces.
    pub fn rects(&self) -> Vec<(Rect, RectKind)> {
        let mut out: Vec<(Rect, RectKind)> = self.squares.iter().map(|r| (*r, RectKind::Square)).collect();
        out.extend(self.tubes.iter().flat_map(|t| t.rects.iter().map(|r| (*r, RectKind::Tube))));
        out
    }

    pub fn tube_rects(&self) -> Vec<Rect> {
        self.tubes.iter().flat_map(|t| t.rects.iter().copied()).collect()
    }

    pub fn square_area(&self) -> f64 {
        let mut sum = crate::dimension::NeumaierSum::default();
        for r in &self.squares {
            sum.add(r.area());
        }
        sum.value()
    }

    /// Whether all squares and tube pieces have pairwise disjoint interiors.
    pub fn is_disjoint(&self) -> bool {
        let rects: Vec<Rect> = self.rects().into_iter().map(|(r, _)| r).collect();
        interiors_disjoint(&rects)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Key(f64);

impl Eq for Key {}

impl PartialOrd for Key {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Key {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.total_cmp(&other.0)
    }
}

/// Sweep-line test that no two rectangles overlap in more than a boundary
/// segment (up to rounding of a few ulps).
pub fn interiors_disjoint(rects: &[Rect]) -> bool {
    let tol = |a: f64, b: f64| 8.0 * f64::EPSILON * a.abs().max(b.abs()).max(1e-300);
    let mut order: Vec<usize> = (0..rects.len()).collect();
    order.sort_by(|&a, &b| rects[a].x_lo.total_cmp(&rects[b].x_lo));
    // active rectangles, keyed by y_lo; their y-ranges are pairwise disjoint
    let mut active: BTreeMap<Key, usize> = BTreeMap::new();
    let mut expiry: BinaryHeap<Reverse<(Key, usize)>> = BinaryHeap::new();
    for idx in order {
        let r = rects[idx];
        if !(r.x_lo < r.x_hi && r.y_lo < r.y_hi) {
            return false;
        }
        while let Some(&Reverse((Key(x_hi), j))) = expiry.peek() {
            if x_hi - r.x_lo <= tol(x_hi, r.x_lo) {
                expiry.pop();
                active.remove(&Key(rects[j].y_lo));
            } else {
                break;
            }
        }
        if let Some((_, &j)) = active.range(..=Key(r.y_lo)).next_back() {
            if rects[j].y_hi - r.y_lo > tol(rects[j].y_hi, r.y_lo) {
                return false;
            }
        }
        if let Some((_, &j)) = active.range(Key(r.y_lo)..).next() {
            if r.y_hi - rects[j].y_lo > tol(r.y_hi, rects[j].y_lo) {
                return false;
            }
        }
        active.insert(Key(r.y_lo), idx);
        expiry.push(Reverse((Key(r.x_hi), idx)));
    }
    true
}

type Point = (f64, f64);

fn add(a: Point, b: Point) -> Point {
    (a.0 + b.0, a.1 + b.1)
}

fn scale(a: Point, t: f64) -> Point {
    (a.0 * t, a.1 * t)
}

fn unit_direction(a: Point, b: Point) -> Point {
    let (dx, dy) = (b.0 - a.0, b.1 - a.1);
    if dx.abs() >= dy.abs() {
        (dx.signum(), 0.0)
    } else {
        (0.0, dy.signum())
    }
}

/// Normal to the right of the travel direction.
fn right_normal(d: Point) -> Point {
    (d.1, -d.0)
}

/// Parallel copy of a rectilinear polyline at signed distance `delta` to
/// the right of the direction of travel.
fn offset_polyline(path: &[Point], delta: f64) -> Vec<Point> {
    let m = path.len() - 1;
    let normals: Vec<Point> = path.windows(2).map(|w| right_normal(unit_direction(w[0], w[1]))).collect();
    (0..=m)
        .map(|i| {
            let shift = if i == 0 {
                normals[0]
            } else if i == m {
                normals[m - 1]
            } else {
                add(normals[i - 1], normals[i])
            };
            add(path[i], scale(shift, delta))
        })
        .collect()
}

/// Disjoint rectangles covering the thickened polyline: each piece runs
/// past an interior corner by half the width on the incoming side and
/// starts half a width after it on the outgoing side.
fn polyline_rects(path: &[Point], width: f64) -> Vec<Rect> {
    let h = width / 2.0;
    let last = path.len() - 2;
    path.windows(2)
        .enumerate()
        .filter_map(|(i, w)| {
            let d = unit_direction(w[0], w[1]);
            let start = if i > 0 { add(w[0], scale(d, h)) } else { w[0] };
            let end = if i < last { add(w[1], scale(d, h)) } else { w[1] };
            let rect = if d.1 == 0.0 {
                Rect::new(start.0.min(end.0), start.0.max(end.0), w[0].1 - h, w[0].1 + h)
            } else {
                Rect::new(w[0].0 - h, w[0].0 + h, start.1.min(end.1), start.1.max(end.1))
            };
            (rect.x_lo < rect.x_hi && rect.y_lo < rect.y_hi).then_some(rect)
        })
        .collect()
}

#[derive(Debug, Clone)]
struct Cell {
    square: Rect,
    /// Direction in which the tube enters the square.
    entry: Point,
    centerline: Vec<Point>,
    width: f64,
}

fn refine(cell: &Cell, keep: f64, ratio: f64, generation: usize) -> Result<[Cell; 4]> {
    let sigma = cell.square.width();
    let c = sigma * keep.sqrt() / 2.0;
    let gap = sigma * (1.0 - keep.sqrt());
    let w = cell.width;
    let child_w = w * ratio.powi(generation as i32 + 1) / 4.0;
    if w >= gap {
        return Err(Error::Geometry(format!(
            "tube width {w:e} does not fit the gap {gap:e} between generation-{} squares",
            generation + 1
        )));
    }
    if child_w > c {
        return Err(Error::Geometry(format!("subtube width {child_w:e} exceeds square side {c:e}")));
    }
    let d = cell.entry;
    let n = right_normal(d);
    let center = (cell.square.x_lo + sigma / 2.0, cell.square.y_lo + sigma / 2.0);
    let entry_point = add(center, scale(d, -sigma / 2.0));
    // lanes ordered from the right of travel to the left
    let lanes = [(1.0, c / 2.0), (1.0, sigma - c / 2.0), (-1.0, sigma - c / 2.0), (-1.0, c / 2.0)];
    let mut children = Vec::with_capacity(4);
    for (j, &(side, depth)) in lanes.iter().enumerate() {
        let delta = (1.5 - j as f64) * w / 4.0;
        let mut path = offset_polyline(&cell.centerline, delta);
        // the last offset vertex is collinear with the turn point
        path.pop();
        let along = add(entry_point, scale(d, depth));
        path.push(add(along, scale(n, delta)));
        path.push(add(along, scale(n, side * (sigma / 2.0 - c))));
        let child_center = add(along, scale(n, side * (sigma / 2.0 - c / 2.0)));
        children.push(Cell {
            square: Rect::square(child_center.0 - c / 2.0, child_center.1 - c / 2.0, c),
            entry: scale(n, side),
            centerline: path,
            width: child_w,
        });
    }
    Ok(children.try_into().expect("four children"))
}

/// Karpińska's construction: the unit square with a tube entering from the
/// right, refined `depth` times. Each refinement keeps the four corner
/// subsquares holding `keep_fraction[g]` of the parent's area and splits
/// every tube into four lanes that are routed to the subsquares.
pub fn karpinska_generate(keep_fraction: &[f64], tube_width_ratio: f64, depth: usize) -> Result<RectSet> {
    if depth > keep_fraction.len() || depth > MAX_KARPINSKA_DEPTH {
        return Err(Error::Domain(format!(
            "depth {depth} needs depth ≤ {} keep fractions and ≤ {MAX_KARPINSKA_DEPTH}",
            keep_fraction.len()
        )));
    }
    if let Some(bad) = keep_fraction.iter().find(|k| !(**k > 0.0 && **k < 1.0)) {
        return Err(Error::Domain(format!("keep fractions must lie in (0, 1), got {bad}")));
    }
    if !(tube_width_ratio > 0.0 && tube_width_ratio < 1.0) {
        return Err(Error::Domain(format!("tube width ratio must lie in (0, 1), got {tube_width_ratio}")));
    }
    let width = keep_fraction.first().map_or(0.25, |k| (1.0 - k.sqrt()) / 2.0);
    let mut cells = vec![Cell {
        square: Rect::square(0.0, 0.0, 1.0),
        entry: (-1.0, 0.0),
        centerline: vec![(2.0, 0.5), (1.0, 0.5)],
        width,
    }];
    for (generation, &keep) in keep_fraction[..depth].iter().enumerate() {
        let next: Result<Vec<[Cell; 4]>> =
            cells.par_iter().map(|cell| refine(cell, keep, tube_width_ratio, generation)).collect();
        cells = next?.into_iter().flatten().collect();
    }
    let squares = cells.iter().map(|c| c.square).collect();
    let tubes = cells
        .par_iter()
        .enumerate()
        .map(|(idx, cell)| Tube {
            width: cell.width,
            rects: polyline_rects(&cell.centerline, cell.width),
            centerline: cell.centerline.clone(),
            square: idx,
        })
        .collect();
    Ok(RectSet { generation: depth, squares, tubes })
}

/// The schedule `keep_fraction[g] = 1 - 4^{-(g+1)}`.
pub fn default_keep_schedule(depth: usize) -> Vec<f64> {
    (1..=depth as i32).map(|g| 1.0 - 4f64.powi(-g)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn middle_third_depth_two() {
        let set = middle_third(2).unwrap();
        let expected = [(0.0, 1.0 / 9.0), (2.0 / 9.0, 1.0 / 3.0), (2.0 / 3.0, 7.0 / 9.0), (8.0 / 9.0, 1.0)];
        assert_eq!(set.len(), 4);
        for (got, want) in set.intervals.iter().zip(expected) {
            assert!((got.0 - want.0).abs() < 1e-15 && (got.1 - want.1).abs() < 1e-15);
        }
        assert!(set.is_valid());
    }

    #[test]
    fn middle_third_measure_closed_form() {
        let set = middle_third(5).unwrap();
        assert!((set.measure() - 32.0 / 243.0).abs() < 1e-15);
    }

    #[test]
    fn variable_ratios() {
        let set = cantor_intervals(&[0.4, 0.3, 0.2], 3).unwrap();
        assert_eq!(set.len(), 8);
        for (lo, hi) in &set.intervals {
            assert!((hi - lo - 0.024).abs() < 1e-15);
        }
        assert!((set.measure() - 8.0 * 0.024).abs() < 1e-14);
    }

    #[test]
    fn nesting() {
        let ratios = [0.3, 0.45, 0.1, 0.25];
        for g in 1..=ratios.len() {
            let parent = cantor_intervals(&ratios, g - 1).unwrap();
            let child = cantor_intervals(&ratios, g).unwrap();
            for (i, &(lo, hi)) in child.intervals.iter().enumerate() {
                let (plo, phi) = parent.intervals[i / 2];
                assert!(plo <= lo && hi <= phi);
            }
        }
    }

    #[test]
    fn cantor_domain_errors() {
        assert!(cantor_intervals(&[0.5], 1).is_err());
        assert!(cantor_intervals(&[0.0], 1).is_err());
        assert!(cantor_intervals(&[0.3], 2).is_err());
        assert_eq!(cantor_intervals(&[], 0).unwrap(), IntervalSet::unit());
    }

    #[test]
    fn fat_cantor_measures() {
        assert!((fat_cantor(1).unwrap().measure() - 0.9).abs() < 1e-15);
        assert!((fat_cantor(2).unwrap().measure() - 0.89).abs() < 1e-15);
        let set = fat_cantor(10).unwrap();
        assert!((set.measure() - fat_cantor_measure(10)).abs() <= 1e-12);
        assert!((set.measure() - 8.0 / 9.0).abs() < 2e-11);
        assert!(set.is_valid());
        assert!(fat_cantor(26).is_err());
    }

    #[test]
    fn product_square_shapes() {
        assert_eq!(product_square(&IntervalSet::unit()), vec![Rect::square(0.0, 0.0, 1.0)]);
        let squares = product_square(&middle_third(1).unwrap());
        assert_eq!(squares.len(), 4);
        for s in &squares {
            assert!((s.width() - 1.0 / 3.0).abs() < 1e-15 && (s.height() - 1.0 / 3.0).abs() < 1e-15);
            assert!(s.x_lo == 0.0 || s.x_hi == 1.0);
            assert!(s.y_lo == 0.0 || s.y_hi == 1.0);
        }
    }

    #[test]
    fn karpinska_depth_zero() {
        let set = karpinska_generate(&[], 0.5, 0).unwrap();
        assert_eq!(set.squares, vec![Rect::square(0.0, 0.0, 1.0)]);
        assert_eq!(set.tubes.len(), 1);
        assert_eq!(set.tubes[0].rects, vec![Rect::new(1.0, 2.0, 0.375, 0.625)]);
        assert!(set.is_disjoint());
    }

    #[test]
    fn karpinska_structure() {
        let keep = default_keep_schedule(4);
        for depth in 0..=4 {
            let set = karpinska_generate(&keep, 0.5, depth).unwrap();
            assert_eq!(set.squares.len(), 4usize.pow(depth as u32));
            assert_eq!(set.tubes.len(), set.squares.len());
            assert!(set.is_disjoint(), "depth {depth}");
            let expected: f64 = keep[..depth].iter().product();
            assert!((set.square_area() - expected).abs() < 1e-12);
            let slack = 1e-12;
            for tube in &set.tubes {
                let touching: Vec<usize> = set
                    .squares
                    .iter()
                    .enumerate()
                    .filter(|(_, s)| tube.rects.iter().any(|r| r.shares_edge(s, slack)))
                    .map(|(i, _)| i)
                    .collect();
                assert_eq!(touching, vec![tube.square]);
            }
        }
    }

    #[test]
    fn karpinska_nesting() {
        let keep = default_keep_schedule(3);
        let parent = karpinska_generate(&keep, 0.6, 2).unwrap();
        let child = karpinska_generate(&keep, 0.6, 3).unwrap();
        for (i, s) in child.squares.iter().enumerate() {
            assert!(parent.squares[i / 4].contains_rect(s, 1e-15));
        }
        // each child tube runs inside its parent tube up to the parent square
        let parent_rects: Vec<Rect> = parent.tube_rects().into_iter().chain(parent.squares.iter().copied()).collect();
        for r in child.tube_rects() {
            let area: f64 = parent_rects.iter().filter_map(|p| p.intersection(&r)).map(|x| x.area()).sum();
            assert!((area - r.area()).abs() <= 1e-9 * r.area().max(1e-300));
        }
    }

    #[test]
    fn karpinska_rejects_wide_tubes() {
        // a keep fraction near 1 leaves no gap for the initial tube
        let keep = [0.75, 0.999999];
        assert!(matches!(karpinska_generate(&keep, 0.99, 2), Err(Error::Geometry(_))));
        assert!(karpinska_generate(&[1.0], 0.5, 1).is_err());
        assert!(karpinska_generate(&[0.5], 1.0, 1).is_err());
        assert!(karpinska_generate(&[0.5], 0.5, 2).is_err());
    }

    #[test]
    fn disjointness_detects_overlap() {
        let a = Rect::new(0.0, 1.0, 0.0, 1.0);
        let b = Rect::new(1.0, 2.0, 0.0, 1.0);
        let c = Rect::new(0.5, 1.5, 0.5, 0.6);
        assert!(interiors_disjoint(&[a, b]));
        assert!(!interiors_disjoint(&[a, b, c]));
        assert!(!interiors_disjoint(&[a, a]));
    }
}
