//! Covers of the points of a square whose orbits stay in a parabola
//! `P_{p,ξ}`, refined generation by generation.
//!
//! A covering box of generation `g` is the pullback under `f^{∘g}` of a
//! standard square: a closed square of side π whose image under `f` lies in
//! the right or left half-plane. Refining a box covers `f(S) ∩ P` (with `S`
//! its image standard square) by the standard squares of the grid
//! `[iπ, (i+1)π] × [jπ - π/2, jπ + π/2]` that it meets, counted exactly
//! row by row, and pulls them back.
//!
//! In the confocal coordinates `z = X + iY`, `kπ sinh z` maps the vertical
//! line `Re z = X` onto the ellipse with semi-axes `K sinh X` and
//! `K cosh X` (`K = |k|π`), so `f(S)` is the half of an elliptic annulus
//! and every grid row meets `f(S) ∩ P` in a horizontal run of squares.
//!
//! The image of a pulled-back square with image centre `c` has diameter
//! `π√2 / (λ |√(c² + K²)|)`, where `λ` is the derivative of `f^{∘g}` at the
//! parent and `f'² = K² + f²`. Runs hold up to billions of squares, so their
//! `Σ diam^d` is evaluated with Euler–Maclaurin summation.

use std::f64::consts::{PI, SQRT_2, TAU};
use std::sync::OnceLock;

use num_complex::Complex64;
use rayon::prelude::*;

use super::NeumaierSum;
use crate::dynamics::{ComplexValue, MapSpec, ParabolaSpec, X_MAX};
use crate::error::{Error, Result};

/// Largest number of boxes that may be refined into a further generation.
pub const MAX_PARENT_BOXES: u128 = 1_000_000;

/// Largest number of grid rows scanned for one generation.
pub const MAX_ROWS: u128 = 100_000_000;

/// Runs up to this length are summed term by term.
const DIRECT_MAX: u64 = 4096;

/// Terms with `m < HEAD_END` are always summed directly.
const HEAD_END: f64 = 256.0;

const ROW_BLOCK: u64 = 4096;

/// An explicitly listed covering box.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoverBox {
    pub center: ComplexValue,
    pub diameter: f64,
}

/// Consecutive covering boxes of one generation, described through their
/// images under `f^{∘generation}`: the standard squares
/// `[iπ, (i+1)π] × [row_center_im - π/2, row_center_im + π/2]` for
/// `col_lo ≤ i ≤ col_hi`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoxRun {
    /// Index of the parent box within the previous generation's enumeration.
    pub parent: usize,
    pub row_center_im: f64,
    pub col_lo: i64,
    pub col_hi: i64,
    /// `|(f^{∘(g-1)})'|` at the parent box.
    pub lambda_parent: f64,
    /// `K = |k|π`.
    pub k_pi: f64,
}

impl BoxRun {
    pub fn len(&self) -> u64 {
        (self.col_hi - self.col_lo + 1) as u64
    }

    pub fn is_empty(&self) -> bool {
        self.col_hi < self.col_lo
    }

    /// Image centre of the `i`-th square of the run.
    pub fn image_center(&self, col: i64) -> ComplexValue {
        Complex64::new((col as f64 + 0.5) * PI, self.row_center_im)
    }

    /// `|(f^{∘g})'|` at the pullback of the centre of square `col`.
    pub fn lambda(&self, col: i64) -> f64 {
        let c = self.image_center(col);
        self.lambda_parent * (c * c + self.k_pi * self.k_pi).norm().sqrt()
    }

    pub fn diameter(&self, col: i64) -> f64 {
        PI * SQRT_2 / self.lambda(col)
    }

    /// `Σ diam^d` over the run.
    pub fn measure(&self, d: f64) -> f64 {
        let (lo, hi) = if self.col_lo >= 0 {
            (self.col_lo, self.col_hi)
        } else {
            // h depends on the real part only through x², so mirror columns
            (-1 - self.col_hi, -1 - self.col_lo)
        };
        (PI * SQRT_2 / self.lambda_parent).powf(d)
            * run_sum(self.row_center_im, lo as f64 + 0.5, hi as f64 + 0.5, d, self.k_pi)
    }
}

/// One generation of a cover.
#[derive(Debug, Clone, PartialEq)]
pub struct CoverGeneration {
    pub generation: usize,
    pub d: f64,
    pub boxes: Vec<CoverBox>,
    pub runs: Vec<BoxRun>,
    pub box_count: u128,
    pub measure_sum: f64,
}

impl CoverGeneration {
    pub fn from_boxes(generation: usize, d: f64, boxes: Vec<CoverBox>) -> Self {
        let mut cover =
            CoverGeneration { generation, d, box_count: boxes.len() as u128, boxes, runs: Vec::new(), measure_sum: 0.0 };
        cover.measure_sum = cover.measure_at(d);
        cover
    }

    /// `Σ diam^e` over all boxes and runs.
    pub fn measure_at(&self, e: f64) -> f64 {
        let mut sum: NeumaierSum = self.boxes.iter().map(|b| b.diameter.powf(e)).collect();
        let runs: Vec<f64> = self.runs.par_iter().map(|r| r.measure(e)).collect();
        for x in runs {
            sum.add(x);
        }
        sum.value()
    }
}

/// Box count and measure of one generation without its boxes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoverSummary {
    pub generation: usize,
    pub d: f64,
    pub box_count: u128,
    pub measure_sum: f64,
    /// Number of grid rows scanned to produce the generation.
    pub rows: u128,
}

/// A standard square `[x0, x0+π] × [y_center - π/2, y_center + π/2]` in the
/// image of `f^{∘g}`, with `λ = |(f^{∘g})'|` at its pullback.
#[derive(Debug, Clone, Copy)]
struct Parent {
    x0: f64,
    y_center: f64,
    lambda: f64,
}

/// Row geometry of `f(S) ∩ P` for one parent.
struct Annulus {
    xi: f64,
    p: f64,
    a0: f64,
    b0: f64,
    a1: f64,
    b1: f64,
    /// Heights beyond which `f(S) ∩ P` is empty.
    tau_star: f64,
    /// Height where the inner ellipse crosses the parabola boundary.
    tau_cross: f64,
    /// `+1` if `f(S)` lies in the right half-plane, `-1` for the left.
    side: i64,
    rows: u64,
}

fn bisect(mut lo: f64, mut hi: f64, f: impl Fn(f64) -> bool) -> f64 {
    // invariant: f(lo) holds, f(hi) does not
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if f(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

impl Annulus {
    fn new(parent: &Parent, k: i32, spec: &ParabolaSpec) -> Result<Self> {
        let (mut x0, mut yc) = (parent.x0, parent.y_center);
        if x0 < 0.0 {
            // f(iπ - z) = f(z)
            x0 = -x0 - PI;
            yc = PI - yc;
        }
        if k < 0 {
            // -sinh z = sinh(z + iπ)
            yc += PI;
        }
        let x1 = x0 + PI;
        if x1 > X_MAX {
            return Err(Error::OverflowGuard { re: x1 });
        }
        let r = yc.rem_euclid(TAU);
        let tol = 1e-9 * yc.abs().max(1.0);
        let side = if r < tol || TAU - r < tol {
            1
        } else if (r - PI).abs() < tol {
            -1
        } else {
            return Err(Error::Geometry(format!("square centred at Im = {yc} does not map into a half-plane")));
        };
        let kk = (k as f64).abs() * PI;
        let (xi, p) = (spec.xi, spec.p);
        let mut ann = Annulus {
            xi,
            p,
            a0: kk * x0.max(0.0).sinh(),
            b0: kk * x0.max(0.0).cosh(),
            a1: kk * x1.sinh(),
            b1: kk * x1.cosh(),
            tau_star: 0.0,
            tau_cross: 0.0,
            side,
            rows: 0,
        };
        if ann.a1 <= xi {
            return Ok(ann);
        }
        ann.tau_star = bisect(0.0, ann.b1, |t| ann.hi_e(t) > ann.floor(t));
        if ann.a0 > xi {
            ann.tau_cross = bisect(0.0, ann.tau_star.min(ann.b0), |t| ann.lo_e(t) > ann.floor(t));
        }
        if ann.a1 / PI >= 2f64.powi(52) {
            return Err(Error::CoverTooLarge(format!("image real parts reach {:e}", ann.a1)));
        }
        let rows = (ann.tau_star / PI + 0.5).ceil();
        if rows > 1e18 {
            return Err(Error::CoverTooLarge(format!("{rows:e} rows")));
        }
        ann.rows = (rows as u64).max(1);
        // exclude a row whose lower edge sits exactly at tau_star
        if ann.rows > 1 && (ann.rows as f64 - 1.5) * PI >= ann.tau_star {
            ann.rows -= 1;
        }
        Ok(ann)
    }

    fn floor(&self, tau: f64) -> f64 {
        self.xi.max(tau.powf(self.p))
    }

    fn hi_e(&self, tau: f64) -> f64 {
        self.a1 * (1.0 - (tau / self.b1).powi(2)).max(0.0).sqrt()
    }

    fn lo_e(&self, tau: f64) -> f64 {
        if tau >= self.b0 {
            0.0
        } else {
            self.a0 * (1.0 - (tau / self.b0).powi(2)).sqrt()
        }
    }

    /// Columns (in the right half-plane) met by row `j ≥ 0`.
    fn row_columns(&self, j: u64) -> Option<(i64, i64)> {
        let tau_a = (j as f64 * PI - PI / 2.0).max(0.0);
        if tau_a >= self.tau_star {
            return None;
        }
        let tau_b = (j as f64 * PI + PI / 2.0).min(self.tau_star);
        let upper = self.hi_e(tau_a);
        let lower = if tau_b <= self.tau_cross {
            self.lo_e(tau_b)
        } else if tau_a >= self.tau_cross {
            self.floor(tau_a)
        } else {
            self.floor(self.tau_cross)
        };
        let lo = (lower / PI).floor() as i64;
        let hi = ((upper / PI).ceil() as i64 - 1).max(lo);
        Some((lo, hi))
    }
}

fn h(m: f64, y: f64, d: f64, k_pi: f64) -> f64 {
    let x = PI * m;
    let re = x * x - y * y + k_pi * k_pi;
    let im = 2.0 * x * y;
    re.hypot(im).powf(-d / 2.0)
}

fn h_prime(m: f64, y: f64, d: f64, k_pi: f64) -> f64 {
    let x = PI * m;
    let re = x * x - y * y + k_pi * k_pi;
    let im = 2.0 * x * y;
    let q = re * re + im * im;
    let dq = 4.0 * PI * (x * re + y * im);
    -(d / 4.0) * q.powf(-d / 4.0 - 1.0) * dq
}

fn gauss_legendre_16() -> &'static [(f64, f64); 16] {
    static NODES: OnceLock<[(f64, f64); 16]> = OnceLock::new();
    NODES.get_or_init(|| {
        const N: usize = 16;
        let mut out = [(0.0, 0.0); N];
        for (i, slot) in out.iter_mut().enumerate() {
            let mut x = (PI * (i as f64 + 0.75) / (N as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (mut p0, mut p1) = (1.0, x);
                for n in 2..=N {
                    let p2 = ((2 * n - 1) as f64 * x * p1 - (n - 1) as f64 * p0) / n as f64;
                    p0 = p1;
                    p1 = p2;
                }
                dp = N as f64 * (x * p1 - p0) / (x * x - 1.0);
                let step = p1 / dp;
                x -= step;
                if step.abs() < 1e-16 {
                    break;
                }
            }
            *slot = (x, 2.0 / ((1.0 - x * x) * dp * dp));
        }
        out
    })
}

fn integrate(a: f64, b: f64, f: impl Fn(f64) -> f64) -> f64 {
    let nodes = gauss_legendre_16();
    let mut total = NeumaierSum::default();
    let mut lo = a;
    while lo < b {
        let hi = (2.0 * lo).min(b);
        let (mid, half) = (0.5 * (lo + hi), 0.5 * (hi - lo));
        let panel: f64 = nodes.iter().map(|&(x, w)| w * f(mid + half * x)).sum();
        total.add(panel * half);
        lo = hi;
    }
    total.value()
}

/// `Σ_{m=a}^{b} (m/a)^{-s}` over `m = a, a+1, …, b` by Euler–Maclaurin.
fn scaled_power_sum(s: f64, a: f64, b: f64) -> f64 {
    let r = b / a;
    let rs = (-s * r.ln()).exp();
    let integral = a * (1.0 - r * rs) / (s - 1.0);
    let ends = 0.5 * (1.0 + rs);
    let p1 = s;
    let p3 = s * (s + 1.0) * (s + 2.0);
    let p5 = p3 * (s + 3.0) * (s + 4.0);
    let c1 = -(1.0 / 12.0) * p1 * (rs / b - 1.0 / a);
    let c3 = (1.0 / 720.0) * p3 * (rs / b.powi(3) - 1.0 / a.powi(3));
    let c5 = -(1.0 / 30240.0) * p5 * (rs / b.powi(5) - 1.0 / a.powi(5));
    integral + ends + c1 + c3 + c5
}

/// `Σ |(πm + iy)² + K²|^{-d/2}` over `m = a, a+1, …, b`.
fn run_sum(y: f64, a: f64, b: f64, d: f64, k_pi: f64) -> f64 {
    let n = (b - a).round() as u64 + 1;
    if n <= DIRECT_MAX {
        return (0..n).map(|i| h(a + i as f64, y, d, k_pi)).collect::<NeumaierSum>().value();
    }
    let mut sum = NeumaierSum::default();
    let mut m = a;
    while m < HEAD_END {
        sum.add(h(m, y, d, k_pi));
        m += 1.0;
    }
    let x = PI * m;
    let t = (y / x).powi(2);
    if t <= 0.01 && (k_pi / x).powi(2) <= 1e-17 {
        // (x² + y²)^{-d/2} = Σ_k binom(-d/2, k) y^{2k} x^{-d-2k}
        let base = x.powf(-d);
        let mut coeff = 1.0;
        let mut tk = 1.0;
        let mut tail = NeumaierSum::default();
        for k in 0..60 {
            let term = coeff * tk * scaled_power_sum(d + 2.0 * k as f64, m, b);
            tail.add(term);
            if k > 0 && term.abs() <= 1e-18 * tail.value().abs() {
                break;
            }
            coeff *= (-d / 2.0 - k as f64) / (k as f64 + 1.0);
            tk *= t;
        }
        sum.add(base * tail.value());
    } else {
        let hp = |u: f64| h_prime(u, y, d, k_pi);
        let h3 = |u: f64| {
            let delta = 1e-2 * u;
            (hp(u + delta) - 2.0 * hp(u) + hp(u - delta)) / (delta * delta)
        };
        sum.add(integrate(m, b, |u| h(u, y, d, k_pi)));
        sum.add(0.5 * (h(m, y, d, k_pi) + h(b, y, d, k_pi)));
        sum.add((hp(b) - hp(m)) / 12.0);
        sum.add(-(h3(b) - h3(m)) / 720.0);
    }
    sum.value()
}

/// Result of refining all parents of one generation.
struct Refined {
    runs: Vec<BoxRun>,
    box_count: u128,
    measure: f64,
    rows: u128,
    max_abs_x: f64,
}

fn refine_parents(
    parents: &[Parent],
    k: i32,
    spec: &ParabolaSpec,
    d: f64,
    keep_runs: bool,
) -> Result<Refined> {
    let annuli: Vec<Annulus> = parents.iter().map(|p| Annulus::new(p, k, spec)).collect::<Result<_>>()?;
    let rows: u128 = annuli.iter().map(|a| a.rows as u128).sum();
    if rows > MAX_ROWS {
        return Err(Error::CoverTooLarge(format!("{rows} grid rows exceed the budget of {MAX_ROWS}")));
    }
    let k_pi = (k as f64).abs() * PI;
    let mut out = Refined { runs: Vec::new(), box_count: 0, measure: 0.0, rows, max_abs_x: 0.0 };
    let mut measure = NeumaierSum::default();
    for (idx, (parent, ann)) in parents.iter().zip(&annuli).enumerate() {
        let blocks = ann.rows.div_ceil(ROW_BLOCK);
        let scale = (PI * SQRT_2 / parent.lambda).powf(d);
        let results: Vec<(Vec<BoxRun>, u128, NeumaierSum, f64)> = (0..blocks)
            .into_par_iter()
            .map(|block| {
                let mut runs = Vec::new();
                let mut count = 0u128;
                let mut sum = NeumaierSum::default();
                let mut max_x = 0.0f64;
                for j in block * ROW_BLOCK..((block + 1) * ROW_BLOCK).min(ann.rows) {
                    let Some((lo, hi)) = ann.row_columns(j) else { continue };
                    let y = j as f64 * PI;
                    let mult = if j == 0 { 1 } else { 2 };
                    count += mult * (hi - lo + 1) as u128;
                    let s = run_sum(y, lo as f64 + 0.5, hi as f64 + 0.5, d, k_pi);
                    sum.add(s * scale);
                    if j > 0 {
                        sum.add(s * scale);
                    }
                    max_x = max_x.max((hi + 1) as f64 * PI);
                    if keep_runs {
                        let (col_lo, col_hi) = if ann.side > 0 { (lo, hi) } else { (-1 - hi, -1 - lo) };
                        let run = |im: f64| BoxRun {
                            parent: idx,
                            row_center_im: im,
                            col_lo,
                            col_hi,
                            lambda_parent: parent.lambda,
                            k_pi,
                        };
                        if j > 0 {
                            runs.push(run(-y));
                        }
                        runs.push(run(y));
                    }
                }
                (runs, count, sum, max_x)
            })
            .collect();
        for (runs, count, sum, max_x) in results {
            out.runs.extend(runs);
            out.box_count += count;
            measure.merge(&sum);
            out.max_abs_x = out.max_abs_x.max(max_x);
        }
    }
    out.measure = measure.value();
    Ok(out)
}

fn check_args(map: &MapSpec, spec: &ParabolaSpec, seed_square_re: f64, generations: usize, d: f64) -> Result<i32> {
    let k = map.require_sinh("cover_refinement")?;
    if seed_square_re.is_nan() || seed_square_re < spec.xi {
        return Err(Error::Domain(format!("seed square real part {seed_square_re} is below xi = {}", spec.xi)));
    }
    if generations > 3 {
        return Err(Error::Domain(format!("at most 3 generations are supported, got {generations}")));
    }
    if !(d > 1.0 && d.is_finite()) {
        return Err(Error::Domain(format!("measure exponent must exceed 1, got {d}")));
    }
    Ok(k)
}

fn parents_of(runs: &[BoxRun], max_abs_x: f64, box_count: u128) -> Result<Vec<Parent>> {
    if max_abs_x + PI > X_MAX {
        return Err(Error::OverflowGuard { re: max_abs_x + PI });
    }
    if box_count > MAX_PARENT_BOXES {
        return Err(Error::CoverTooLarge(format!(
            "{box_count} boxes exceed the refinement budget of {MAX_PARENT_BOXES}"
        )));
    }
    Ok(runs
        .iter()
        .flat_map(|run| {
            (run.col_lo..=run.col_hi).map(move |col| Parent {
                x0: col as f64 * PI,
                y_center: run.row_center_im,
                lambda: run.lambda(col),
            })
        })
        .collect())
}

fn seed_parent(seed_square_re: f64) -> Parent {
    Parent { x0: seed_square_re, y_center: PI, lambda: 1.0 }
}

fn seed_generation(seed_square_re: f64, d: f64) -> CoverGeneration {
    let center = Complex64::new(seed_square_re + PI / 2.0, PI);
    CoverGeneration::from_boxes(0, d, vec![CoverBox { center, diameter: PI * SQRT_2 }])
}

/// Covers of `Q₀ = [seed, seed+π] × [π/2, 3π/2]` for generations `0..=generations`.
///
/// Fails with `OverflowGuard` when a box to be refined has image real parts
/// beyond the evaluation limit, and with `CoverTooLarge` when the boxes to
/// be refined or the grid rows to scan exceed the work budget.
pub fn cover_refinement(
    map: &MapSpec,
    spec: &ParabolaSpec,
    seed_square_re: f64,
    generations: usize,
    d: f64,
) -> Result<Vec<CoverGeneration>> {
    let k = check_args(map, spec, seed_square_re, generations, d)?;
    let mut out = vec![seed_generation(seed_square_re, d)];
    let mut parents = vec![seed_parent(seed_square_re)];
    for g in 1..=generations {
        let refined = refine_parents(&parents, k, spec, d, true)?;
        if g < generations {
            parents = parents_of(&refined.runs, refined.max_abs_x, refined.box_count)?;
        }
        out.push(CoverGeneration {
            generation: g,
            d,
            boxes: Vec::new(),
            runs: refined.runs,
            box_count: refined.box_count,
            measure_sum: refined.measure,
        });
    }
    Ok(out)
}

/// Box counts and measure sums of the same covers, without materialising
/// the boxes of the last generation.
pub fn cover_refinement_summary(
    map: &MapSpec,
    spec: &ParabolaSpec,
    seed_square_re: f64,
    generations: usize,
    d: f64,
) -> Result<Vec<CoverSummary>> {
    let k = check_args(map, spec, seed_square_re, generations, d)?;
    let seed = seed_generation(seed_square_re, d);
    let mut out =
        vec![CoverSummary { generation: 0, d, box_count: 1, measure_sum: seed.measure_sum, rows: 0 }];
    let mut parents = vec![seed_parent(seed_square_re)];
    for g in 1..=generations {
        let mut refined = refine_parents(&parents, k, spec, d, false)?;
        if g < generations {
            if refined.max_abs_x + PI > X_MAX {
                return Err(Error::OverflowGuard { re: refined.max_abs_x + PI });
            }
            if refined.box_count <= MAX_PARENT_BOXES {
                refined = refine_parents(&parents, k, spec, d, true)?;
            }
            parents = parents_of(&refined.runs, refined.max_abs_x, refined.box_count)?;
        }
        out.push(CoverSummary {
            generation: g,
            d,
            box_count: refined.box_count,
            measure_sum: refined.measure,
            rows: refined.rows,
        });
    }
    Ok(out)
}
