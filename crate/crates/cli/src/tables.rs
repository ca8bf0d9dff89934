//! CSV tables for the estimators.
//!
//! Floating-point cells use 17 significant digits (`{:.16e}`), integers are
//! written in full, and records end with a bare LF.

use std::f64::consts::TAU;
use std::io::Write;
use std::str::FromStr;

use num_complex::Complex64;
use sinhdyn::cantor::{
    cantor_intervals, default_keep_schedule, fat_cantor, karpinska_generate, middle_third, product_square,
    IntervalSet, Rect,
};
use sinhdyn::dimension::{
    box_counting_dimension, box_counts, box_counts_rects, cover_refinement_summary, BoxCount,
};
use sinhdyn::dynamics::{Itinerary, MapSpec, ParabolaSpec};
use sinhdyn::measure::{escaping_density, exponential_survival, strip_complement_measure, SampleSpec};
use sinhdyn::rays::{landing_point_with_anchor, trace_ray};

use crate::config::{CliError, CliResult};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    fn new(header: &[&str]) -> Self {
        Table { header: header.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }

    fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn write<W: Write>(&self, out: W) -> CliResult<()> {
        let mut writer = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
        writer.write_record(&self.header)?;
        for row in &self.rows {
            writer.write_record(row)?;
        }
        writer.flush()?;
        Ok(())
    }

    pub fn to_bytes(&self) -> CliResult<Vec<u8>> {
        let mut buf = Vec::new();
        self.write(&mut buf)?;
        Ok(buf)
    }

    /// Column `name` of row `row`.
    pub fn cell(&self, row: usize, name: &str) -> Option<&str> {
        let col = self.header.iter().position(|h| h == name)?;
        self.rows.get(row).map(|r| r[col].as_str())
    }
}

pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn fmt_bool(b: bool) -> String {
    b.to_string()
}

/// Point sets and rectangle sets available to `boxdim`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoxSet {
    MiddleThird,
    Product,
    KarpinskaSquares,
    KarpinskaTubes,
}

impl FromStr for BoxSet {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.trim() {
            "middle-third" | "cantor" => Ok(BoxSet::MiddleThird),
            "product" => Ok(BoxSet::Product),
            "karpinska-squares" => Ok(BoxSet::KarpinskaSquares),
            "karpinska-tubes" => Ok(BoxSet::KarpinskaTubes),
            other => Err(format!(
                "unknown set `{other}` (middle-third, product, karpinska-squares, karpinska-tubes)"
            )),
        }
    }
}

impl BoxSet {
    /// Grid base whose powers are natural scales for the set.
    pub fn default_base(self) -> f64 {
        match self {
            BoxSet::MiddleThird | BoxSet::Product => 3.0,
            BoxSet::KarpinskaSquares | BoxSet::KarpinskaTubes => 2.0,
        }
    }
}

fn midpoints_1d(set: &IntervalSet) -> Vec<(f64, f64)> {
    set.midpoints().into_iter().map(|x| (x, 0.0)).collect()
}

fn rect_center(r: &Rect) -> (f64, f64) {
    ((r.x_lo + r.x_hi) / 2.0, (r.y_lo + r.y_hi) / 2.0)
}

/// Box counts at scales `base^{-m}`, `m = 1..=levels`, with the running
/// least-squares fit over the rows so far (from the fourth row on).
pub fn boxdim(set: BoxSet, depth: usize, levels: usize, base: f64) -> CliResult<Table> {
    if !(base > 1.0 && base.is_finite()) || levels == 0 {
        return Err(CliError::Argument("boxdim needs base > 1 and at least one level".into()));
    }
    let scales: Vec<f64> = (1..=levels as i32).map(|m| base.powi(-m)).collect();
    let counts: Vec<BoxCount> = match set {
        BoxSet::MiddleThird => box_counts(&midpoints_1d(&middle_third(depth)?), &scales)?,
        BoxSet::Product => {
            let squares = product_square(&middle_third(depth)?);
            box_counts(&squares.iter().map(rect_center).collect::<Vec<_>>(), &scales)?
        }
        BoxSet::KarpinskaSquares | BoxSet::KarpinskaTubes => {
            let rs = karpinska_generate(&default_keep_schedule(depth), sinhdyn::cantor::DEFAULT_TUBE_WIDTH_RATIO, depth)?;
            let rects = if set == BoxSet::KarpinskaSquares { rs.squares.clone() } else { rs.tube_rects() };
            box_counts_rects(&rects, &scales)?
        }
    };
    let mut table = Table::new(&["scale", "count", "log_inv_scale", "log_count", "slope", "r_squared"]);
    for (idx, c) in counts.iter().enumerate() {
        let (slope, r2) = if idx >= 3 {
            match box_counting_dimension(&counts[..=idx]) {
                Ok((s, r)) => (fmt_f64(s), fmt_f64(r)),
                Err(_) => (String::new(), String::new()),
            }
        } else {
            (String::new(), String::new())
        };
        table.push(vec![
            fmt_f64(c.scale),
            c.count.to_string(),
            fmt_f64((1.0 / c.scale).ln()),
            fmt_f64((c.count as f64).ln()),
            slope,
            r2,
        ]);
    }
    Ok(table)
}

fn generations_table(sets: impl Iterator<Item = IntervalSet>) -> Table {
    let mut table = Table::new(&["generation", "intervals", "measure", "min_length"]);
    for set in sets {
        let min_len = set.intervals.iter().map(|(lo, hi)| hi - lo).fold(f64::INFINITY, f64::min);
        table.push(vec![set.generation.to_string(), set.len().to_string(), fmt_f64(set.measure()), fmt_f64(min_len)]);
    }
    table
}

/// Generations `0..=depth` of the Cantor set with the given ratio schedule.
pub fn cantor(ratios: &[f64], depth: usize) -> CliResult<Table> {
    let sets: Vec<IntervalSet> = (0..=depth).map(|d| cantor_intervals(ratios, d)).collect::<Result<_, _>>()?;
    Ok(generations_table(sets.into_iter()))
}

/// Generations `0..=depth` of the fat Cantor set.
pub fn fatcantor(depth: usize) -> CliResult<Table> {
    let sets: Vec<IntervalSet> = (0..=depth).map(fat_cantor).collect::<Result<_, _>>()?;
    Ok(generations_table(sets.into_iter()))
}

/// Generations `0..=depth` of Karpińska's construction.
pub fn karpinska(depth: usize, tube_width_ratio: f64) -> CliResult<Table> {
    let keep = default_keep_schedule(depth);
    let mut table = Table::new(&["generation", "squares", "square_area", "tube_rects", "tube_width_min", "disjoint"]);
    for g in 0..=depth {
        let rs = karpinska_generate(&keep, tube_width_ratio, g)?;
        let min_width = rs.tubes.iter().map(|t| t.width).fold(f64::INFINITY, f64::min);
        table.push(vec![
            g.to_string(),
            rs.squares.len().to_string(),
            fmt_f64(rs.square_area()),
            rs.tube_rects().len().to_string(),
            fmt_f64(min_width),
            fmt_bool(rs.is_disjoint()),
        ]);
    }
    Ok(table)
}

/// Escaping fraction in a square, with the lower bound `1 - 2 e^{-ξ₀/2}`
/// for `ξ₀ = Re square_lo`.
pub fn density(map: &MapSpec, square_lo: Complex64, side: f64, sample: &SampleSpec) -> CliResult<Table> {
    let e = escaping_density(map, square_lo, side, sample)?;
    let bound = 1.0 - 2.0 * (-square_lo.re / 2.0).exp();
    let mut table = Table::new(&[
        "re_lo", "im_lo", "side", "samples", "n_max", "fraction", "stderr", "lower_bound",
    ]);
    table.push(vec![
        fmt_f64(square_lo.re),
        fmt_f64(square_lo.im),
        fmt_f64(side),
        e.n_samples.to_string(),
        sample.n_max.to_string(),
        fmt_f64(e.fraction),
        fmt_f64(e.stderr),
        fmt_f64(bound),
    ]);
    Ok(table)
}

/// Survival fractions under `λ e^z` with the reference `2^{-step}`.
pub fn survival(lambda: Complex64, xi: f64, steps: usize, sample: &SampleSpec) -> CliResult<Table> {
    let est = exponential_survival(lambda, xi, steps, sample)?;
    let mut table = Table::new(&["step", "fraction", "stderr", "log2_fraction", "reference"]);
    for (j, e) in est.iter().enumerate() {
        table.push(vec![
            j.to_string(),
            fmt_f64(e.fraction),
            fmt_f64(e.stderr),
            fmt_f64(e.fraction.log2()),
            fmt_f64(2f64.powi(-(j as i32))),
        ]);
    }
    Ok(table)
}

/// Non-escaping area of the truncated strip against `4π e^{-ξ₀/2}`.
pub fn stripbound(map: &MapSpec, xi0: &[f64], im_lo: f64, re_cap: f64, sample: &SampleSpec) -> CliResult<Table> {
    let mut table = Table::new(&["xi0", "re_cap", "samples_per_stratum", "estimate", "stderr", "bound"]);
    for &x in xi0 {
        let e = strip_complement_measure(map, x, (im_lo, im_lo + TAU), sample, re_cap)?;
        table.push(vec![
            fmt_f64(x),
            fmt_f64(re_cap),
            sample.n_samples.to_string(),
            fmt_f64(e.estimate),
            fmt_f64(e.stderr),
            fmt_f64(e.bound),
        ]);
    }
    Ok(table)
}

/// Box counts and measure sums of the refined covers, for each exponent.
pub fn cover(map: &MapSpec, spec: &ParabolaSpec, seed_re: f64, generations: usize, ds: &[f64]) -> CliResult<Table> {
    let mut table = Table::new(&["d", "generation", "box_count", "measure_sum", "ratio_to_previous"]);
    for &d in ds {
        let summary = cover_refinement_summary(map, spec, seed_re, generations, d)?;
        for (g, s) in summary.iter().enumerate() {
            let ratio = if g == 0 { String::new() } else { fmt_f64(s.measure_sum / summary[g - 1].measure_sum) };
            table.push(vec![fmt_f64(d), s.generation.to_string(), s.box_count.to_string(), fmt_f64(s.measure_sum), ratio]);
        }
    }
    Ok(table)
}

/// Points of a traced ray, far end first.
pub fn ray(map: &MapSpec, itinerary: &Itinerary, depth: usize, anchor_re: f64) -> CliResult<Table> {
    let r = trace_ray(map, itinerary, anchor_re, depth)?;
    let mut table = Table::new(&["index", "depth", "re", "im"]);
    for (idx, (z, d)) in r.points.iter().zip(&r.depths).enumerate() {
        table.push(vec![idx.to_string(), d.to_string(), fmt_f64(z.re), fmt_f64(z.im)]);
    }
    Ok(table)
}

/// Landing estimate of a ray.
pub fn land(map: &MapSpec, itinerary: &Itinerary, depth: usize, tol: f64, anchor_re: f64) -> CliResult<Table> {
    let l = landing_point_with_anchor(map, itinerary, depth, tol, anchor_re)?;
    let mut table = Table::new(&["itinerary", "depth", "re", "im", "abs", "gap", "converged"]);
    table.push(vec![
        itinerary.to_string(),
        depth.to_string(),
        fmt_f64(l.point.re),
        fmt_f64(l.point.im),
        fmt_f64(l.point.norm()),
        fmt_f64(l.gap),
        fmt_bool(l.converged),
    ]);
    Ok(table)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn boxdim_middle_third_slope() {
        let t = boxdim(BoxSet::MiddleThird, 8, 8, 3.0).unwrap();
        assert_eq!(t.rows.len(), 8);
        assert_eq!(t.cell(0, "slope"), Some(""));
        let slope: f64 = t.cell(7, "slope").unwrap().parse().unwrap();
        assert!((slope - 0.6309297535714574).abs() <= 1e-9);
        assert_eq!(t.cell(7, "count"), Some("256"));
    }

    #[test]
    fn fatcantor_last_row() {
        let t = fatcantor(10).unwrap();
        let m: f64 = t.cell(10, "measure").unwrap().parse().unwrap();
        assert!((m - (8.0 / 9.0 + 1e-10 / 9.0)).abs() <= 1e-12);
    }

    #[test]
    fn land_table() {
        let it: Itinerary = "0R*24".parse().unwrap();
        let t = land(&MapSpec::SinhK(1), &it, 24, 1e-9, 25.0).unwrap();
        let abs: f64 = t.cell(0, "abs").unwrap().parse().unwrap();
        assert!(abs <= 1e-9);
        assert_eq!(t.cell(0, "converged"), Some("true"));
    }

    #[test]
    fn float_format_has_seventeen_digits() {
        assert_eq!(fmt_f64(1.0 / 3.0), "3.3333333333333331e-1");
        assert_eq!(fmt_f64(1.0 / 3.0).parse::<f64>().unwrap(), 1.0 / 3.0);
    }

    #[test]
    fn written_csv_uses_lf() {
        let t = cantor(&[1.0 / 3.0, 1.0 / 3.0], 2).unwrap();
        let bytes = t.to_bytes().unwrap();
        let text = String::from_utf8(bytes).unwrap();
        assert!(!text.contains('\r'));
        assert!(text.starts_with("generation,intervals,measure,min_length\n0,1,"));
        assert_eq!(text.lines().count(), 4);
    }
}
