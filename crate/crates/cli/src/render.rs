//! Rasters of the dynamical plane written as binary PPM (P6).
//!
//! Pixel `(i, j)` (column `i`, row `j`, row 0 at the top) is sampled at its
//! centre; row 0 touches `im_max` and column 0 touches `re_min`.
//!
//! Palettes:
//! - escape time: an orbit escaping after `n` steps gets the fully
//!   saturated, full-value colour of hue `24·n mod 360` degrees; orbits
//!   that do not escape within `n_max` steps are black;
//! - first symbol: `SYMBOL_PALETTE[2·(strip mod 6) + side]`, side 0 for R
//!   and 1 for L;
//! - ray overlay: the escape-time image with traced rays drawn in white.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use rayon::prelude::*;
use sinhdyn::dynamics::{classify, iterate, ComplexValue, ItinerarySymbol, MapSpec, Side};

use crate::config::{CliError, CliResult};

pub type Rgb = [u8; 3];

/// Colours for `(strip mod 6, side)`; L sides are darker shades of the R colour.
pub const SYMBOL_PALETTE: [Rgb; 12] = [
    [230, 25, 75],
    [115, 12, 38],
    [60, 180, 75],
    [30, 90, 38],
    [255, 225, 25],
    [128, 112, 12],
    [0, 130, 200],
    [0, 65, 100],
    [245, 130, 48],
    [122, 65, 24],
    [145, 30, 180],
    [72, 15, 90],
];

pub const RAY_COLOR: Rgb = [255, 255, 255];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Coloring {
    EscapeTime,
    FirstSymbol,
    RayOverlay,
}

impl FromStr for Coloring {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.trim().to_ascii_lowercase().as_str() {
            "escape" | "escape-time" | "escapetime" => Ok(Coloring::EscapeTime),
            "symbol" | "first-symbol" | "firstsymbol" => Ok(Coloring::FirstSymbol),
            "rays" | "ray-overlay" | "rayoverlay" => Ok(Coloring::RayOverlay),
            other => Err(format!("unknown coloring `{other}` (escape, symbol, rays)")),
        }
    }
}

impl fmt::Display for Coloring {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Coloring::EscapeTime => "escape",
            Coloring::FirstSymbol => "symbol",
            Coloring::RayOverlay => "rays",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Window {
    pub re_min: f64,
    pub re_max: f64,
    pub im_min: f64,
    pub im_max: f64,
}

impl FromStr for Window {
    type Err = String;

    /// `re_min,re_max,im_min,im_max`.
    fn from_str(s: &str) -> Result<Self, String> {
        let parts: Vec<f64> = s
            .split(',')
            .map(|p| p.trim().parse::<f64>().map_err(|e| format!("invalid window `{s}`: {e}")))
            .collect::<Result<_, _>>()?;
        let [re_min, re_max, im_min, im_max] = parts[..] else {
            return Err(format!("window needs four numbers re_min,re_max,im_min,im_max, got `{s}`"));
        };
        Ok(Window { re_min, re_max, im_min, im_max })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RenderSpec {
    pub window: Window,
    pub width_px: usize,
    pub height_px: usize,
    pub coloring: Coloring,
    pub n_max: usize,
    pub escape_re: f64,
}

impl RenderSpec {
    pub fn validate(&self) -> CliResult<()> {
        let w = &self.window;
        let finite = [w.re_min, w.re_max, w.im_min, w.im_max].iter().all(|v| v.is_finite());
        if !finite || w.re_min >= w.re_max || w.im_min >= w.im_max {
            return Err(CliError::Argument(format!("window needs re_min < re_max and im_min < im_max, got {w:?}")));
        }
        if self.width_px == 0 || self.height_px == 0 {
            return Err(CliError::Argument("image dimensions must be at least 1".into()));
        }
        Ok(())
    }

    /// Centre of pixel `(i, j)`, computed as centre plus an integer multiple
    /// of a half pixel so that mirror pixels get exactly opposite offsets.
    pub fn pixel_center(&self, i: usize, j: usize) -> ComplexValue {
        let w = &self.window;
        let (cx, hx) = ((w.re_min + w.re_max) / 2.0, (w.re_max - w.re_min) / 2.0);
        let (cy, hy) = ((w.im_min + w.im_max) / 2.0, (w.im_max - w.im_min) / 2.0);
        let (nw, nh) = (self.width_px as f64, self.height_px as f64);
        let re = cx + (2.0 * i as f64 + 1.0 - nw) * (hx / nw);
        let im = cy - (2.0 * j as f64 + 1.0 - nh) * (hy / nh);
        Complex64::new(re, im)
    }

    /// Fractional pixel coordinates `(column, row)` of a plane point.
    pub fn to_pixel(&self, z: ComplexValue) -> (f64, f64) {
        let w = &self.window;
        let x = (z.re - w.re_min) / (w.re_max - w.re_min) * self.width_px as f64 - 0.5;
        let y = (w.im_max - z.im) / (w.im_max - w.im_min) * self.height_px as f64 - 0.5;
        (x, y)
    }
}

/// A row-major RGB raster, row 0 at the top.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Image {
    pub width: usize,
    pub height: usize,
    pub data: Vec<u8>,
}

impl Image {
    pub fn pixel(&self, i: usize, j: usize) -> Rgb {
        let k = 3 * (j * self.width + i);
        [self.data[k], self.data[k + 1], self.data[k + 2]]
    }

    fn set(&mut self, i: usize, j: usize, c: Rgb) {
        let k = 3 * (j * self.width + i);
        self.data[k..k + 3].copy_from_slice(&c);
    }

    pub fn to_ppm(&self) -> Vec<u8> {
        let mut out = format!("P6\n{} {}\n255\n", self.width, self.height).into_bytes();
        out.extend_from_slice(&self.data);
        out
    }
}

/// Fully saturated colour of the given hue in degrees.
pub fn hue_color(hue: f64) -> Rgb {
    let h = hue.rem_euclid(360.0) / 60.0;
    let x = 1.0 - ((h % 2.0) - 1.0).abs();
    let (r, g, b) = match h as u32 {
        0 => (1.0, x, 0.0),
        1 => (x, 1.0, 0.0),
        2 => (0.0, 1.0, x),
        3 => (0.0, x, 1.0),
        4 => (x, 0.0, 1.0),
        _ => (1.0, 0.0, x),
    };
    let q = |v: f64| (v * 255.0).round() as u8;
    [q(r), q(g), q(b)]
}

/// Escape-time colour; `None` for orbits that did not escape.
pub fn escape_color(steps: Option<usize>) -> Rgb {
    match steps {
        Some(n) => hue_color((24 * (n % 15)) as f64),
        None => [0, 0, 0],
    }
}

pub fn symbol_color(symbol: ItinerarySymbol) -> Rgb {
    let strip = symbol.strip_index.rem_euclid(6) as usize;
    let side = match symbol.side {
        Side::R => 0,
        Side::L => 1,
    };
    SYMBOL_PALETTE[2 * strip + side]
}

/// Renders the plane; `rays` are polylines drawn for `RayOverlay`.
pub fn render(map: &MapSpec, spec: &RenderSpec, rays: &[Vec<ComplexValue>]) -> CliResult<Image> {
    spec.validate()?;
    let row_len = 3 * spec.width_px;
    let mut data = vec![0u8; row_len * spec.height_px];
    data.par_chunks_mut(row_len).enumerate().try_for_each(|(j, row)| -> CliResult<()> {
        for i in 0..spec.width_px {
            let z = spec.pixel_center(i, j);
            let color = match spec.coloring {
                Coloring::FirstSymbol => symbol_color(classify(z).0),
                Coloring::EscapeTime | Coloring::RayOverlay => {
                    let rec = iterate(map, z, spec.n_max, spec.escape_re)?;
                    escape_color(rec.escaped().then_some(rec.steps_taken))
                }
            };
            row[3 * i..3 * i + 3].copy_from_slice(&color);
        }
        Ok(())
    })?;
    let mut image = Image { width: spec.width_px, height: spec.height_px, data };
    if spec.coloring == Coloring::RayOverlay {
        for ray in rays {
            for pair in ray.windows(2) {
                draw_segment(&mut image, spec, pair[0], pair[1]);
            }
        }
    }
    Ok(image)
}

/// Clips the segment to the pixel rectangle (Liang–Barsky).
fn clip(p: (f64, f64), q: (f64, f64), w: f64, h: f64) -> Option<((f64, f64), (f64, f64))> {
    let (dx, dy) = (q.0 - p.0, q.1 - p.1);
    let (mut t0, mut t1) = (0.0f64, 1.0f64);
    for (den, num) in [(-dx, p.0 + 0.5), (dx, w - 0.5 - p.0), (-dy, p.1 + 0.5), (dy, h - 0.5 - p.1)] {
        if den == 0.0 {
            if num < 0.0 {
                return None;
            }
        } else {
            let t = num / den;
            if den < 0.0 {
                t0 = t0.max(t);
            } else {
                t1 = t1.min(t);
            }
        }
    }
    (t0 <= t1).then_some(((p.0 + t0 * dx, p.1 + t0 * dy), (p.0 + t1 * dx, p.1 + t1 * dy)))
}

fn draw_segment(image: &mut Image, spec: &RenderSpec, a: ComplexValue, b: ComplexValue) {
    let (w, h) = (image.width as f64, image.height as f64);
    let Some((p, q)) = clip(spec.to_pixel(a), spec.to_pixel(b), w, h) else { return };
    let (mut x0, mut y0) = (p.0.round() as i64, p.1.round() as i64);
    let (x1, y1) = (q.0.round() as i64, q.1.round() as i64);
    let (dx, dy) = ((x1 - x0).abs(), -(y1 - y0).abs());
    let (sx, sy) = (if x0 < x1 { 1 } else { -1 }, if y0 < y1 { 1 } else { -1 });
    let mut err = dx + dy;
    loop {
        if (0..image.width as i64).contains(&x0) && (0..image.height as i64).contains(&y0) {
            image.set(x0 as usize, y0 as usize, RAY_COLOR);
        }
        if x0 == x1 && y0 == y1 {
            break;
        }
        let e2 = 2 * err;
        if e2 >= dy {
            err += dy;
            x0 += sx;
        }
        if e2 <= dx {
            err += dx;
            y0 += sy;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(w: usize, h: usize, coloring: Coloring) -> RenderSpec {
        RenderSpec {
            window: Window { re_min: -8.0, re_max: 8.0, im_min: -8.0, im_max: 8.0 },
            width_px: w,
            height_px: h,
            coloring,
            n_max: 50,
            escape_re: 50.0,
        }
    }

    #[test]
    fn hues() {
        assert_eq!(hue_color(0.0), [255, 0, 0]);
        assert_eq!(hue_color(120.0), [0, 255, 0]);
        assert_eq!(hue_color(240.0), [0, 0, 255]);
        assert_eq!(hue_color(24.0), [255, 102, 0]);
        assert_eq!(escape_color(None), [0, 0, 0]);
        assert_eq!(escape_color(Some(15)), escape_color(Some(0)));
    }

    #[test]
    fn pixel_centers() {
        let s = spec(4, 2, Coloring::EscapeTime);
        assert_eq!(s.pixel_center(0, 0), Complex64::new(-6.0, 4.0));
        assert_eq!(s.pixel_center(3, 1), Complex64::new(6.0, -4.0));
        let (x, y) = s.to_pixel(Complex64::new(-6.0, 4.0));
        assert!(x.abs() < 1e-12 && y.abs() < 1e-12);
        for i in 0..4 {
            assert_eq!(s.pixel_center(i, 0).re, -s.pixel_center(3 - i, 0).re);
        }
    }

    #[test]
    fn window_parsing() {
        let w: Window = "-8, 8,-4,4".parse().unwrap();
        assert_eq!(w, Window { re_min: -8.0, re_max: 8.0, im_min: -4.0, im_max: 4.0 });
        assert!("1,2,3".parse::<Window>().is_err());
        let mut s = spec(4, 4, Coloring::EscapeTime);
        s.window.re_max = -9.0;
        assert!(s.validate().is_err());
    }

    #[test]
    fn clipping() {
        assert!(clip((-10.0, -10.0), (-5.0, -5.0), 8.0, 8.0).is_none());
        let (p, q) = clip((-10.0, 3.0), (20.0, 3.0), 8.0, 8.0).unwrap();
        assert_eq!((p, q), ((-0.5, 3.0), (7.5, 3.0)));
    }

    #[test]
    fn ray_overlay_draws_white() {
        let s = spec(16, 16, Coloring::RayOverlay);
        let line = vec![Complex64::new(-7.5, 0.25), Complex64::new(7.5, 0.25)];
        let img = render(&MapSpec::SinhK(1), &s, &[line]).unwrap();
        assert!((0..16).all(|i| img.pixel(i, 7) == RAY_COLOR));
    }
}
