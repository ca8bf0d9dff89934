//! Evaluation and iteration of the two-term exponential family
//! `f(z) = a e^z + b e^-z`, its sine/hyperbolic-sine specialisations and
//! the exponential maps `λ e^z`.
//!
//! Iteration never propagates non-finite values: a point whose real part
//! exceeds the escape threshold is reported as escaped before the next
//! exponential is evaluated.

use std::collections::BTreeSet;
use std::f64::consts::{PI, TAU};
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;

use crate::error::{Error, Result};

/// A point of the complex plane. Results never hold NaN or infinities.
pub type ComplexValue = Complex64;

/// Largest |Re z| at which `exp(z)` is evaluated (e^709.8 is the f64 limit).
pub const X_MAX: f64 = 700.0;

/// Default escape threshold on the growth coordinate.
pub const DEFAULT_ESCAPE_RE: f64 = 50.0;

/// Absolute width of the band treated as lying on a partition boundary.
pub const EPS_AXIS: f64 = 1e-12;

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

/// A member of the map family.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MapSpec {
    /// `kπ sinh z`, identical to `General { a: kπ/2, b: -kπ/2 }`.
    SinhK(i32),
    /// `kπ sin z`, the hyperbolic sine conjugated by `z ↦ iz`.
    SineK(i32),
    /// `λ e^z`.
    Exponential(Complex64),
    /// `a e^z + b e^-z`.
    General { a: Complex64, b: Complex64 },
}

impl MapSpec {
    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            MapSpec::SinhK(k) | MapSpec::SineK(k) => k != 0,
            MapSpec::Exponential(l) => l.norm() > 0.0 && l.is_finite(),
            MapSpec::General { a, b } => {
                a.norm() > 0.0 && b.norm() > 0.0 && a.is_finite() && b.is_finite()
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::UnsupportedMap(format!("{self}: coefficients must be nonzero")))
        }
    }

    /// Coefficients `(a, b)` of `a e^z + b e^-z`, when the map is written in that form.
    pub fn coefficients(&self) -> Option<(Complex64, Complex64)> {
        match *self {
            MapSpec::SinhK(k) => {
                let half = k as f64 * PI / 2.0;
                Some((Complex64::new(half, 0.0), Complex64::new(-half, 0.0)))
            }
            MapSpec::General { a, b } => Some((a, b)),
            _ => None,
        }
    }

    /// `k` for the sine and hyperbolic-sine members.
    pub fn sinh_k(&self) -> Option<i32> {
        match *self {
            MapSpec::SinhK(k) | MapSpec::SineK(k) => Some(k),
            _ => None,
        }
    }

    pub fn is_sinh_family(&self) -> bool {
        self.sinh_k().is_some()
    }

    /// The coordinate along which escaping orbits grow: |Re z| for the
    /// two-term maps, |Im z| for the sine maps, and Re z for `λ e^z`
    /// (whose left half-plane is mapped close to zero).
    pub fn growth(&self, z: Complex64) -> f64 {
        match self {
            MapSpec::SineK(_) => z.im.abs(),
            MapSpec::Exponential(_) => z.re,
            _ => z.re.abs(),
        }
    }

    /// Requires `SinhK` and returns `k`.
    pub(crate) fn require_sinh(&self, op: &str) -> Result<i32> {
        self.validate()?;
        match *self {
            MapSpec::SinhK(k) => Ok(k),
            _ => Err(Error::UnsupportedMap(format!("{op} requires a sinh:k map, got {self}"))),
        }
    }
}

impl fmt::Display for MapSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MapSpec::SinhK(k) => write!(f, "sinh:k={k}"),
            MapSpec::SineK(k) => write!(f, "sin:k={k}"),
            MapSpec::Exponential(l) => write!(f, "exp:lambda={}", fmt_complex(*l)),
            MapSpec::General { a, b } => {
                write!(f, "general:a={},b={}", fmt_complex(*a), fmt_complex(*b))
            }
        }
    }
}

fn fmt_complex(z: Complex64) -> String {
    if z.im == 0.0 {
        format!("{}", z.re)
    } else {
        format!("{}{:+}i", z.re, z.im)
    }
}

/// Parses `1`, `-2.5`, `0.5i`, `1+2i`, `1e-3-4i`.
pub fn parse_complex(s: &str) -> std::result::Result<Complex64, String> {
    let s = s.trim();
    let bad = || format!("invalid complex literal `{s}`");
    if s.is_empty() {
        return Err(bad());
    }
    if let Some(body) = s.strip_suffix('i') {
        // split at the last sign that is not part of an exponent
        let bytes = body.as_bytes();
        let mut split = None;
        for idx in (1..bytes.len()).rev() {
            if (bytes[idx] == b'+' || bytes[idx] == b'-') && !matches!(bytes[idx - 1], b'e' | b'E')
            {
                split = Some(idx);
                break;
            }
        }
        let (re, im) = match split {
            Some(idx) => (&body[..idx], &body[idx..]),
            None => ("0", body),
        };
        let im = match im {
            "" | "+" => 1.0,
            "-" => -1.0,
            t => t.parse::<f64>().map_err(|_| bad())?,
        };
        let re = re.parse::<f64>().map_err(|_| bad())?;
        Ok(Complex64::new(re, im))
    } else {
        s.parse::<f64>().map(|re| Complex64::new(re, 0.0)).map_err(|_| bad())
    }
}

impl FromStr for MapSpec {
    type Err = String;

    /// `sinh:k=1`, `sin:k=2`, `exp:lambda=1+0.5i`, `general:a=1,b=-2i`.
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let (family, params) = s.split_once(':').ok_or_else(|| format!("invalid map `{s}`"))?;
        let mut values = std::collections::HashMap::new();
        for kv in params.split(',').filter(|p| !p.trim().is_empty()) {
            let (k, v) = kv.split_once('=').ok_or_else(|| format!("invalid map parameter `{kv}`"))?;
            values.insert(k.trim().to_string(), v.trim().to_string());
        }
        let get = |key: &str| {
            values.get(key).cloned().ok_or_else(|| format!("map `{family}` needs `{key}=`"))
        };
        let int_k = || -> std::result::Result<i32, String> {
            get("k")?.parse::<i32>().map_err(|e| format!("invalid k: {e}"))
        };
        let map = match family.trim() {
            "sinh" => MapSpec::SinhK(int_k()?),
            "sin" | "sine" => MapSpec::SineK(int_k()?),
            "exp" => MapSpec::Exponential(parse_complex(&get("lambda")?)?),
            "general" => MapSpec::General {
                a: parse_complex(&get("a")?)?,
                b: parse_complex(&get("b")?)?,
            },
            other => return Err(format!("unknown map family `{other}`")),
        };
        map.validate().map_err(|e| e.to_string())?;
        Ok(map)
    }
}

fn finite_or_guard(w: Complex64, re: f64) -> Result<Complex64> {
    if w.is_finite() {
        Ok(w)
    } else {
        Err(Error::OverflowGuard { re })
    }
}

/// Evaluates the map at `z`.
pub fn evaluate(map: &MapSpec, z: ComplexValue) -> Result<ComplexValue> {
    map.validate()?;
    match *map {
        MapSpec::SineK(k) => Ok(-I * evaluate(&MapSpec::SinhK(k), I * z)?),
        MapSpec::Exponential(lambda) => {
            if z.re > X_MAX {
                return Err(Error::OverflowGuard { re: z.re });
            }
            finite_or_guard(lambda * z.exp(), z.re)
        }
        _ => {
            if z.re.abs() > X_MAX {
                return Err(Error::OverflowGuard { re: z.re });
            }
            let (a, b) = map.coefficients().expect("two-term map");
            finite_or_guard(a * z.exp() + b * (-z).exp(), z.re)
        }
    }
}

/// Complex derivative of the map at `z`.
pub fn derivative(map: &MapSpec, z: ComplexValue) -> Result<ComplexValue> {
    map.validate()?;
    match *map {
        // d/dz [-i g(iz)] = g'(iz)
        MapSpec::SineK(k) => derivative(&MapSpec::SinhK(k), I * z),
        MapSpec::Exponential(_) => evaluate(map, z),
        _ => {
            if z.re.abs() > X_MAX {
                return Err(Error::OverflowGuard { re: z.re });
            }
            let (a, b) = map.coefficients().expect("two-term map");
            finite_or_guard(a * z.exp() - b * (-z).exp(), z.re)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EscapeStatus {
    Escaped,
    Bounded,
    HitInvariantSet,
}

/// Invariant sets of the sine family, named in hyperbolic-sine coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InvariantSet {
    RealAxis,
    ImaginaryAxis,
    FixedPointZero,
}

/// Outcome of iterating one orbit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EscapeRecord {
    pub status: EscapeStatus,
    pub steps_taken: usize,
    pub last_point: ComplexValue,
    /// Largest value of the growth coordinate seen along the orbit.
    pub max_abs_re: f64,
    /// Set when the orbit entered an invariant set. For the real axis the
    /// orbit keeps iterating (real orbits other than 0 escape), so this
    /// field can accompany an `Escaped` status.
    pub invariant_set: Option<InvariantSet>,
}

impl EscapeRecord {
    pub fn escaped(&self) -> bool {
        self.status == EscapeStatus::Escaped
    }
}

/// Which invariant set of `kπ sinh` the point `w` (in sinh coordinates) lies on.
fn invariant_band(w: Complex64) -> Option<InvariantSet> {
    if w.norm() <= EPS_AXIS {
        Some(InvariantSet::FixedPointZero)
    } else if w.re.abs() <= EPS_AXIS {
        Some(InvariantSet::ImaginaryAxis)
    } else if w.im.abs() <= EPS_AXIS {
        Some(InvariantSet::RealAxis)
    } else {
        None
    }
}

/// Iterates the map from `z` for at most `n_max` steps.
///
/// Stops with `Escaped` as soon as the growth coordinate exceeds
/// `escape_re`. For the sine family, entering the band around the fixed
/// point 0 or the imaginary axis (whose image is the bounded invariant
/// segment `[-kπi, kπi]`) stops with `HitInvariantSet`; entering the real
/// axis is recorded but iteration continues.
pub fn iterate(map: &MapSpec, z: ComplexValue, n_max: usize, escape_re: f64) -> Result<EscapeRecord> {
    map.validate()?;
    if !(escape_re > 0.0 && escape_re <= X_MAX) {
        return Err(Error::Domain(format!("escape_re must lie in (0, {X_MAX}], got {escape_re}")));
    }
    // sinh coordinates of the current point, for the invariant-set tests
    let to_sinh = |w: Complex64| match map {
        MapSpec::SineK(_) => I * w,
        _ => w,
    };
    let mut point = z;
    let mut max_growth = map.growth(z);
    let mut invariant_set = None;
    let mut step = 0;
    loop {
        let growth = map.growth(point);
        max_growth = max_growth.max(growth);
        if growth > escape_re {
            return Ok(EscapeRecord {
                status: EscapeStatus::Escaped,
                steps_taken: step,
                last_point: point,
                max_abs_re: max_growth,
                invariant_set,
            });
        }
        if map.is_sinh_family() {
            match invariant_band(to_sinh(point)) {
                Some(set @ (InvariantSet::FixedPointZero | InvariantSet::ImaginaryAxis)) => {
                    return Ok(EscapeRecord {
                        status: EscapeStatus::HitInvariantSet,
                        steps_taken: step,
                        last_point: point,
                        max_abs_re: max_growth,
                        invariant_set: Some(set),
                    });
                }
                Some(InvariantSet::RealAxis) => {
                    invariant_set.get_or_insert(InvariantSet::RealAxis);
                }
                None => {}
            }
        }
        if step == n_max {
            return Ok(EscapeRecord {
                status: EscapeStatus::Bounded,
                steps_taken: step,
                last_point: point,
                max_abs_re: max_growth,
                invariant_set,
            });
        }
        point = evaluate(map, point)?;
        step += 1;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Side {
    R,
    L,
}

/// One letter `n_R` / `n_L`: the closed half-strip
/// `{±Re z ≥ 0, Im z ∈ [2πn, 2π(n+1)]}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ItinerarySymbol {
    pub strip_index: i64,
    pub side: Side,
}

impl ItinerarySymbol {
    pub fn new(strip_index: i64, side: Side) -> Self {
        ItinerarySymbol { strip_index, side }
    }

    /// Whether `z` lies in the closed piece, allowing `slack` outside it.
    pub fn contains(&self, z: Complex64, slack: f64) -> bool {
        let side_ok = match self.side {
            Side::R => z.re >= -slack,
            Side::L => z.re <= slack,
        };
        let lo = TAU * self.strip_index as f64;
        side_ok && z.im >= lo - slack && z.im <= lo + TAU + slack
    }

    /// Whether `z` lies in the open piece.
    pub fn contains_open(&self, z: Complex64) -> bool {
        let side_ok = match self.side {
            Side::R => z.re > 0.0,
            Side::L => z.re < 0.0,
        };
        let lo = TAU * self.strip_index as f64;
        side_ok && z.im > lo && z.im < lo + TAU
    }

    /// Mid-height of the strip.
    pub fn mid_height(&self) -> f64 {
        TAU * self.strip_index as f64 + PI
    }

    pub fn sign(&self) -> f64 {
        match self.side {
            Side::R => 1.0,
            Side::L => -1.0,
        }
    }
}

impl fmt::Display for ItinerarySymbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let side = match self.side {
            Side::R => 'R',
            Side::L => 'L',
        };
        write!(f, "{}{}", self.strip_index, side)
    }
}

impl FromStr for ItinerarySymbol {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let s = s.trim();
        let (num, side) = match s.chars().last() {
            Some('R') | Some('r') => (&s[..s.len() - 1], Side::R),
            Some('L') | Some('l') => (&s[..s.len() - 1], Side::L),
            _ => return Err(format!("invalid itinerary symbol `{s}` (expected e.g. 0R or -1L)")),
        };
        let strip_index = num
            .trim()
            .trim_start_matches('_')
            .parse::<i64>()
            .map_err(|_| format!("invalid strip index in `{s}`"))?;
        Ok(ItinerarySymbol { strip_index, side })
    }
}

/// A finite itinerary together with the steps at which the orbit sat on a
/// partition boundary.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Itinerary {
    pub symbols: Vec<ItinerarySymbol>,
    pub ambiguous_at: BTreeSet<usize>,
}

impl Itinerary {
    pub fn new(symbols: Vec<ItinerarySymbol>) -> Self {
        Itinerary { symbols, ambiguous_at: BTreeSet::new() }
    }

    /// `symbol` repeated `count` times.
    pub fn constant(symbol: ItinerarySymbol, count: usize) -> Self {
        Itinerary::new(vec![symbol; count])
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }
}

impl fmt::Display for Itinerary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        let mut idx = 0;
        while idx < self.symbols.len() {
            let sym = self.symbols[idx];
            let run = self.symbols[idx..].iter().take_while(|s| **s == sym).count();
            if !first {
                write!(f, ",")?;
            }
            first = false;
            if run > 1 {
                write!(f, "{sym}*{run}")?;
            } else {
                write!(f, "{sym}")?;
            }
            idx += run;
        }
        Ok(())
    }
}

impl FromStr for Itinerary {
    type Err = String;

    /// Comma- or space-separated symbols, each optionally repeated with
    /// `*count`: `0R*24`, `0R,-1L*23`.
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let mut symbols = Vec::new();
        for token in s.split(|c: char| c == ',' || c.is_whitespace()).filter(|t| !t.is_empty()) {
            let (sym, count) = match token.split_once('*') {
                Some((sym, count)) => (
                    sym,
                    count.parse::<usize>().map_err(|_| format!("invalid repeat count in `{token}`"))?,
                ),
                None => (token, 1),
            };
            let sym: ItinerarySymbol = sym.parse()?;
            symbols.extend(std::iter::repeat_n(sym, count));
        }
        if symbols.is_empty() {
            return Err("empty itinerary".to_string());
        }
        Ok(Itinerary::new(symbols))
    }
}

/// Partition piece of `z`, and whether `z` is within `EPS_AXIS` of a
/// partition boundary (`iℝ` or a line `Im z = 2πn`).
///
/// Tie-breaking: points on `iℝ` take the piece of `z + ε(1+i)`; points on
/// `2πn + ℝ⁺` take `n_R`, points on `2πn + ℝ⁻` take `(n-1)_L`.
pub fn classify(z: ComplexValue) -> (ItinerarySymbol, bool) {
    let n = (z.im / TAU).round();
    let on_line = (z.im - n * TAU).abs() <= EPS_AXIS;
    if z.re.abs() <= EPS_AXIS {
        let strip = ((z.im + EPS_AXIS) / TAU).floor() as i64;
        (ItinerarySymbol::new(strip, Side::R), true)
    } else if on_line {
        let n = n as i64;
        if z.re > 0.0 {
            (ItinerarySymbol::new(n, Side::R), true)
        } else {
            (ItinerarySymbol::new(n - 1, Side::L), true)
        }
    } else {
        let strip = (z.im / TAU).floor() as i64;
        let side = if z.re > 0.0 { Side::R } else { Side::L };
        (ItinerarySymbol::new(strip, side), false)
    }
}

/// Itinerary of `z` of length `depth`, truncated after the first point
/// whose real part exceeds `escape_re`.
pub fn itinerary(map: &MapSpec, z: ComplexValue, depth: usize, escape_re: f64) -> Result<Itinerary> {
    map.require_sinh("itinerary")?;
    if depth == 0 {
        return Err(Error::Domain("itinerary depth must be at least 1".into()));
    }
    let mut out = Itinerary::default();
    let mut point = z;
    for step in 0..depth {
        let (symbol, ambiguous) = classify(point);
        out.symbols.push(symbol);
        if ambiguous {
            out.ambiguous_at.insert(step);
        }
        if point.re.abs() > escape_re || step + 1 == depth {
            break;
        }
        point = evaluate(map, point)?;
    }
    Ok(out)
}

/// The truncated parabola `P_{p,ξ} = {|Re z| > ξ, |Im z| < |Re z|^{1/p}}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParabolaSpec {
    pub p: f64,
    pub xi: f64,
}

impl ParabolaSpec {
    pub fn new(p: f64, xi: f64) -> Result<Self> {
        if !(p > 1.0 && p.is_finite()) || !(xi > 0.0 && xi.is_finite()) {
            return Err(Error::Domain(format!("parabola needs p > 1 and xi > 0, got p={p}, xi={xi}")));
        }
        Ok(ParabolaSpec { p, xi })
    }
}

pub fn in_parabola(z: ComplexValue, spec: &ParabolaSpec) -> bool {
    let x = z.re.abs();
    x > spec.xi && z.im.abs() < x.powf(1.0 / spec.p)
}

/// Iterates `z` and `w` in lockstep and returns the smallest `N` such that
/// every computed iterate `f^k(z)`, `N ≤ k ≤ stop`, lies in the parabola.
///
/// `stop` is `n_max` or the last iterate before the overflow guard,
/// whichever comes first. The `w` orbit is advanced alongside while it
/// stays evaluable; only the `z` orbit determines the result.
pub fn check_horizontal_expansion(
    map: &MapSpec,
    z: ComplexValue,
    w: ComplexValue,
    spec: &ParabolaSpec,
    n_max: usize,
) -> Result<Option<usize>> {
    map.validate()?;
    if !map.is_sinh_family() {
        return Err(Error::UnsupportedMap(format!("horizontal expansion needs a sine-family map, got {map}")));
    }
    if (z - w).im.abs() >= PI {
        return Err(Error::Domain("orbits must start with |Im(z - w)| < π".into()));
    }
    let mut z_orbit = vec![z];
    let mut w_point = Some(w);
    while z_orbit.len() <= n_max {
        let last = *z_orbit.last().expect("nonempty orbit");
        match evaluate(map, last) {
            Ok(next) => z_orbit.push(next),
            Err(Error::OverflowGuard { .. }) => break,
            Err(e) => return Err(e),
        }
        w_point = w_point.and_then(|p| evaluate(map, p).ok());
    }
    let _ = w_point;
    let mut first = None;
    for (k, point) in z_orbit.iter().enumerate().rev() {
        if in_parabola(*point, spec) {
            first = Some(k);
        } else {
            break;
        }
    }
    Ok(first)
}
