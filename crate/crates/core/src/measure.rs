//! Monte Carlo estimates of the size of escaping and non-escaping sets.
//!
//! Samples are drawn from ChaCha8 streams: stream `i` of a seed serves the
//! `i`-th chunk of `CHUNK` samples (or, for stratified estimates, a chunk of
//! one stratum), so results do not depend on the number of worker threads.

use std::f64::consts::{PI, TAU};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::dimension::NeumaierSum;
use crate::dynamics::{iterate, ComplexValue, MapSpec, DEFAULT_ESCAPE_RE};
use crate::error::{Error, Result};

/// Samples per random stream.
pub const CHUNK: usize = 8192;

pub const DEFAULT_N_MAX: usize = 50;

/// Beyond this size the imaginary part no longer determines an angle mod 2π
/// to useful precision.
const ANGLE_LIMIT: f64 = 68_719_476_736.0; // 2^36

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SampleSpec {
    pub seed: u64,
    pub n_samples: usize,
    pub n_max: usize,
    pub escape_re: f64,
}

impl SampleSpec {
    pub fn new(seed: u64, n_samples: usize) -> Self {
        SampleSpec { seed, n_samples, n_max: DEFAULT_N_MAX, escape_re: DEFAULT_ESCAPE_RE }
    }

    pub fn with_n_max(self, n_max: usize) -> Self {
        SampleSpec { n_max, ..self }
    }

    pub fn with_escape_re(self, escape_re: f64) -> Self {
        SampleSpec { escape_re, ..self }
    }

    fn validate(&self) -> Result<()> {
        if self.n_samples == 0 || self.n_max == 0 {
            return Err(Error::Domain("n_samples and n_max must be at least 1".into()));
        }
        if !(self.escape_re > 0.0 && self.escape_re.is_finite()) {
            return Err(Error::Domain(format!("escape_re must be positive, got {}", self.escape_re)));
        }
        Ok(())
    }
}

/// Fraction of samples with a property, with its binomial standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DensityEstimate {
    pub fraction: f64,
    pub stderr: f64,
    pub n_samples: usize,
}

impl DensityEstimate {
    pub fn from_fraction(fraction: f64, n_samples: usize) -> Self {
        let fraction = fraction.clamp(0.0, 1.0);
        let stderr = (fraction * (1.0 - fraction) / n_samples as f64).sqrt();
        DensityEstimate { fraction, stderr, n_samples }
    }

    pub fn from_counts(hits: u64, n_samples: usize) -> Self {
        Self::from_fraction(hits as f64 / n_samples as f64, n_samples)
    }
}

/// The random stream for chunk `stream` of `seed`.
pub fn sample_stream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// `(chunk index, chunk length)` for `n` samples.
fn chunk_ranges(n: usize) -> impl IndexedParallelIterator<Item = (u64, usize)> {
    let chunks = n.div_ceil(CHUNK);
    (0..chunks).into_par_iter().map(move |c| (c as u64, CHUNK.min(n - c * CHUNK)))
}

fn uniform_point(rng: &mut ChaCha8Rng, lo: ComplexValue, width: f64, height: f64) -> ComplexValue {
    let u: f64 = rng.random();
    let v: f64 = rng.random();
    Complex64::new(lo.re + u * width, lo.im + v * height)
}

/// Counts escaping samples among `n` uniform points of a rectangle.
fn count_escaping(
    map: &MapSpec,
    lo: ComplexValue,
    width: f64,
    height: f64,
    n: usize,
    sample: &SampleSpec,
    stream_base: u64,
) -> Result<u64> {
    let counts: Vec<Result<u64>> = chunk_ranges(n)
        .map(|(c, len)| {
            let mut rng = sample_stream(sample.seed, stream_base + c);
            let mut hits = 0;
            for _ in 0..len {
                let z = uniform_point(&mut rng, lo, width, height);
                if iterate(map, z, sample.n_max, sample.escape_re)?.escaped() {
                    hits += 1;
                }
            }
            Ok(hits)
        })
        .collect();
    counts.into_iter().sum()
}

fn require_two_term(map: &MapSpec) -> Result<()> {
    map.validate()?;
    match map {
        MapSpec::Exponential(_) => {
            Err(Error::UnsupportedMap(format!("escaping density needs a sine-family or two-term map, got {map}")))
        }
        _ => Ok(()),
    }
}

/// Fraction of uniform samples of the square `[lo, lo+side]²` whose orbits escape.
pub fn escaping_density(
    map: &MapSpec,
    square_lo: ComplexValue,
    side: f64,
    sample: &SampleSpec,
) -> Result<DensityEstimate> {
    require_two_term(map)?;
    sample.validate()?;
    if !(side > 0.0 && side.is_finite()) {
        return Err(Error::Domain(format!("square side must be positive, got {side}")));
    }
    let hits = count_escaping(map, square_lo, side, side, sample.n_samples, sample, 0)?;
    Ok(DensityEstimate::from_counts(hits, sample.n_samples))
}

/// An orbit point of `λ e^z`, kept as `log|z|` and `arg z` once the
/// modulus leaves double range. Once `|Im|` exceeds `ANGLE_LIMIT` the
/// argument of the next point is no longer computable and is treated as
/// uniformly distributed.
#[derive(Debug, Clone, Copy)]
enum OrbitPoint {
    Polar { log_mod: f64, arg: f64 },
    Unresolved { log_mod: f64 },
}

/// Expected weight of surviving each of `n_steps` steps for one starting point.
fn survival_weights(lambda: Complex64, xi: f64, z: Complex64, n_steps: usize, out: &mut [f64]) {
    let (log_lambda, arg_lambda) = (lambda.norm().ln(), lambda.arg());
    let mut weight = 1.0;
    out[0] += 1.0;
    // z_1 from the exact starting point
    let mut point = OrbitPoint::Polar { log_mod: z.re + log_lambda, arg: z.im + arg_lambda };
    for slot in out.iter_mut().take(n_steps + 1).skip(1) {
        let (re, im) = match point {
            OrbitPoint::Polar { log_mod, arg } => {
                let scale = log_mod.exp();
                let re = if arg.cos() == 0.0 { 0.0 } else { scale * arg.cos() };
                let im = if arg.sin() == 0.0 { 0.0 } else { scale * arg.sin() };
                if re.is_nan() || re <= xi {
                    return;
                }
                (re, im)
            }
            OrbitPoint::Unresolved { log_mod } => {
                let c = xi * (-log_mod).exp();
                if c >= 1.0 {
                    return;
                }
                let alpha = c.acos();
                weight *= alpha / PI;
                let re = log_mod.exp() * alpha.sin() / alpha;
                (re, f64::INFINITY)
            }
        };
        *slot += weight;
        point = if im.is_finite() && im.abs() <= ANGLE_LIMIT {
            OrbitPoint::Polar { log_mod: re + log_lambda, arg: (im + arg_lambda).rem_euclid(TAU) }
        } else {
            OrbitPoint::Unresolved { log_mod: re + log_lambda }
        };
    }
}

/// Survival in the half-plane `Re z > xi` under `λ e^z`.
///
/// Samples the square `[xi, xi+2π] × [0, 2π)`; entry `j` is the fraction of
/// samples whose iterates `z_1, …, z_j` all have real part above `xi`.
/// Iterates whose argument is beyond double precision are continued in
/// distribution: the argument is taken uniform, so the point survives with
/// probability `arccos(xi/|z|)/π`.
pub fn exponential_survival(
    lambda: ComplexValue,
    xi: f64,
    n_steps: usize,
    sample: &SampleSpec,
) -> Result<Vec<DensityEstimate>> {
    sample.validate()?;
    if !(lambda.norm() > 0.0 && lambda.is_finite()) {
        return Err(Error::Domain("lambda must be nonzero".into()));
    }
    if !(xi.is_finite() && lambda.norm() * xi.exp() > xi + TAU) {
        return Err(Error::Domain(format!(
            "need |lambda| e^xi > xi + 2pi so the image of the half-plane spans the partition, got xi = {xi}"
        )));
    }
    let lo = Complex64::new(xi, 0.0);
    let chunks: Vec<Vec<f64>> = chunk_ranges(sample.n_samples)
        .map(|(c, len)| {
            let mut rng = sample_stream(sample.seed, c);
            let mut weights = vec![0.0; n_steps + 1];
            for _ in 0..len {
                let z = uniform_point(&mut rng, lo, TAU, TAU);
                survival_weights(lambda, xi, z, n_steps, &mut weights);
            }
            weights
        })
        .collect();
    let n = sample.n_samples;
    Ok((0..=n_steps)
        .map(|j| {
            let total: NeumaierSum = chunks.iter().map(|w| w[j]).collect();
            DensityEstimate::from_fraction(total.value() / n as f64, n)
        })
        .collect())
}

/// Area estimate of the non-escaping points of a truncated strip.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StripEstimate {
    pub estimate: f64,
    pub stderr: f64,
    /// `4π e^{-ξ₀/2}`.
    pub bound: f64,
}

/// Stratified estimate of the area of non-escaping points in
/// `{ξ₀ < |Re z| < re_cap, Im z ∈ im_band}`, with one stratum per unit of
/// real part on each side and `sample.n_samples` samples per stratum.
pub fn strip_complement_measure(
    map: &MapSpec,
    xi0: f64,
    im_band: (f64, f64),
    sample: &SampleSpec,
    re_cap: f64,
) -> Result<StripEstimate> {
    map.require_sinh("strip_complement_measure")?;
    sample.validate()?;
    let height = im_band.1 - im_band.0;
    if (height - TAU).abs() > 1e-9 * TAU {
        return Err(Error::Domain(format!("imaginary band must have height 2pi, got {height}")));
    }
    if !(xi0 > 0.0 && xi0.is_finite()) || !(re_cap >= xi0 && re_cap.is_finite()) {
        return Err(Error::Domain(format!("need 0 < xi0 <= re_cap, got xi0 = {xi0}, re_cap = {re_cap}")));
    }
    let bound = 4.0 * PI * (-xi0 / 2.0).exp();
    let units = (re_cap - xi0).ceil() as usize;
    let mut strata = Vec::with_capacity(2 * units);
    for side in [1.0, -1.0] {
        for i in 0..units {
            let a = xi0 + i as f64;
            let b = (a + 1.0).min(re_cap);
            if b > a {
                let lo_re = if side > 0.0 { a } else { -b };
                strata.push((Complex64::new(lo_re, im_band.0), b - a));
            }
        }
    }
    let n = sample.n_samples;
    let mut estimate = NeumaierSum::default();
    let mut variance = NeumaierSum::default();
    for (s, &(lo, width)) in strata.iter().enumerate() {
        let escaped = count_escaping(map, lo, width, height, n, sample, (s as u64 + 1) << 32)?;
        let q = (n as u64 - escaped) as f64 / n as f64;
        let area = width * height;
        estimate.add(area * q);
        variance.add(area * area * q * (1.0 - q) / n as f64);
    }
    Ok(StripEstimate { estimate: estimate.value(), stderr: variance.value().sqrt(), bound })
}

/// Lower-left corners of `count` unit squares with centres uniform in the disc `|z| ≤ radius`.
pub fn random_unit_squares(seed: u64, count: usize, radius: f64) -> Vec<ComplexValue> {
    let mut rng = sample_stream(seed, u64::MAX);
    (0..count)
        .map(|_| {
            let r = radius * rng.random::<f64>().sqrt();
            let t = TAU * rng.random::<f64>();
            Complex64::from_polar(r, t) - Complex64::new(0.5, 0.5)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    const F: MapSpec = MapSpec::SinhK(1);

    #[test]
    fn stderr_formula() {
        let e = DensityEstimate::from_counts(937, 1000);
        assert!((e.stderr - (0.937f64 * 0.063 / 1000.0).sqrt()).abs() < 1e-12);
        let e = DensityEstimate::from_counts(1000, 1000);
        assert_eq!(e.stderr, 0.0);
    }

    #[test]
    fn density_lower_bound_at_six() {
        let s = SampleSpec::new(1, 20_000);
        let e = escaping_density(&F, Complex64::new(6.0, 0.0), TAU, &s).unwrap();
        assert!(e.fraction >= 1.0 - 2.0 * (-3f64).exp() - 3.0 * e.stderr, "{e:?}");
    }

    #[test]
    fn density_on_invariant_segment_is_zero() {
        let s = SampleSpec::new(2, 2000);
        let e = escaping_density(&F, Complex64::new(-5e-13, 0.5), 1e-12, &s).unwrap();
        assert_eq!(e.fraction, 0.0);
    }

    #[test]
    fn density_is_deterministic_and_monotone_in_n_max() {
        let lo = Complex64::new(-0.5, -0.5);
        let s = SampleSpec::new(3, 10_000).with_n_max(5);
        let a = escaping_density(&F, lo, 1.0, &s).unwrap();
        let b = escaping_density(&F, lo, 1.0, &s).unwrap();
        assert_eq!(a, b);
        let c = escaping_density(&F, lo, 1.0, &s.with_n_max(40)).unwrap();
        assert!(c.fraction >= a.fraction);
    }

    #[test]
    fn density_rejects_bad_input() {
        let s = SampleSpec::new(1, 10);
        assert!(escaping_density(&MapSpec::Exponential(Complex64::new(1.0, 0.0)), Complex64::new(0.0, 0.0), 1.0, &s)
            .is_err());
        assert!(escaping_density(&F, Complex64::new(0.0, 0.0), 0.0, &s).is_err());
        assert!(escaping_density(&F, Complex64::new(0.0, 0.0), 1.0, &SampleSpec::new(1, 0)).is_err());
    }

    #[test]
    fn survival_is_nested_and_halves() {
        let s = SampleSpec::new(5, 50_000);
        let est = exponential_survival(Complex64::new(1.0, 0.0), 10.0, 6, &s).unwrap();
        assert_eq!(est.len(), 7);
        assert_eq!(est[0].fraction, 1.0);
        for w in est.windows(2) {
            assert!(w[1].fraction <= w[0].fraction);
        }
        for j in 2..=5 {
            let ratio = est[j].fraction / est[j - 1].fraction;
            assert!((0.3..0.7).contains(&ratio), "step {j}: {ratio}");
        }
        assert!(exponential_survival(Complex64::new(1.0, 0.0), 1.0, 3, &s).is_err());
    }

    #[test]
    fn strip_estimate_empty_region() {
        let s = SampleSpec::new(7, 100);
        let e = strip_complement_measure(&F, 8.0, (0.0, TAU), &s, 8.0).unwrap();
        assert_eq!(e.estimate, 0.0);
        assert!((e.bound - 4.0 * PI * (-4f64).exp()).abs() < 1e-15);
        assert!(strip_complement_measure(&F, 8.0, (0.0, 1.0), &s, 20.0).is_err());
    }

    #[test]
    fn strip_estimate_below_bound() {
        let s = SampleSpec::new(7, 5000);
        let e = strip_complement_measure(&F, 8.0, (0.0, TAU), &s, 20.0).unwrap();
        assert!(e.estimate <= e.bound + 3.0 * e.stderr, "{e:?}");
    }

    #[test]
    fn unit_squares_lie_in_disc() {
        let squares = random_unit_squares(11, 50, 20.0);
        assert_eq!(squares.len(), 50);
        for lo in squares {
            assert!((lo + Complex64::new(0.5, 0.5)).norm() <= 20.0);
        }
        assert_eq!(random_unit_squares(11, 5, 20.0), random_unit_squares(11, 5, 20.0));
    }
}
