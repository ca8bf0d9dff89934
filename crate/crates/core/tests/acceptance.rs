use std::f64::consts::{PI, TAU};
use std::io::Write;
use std::time::{Duration, Instant};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use sinhdyn::cantor::{default_keep_schedule, fat_cantor, karpinska_generate, middle_third, product_square};
use sinhdyn::dimension::{box_counting_dimension, box_counts, cover_refinement_summary, self_similarity_dimension};
use sinhdyn::dynamics::{evaluate, Itinerary, MapSpec, ParabolaSpec};
use sinhdyn::measure::{
    escaping_density, exponential_survival, random_unit_squares, strip_complement_measure, SampleSpec,
};
use sinhdyn::rays::{landing_point, trace_ray, DEFAULT_ANCHOR_RE};

const F: MapSpec = MapSpec::SinhK(1);

/// Prints one PASS/FAIL line (bypassing output capture) and fails the test on FAIL.
fn report(id: u32, title: &str, ok: bool, detail: String, start: Instant, limit_s: u64) {
    let elapsed = start.elapsed();
    let in_time = elapsed < Duration::from_secs(limit_s);
    let verdict = if ok && in_time { "PASS" } else { "FAIL" };
    let line = format!(
        "{verdict} criterion {id:>2} {title}: {detail} [{:.3} s, limit {limit_s} s]\n",
        elapsed.as_secs_f64()
    );
    let mut out = std::io::stdout().lock();
    out.write_all(line.as_bytes()).unwrap();
    out.flush().unwrap();
    assert!(ok && in_time, "{line}");
}

fn ols_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

#[test]
fn criterion_01_self_similarity_dimension() {
    let start = Instant::now();
    let a = self_similarity_dimension(4, 1.0 / 3.0).unwrap();
    let b = self_similarity_dimension(2, 1.0 / 3.0).unwrap();
    let (ea, eb) = (4f64.ln() / 3f64.ln(), 2f64.ln() / 3f64.ln());
    let ok = (a - ea).abs() <= 1e-12 && (b - eb).abs() <= 1e-12 && (a - 1.26).abs() < 0.005;
    report(1, "self-similarity dimension", ok, format!("(4, 1/3) -> {a:.15}, (2, 1/3) -> {b:.15}"), start, 1);
}

#[test]
fn criterion_02_box_counting_exactness() {
    let start = Instant::now();
    let set = middle_third(8).unwrap();
    let scales: Vec<f64> = (1..=8).map(|m| 3f64.powi(-m)).collect();
    let points: Vec<(f64, f64)> = set.midpoints().into_iter().map(|x| (x, 0.0)).collect();
    let counts = box_counts(&points, &scales).unwrap();
    let exact = counts.iter().zip(1..).all(|(c, m)| c.count == 1u64 << m);
    let (slope, _) = box_counting_dimension(&counts).unwrap();

    let product: Vec<(f64, f64)> = product_square(&set)
        .iter()
        .map(|r| ((r.x_lo + r.x_hi) / 2.0, (r.y_lo + r.y_hi) / 2.0))
        .collect();
    let pcounts = box_counts(&product, &scales).unwrap();
    let pexact = pcounts.iter().zip(1..).all(|(c, m)| c.count == 4u64.pow(m));
    let (pslope, _) = box_counting_dimension(&pcounts).unwrap();

    let ok = exact
        && pexact
        && (slope - 2f64.ln() / 3f64.ln()).abs() <= 1e-9
        && (pslope - 4f64.ln() / 3f64.ln()).abs() <= 1e-9;
    report(
        2,
        "box-counting exactness",
        ok,
        format!("counts 2^m: {exact}, 4^m: {pexact}, slopes {slope:.12} / {pslope:.12}"),
        start,
        10,
    );
}

#[test]
fn criterion_03_fat_cantor_measure() {
    let start = Instant::now();
    let m = fat_cantor(10).unwrap().measure();
    let expected = 1.0 - (1.0 - 1e-10) / 9.0;
    let ok = (m - expected).abs() <= 1e-12 && (m - 8.0 / 9.0).abs() < 1e-9;
    report(3, "fat Cantor measure", ok, format!("depth 10 length {m:.17}, expected {expected:.17}"), start, 1);
}

#[test]
fn criterion_04_karpinska_schedule() {
    let start = Instant::now();
    let set = karpinska_generate(&default_keep_schedule(8), 0.7, 8).unwrap();
    let area = set.square_area();
    let product: f64 = (1..=8).map(|g| 1.0 - 4f64.powi(-g)).product();
    let ok = (area - product).abs() <= 1e-12 && area > 0.5 && set.squares.len() == 4usize.pow(8);
    report(
        4,
        "Karpinska schedule",
        ok,
        format!("area {area:.15} vs product {product:.15}, {} squares", set.squares.len()),
        start,
        5,
    );
}

#[test]
fn criterion_05_cover_refinement_dichotomy() {
    let start = Instant::now();
    let spec = ParabolaSpec::new(2.0, 20.0).unwrap();
    let ratio = |d: f64| {
        let c = cover_refinement_summary(&F, &spec, 20.0, 1, d).unwrap();
        c[1].measure_sum / c[0].measure_sum
    };
    let (above, below) = (ratio(1.6), ratio(1.4));
    let ok = above < 1.0 && below > 1.0;
    report(5, "cover refinement dichotomy", ok, format!("ratio at d=1.6 {above:.6}, at d=1.4 {below:.6}"), start, 60);
}

#[test]
fn criterion_06_ray_landing() {
    let start = Instant::now();
    let zero: Itinerary = "0R*24".parse().unwrap();
    let half: Itinerary = "0R,-1L*23".parse().unwrap();
    let at_zero = landing_point(&F, &zero, 24, 1e-9).unwrap();
    let at_half = landing_point(&F, &half, 24, 1e-6).unwrap();
    let mut consistent = true;
    for it in [&zero, &half] {
        let ray = trace_ray(&F, it, DEFAULT_ANCHOR_RE, 24).unwrap();
        consistent &= ray.forward_violation(&F).unwrap().is_none();
    }
    let d0 = at_zero.point.norm();
    let d1 = (at_half.point - Complex64::new(0.0, PI)).norm();
    let ok = d0 <= 1e-9 && d1 <= 1e-6 && consistent;
    report(
        6,
        "ray landing",
        ok,
        format!("|z*| = {d0:.3e}, |z* - i pi| = {d1:.3e}, forward-consistent: {consistent}"),
        start,
        5,
    );
}

#[test]
fn criterion_07_symmetry_suite() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst = 0.0f64;
    for _ in 0..10_000 {
        let z = Complex64::new(rng.random_range(-30.0..=30.0), rng.random_range(-50.0..50.0));
        let w = evaluate(&F, z).unwrap();
        let scale = w.norm();
        let pairs = [
            (evaluate(&F, z + Complex64::new(0.0, TAU)).unwrap(), w),
            (evaluate(&F, z + Complex64::new(0.0, PI)).unwrap(), -w),
            (evaluate(&F, -z).unwrap(), -w),
            (evaluate(&F, z.conj()).unwrap(), w.conj()),
        ];
        for (a, b) in pairs {
            worst = worst.max((a - b).norm() / scale);
        }
    }
    report(7, "symmetry suite", worst <= 1e-12, format!("worst relative deviation {worst:.3e}"), start, 5);
}

#[test]
fn criterion_08_escaping_density() {
    let start = Instant::now();
    let sample = SampleSpec::new(8, 100_000);
    let six = escaping_density(&F, Complex64::new(6.0, 0.0), TAU, &sample).unwrap();
    let ten = escaping_density(&F, Complex64::new(10.0, 0.0), TAU, &sample).unwrap();
    let bound = 1.0 - 2.0 * (-3f64).exp();
    let noise = 3.0 * (six.stderr.powi(2) + ten.stderr.powi(2)).sqrt();
    let ok = six.fraction >= bound - 3.0 * six.stderr && ten.fraction >= six.fraction - noise;
    report(
        8,
        "escaping density",
        ok,
        format!("xi0=6: {:.5} (bound {bound:.5}), xi0=10: {:.5}", six.fraction, ten.fraction),
        start,
        30,
    );
}

#[test]
fn criterion_09_exponential_survival() {
    let start = Instant::now();
    let sample = SampleSpec::new(9, 1_000_000);
    let est = exponential_survival(Complex64::new(1.0, 0.0), 10.0, 6, &sample).unwrap();
    let steps: Vec<f64> = (1..=5).map(|j| j as f64).collect();
    let logs: Vec<f64> = (1..=5).map(|j| est[j].fraction.log2()).collect();
    let slope = ols_slope(&steps, &logs);
    let ok = (-1.2..=-0.8).contains(&slope);
    report(9, "exponential survival", ok, format!("log2 decay slope {slope:.4}"), start, 60);
}

#[test]
fn criterion_10_strip_bound() {
    let start = Instant::now();
    let sample = SampleSpec::new(10, 100_000);
    let at8 = strip_complement_measure(&F, 8.0, (0.0, TAU), &sample, 30.0).unwrap();
    let at12 = strip_complement_measure(&F, 12.0, (0.0, TAU), &sample, 30.0).unwrap();
    let ok = at8.estimate <= at8.bound + 3.0 * at8.stderr && at12.estimate <= at12.bound + 3.0 * at12.stderr;
    report(
        10,
        "strip complement bound",
        ok,
        format!(
            "xi0=8: {:.5} <= {:.5}, xi0=12: {:.5} <= {:.5}",
            at8.estimate, at8.bound, at12.estimate, at12.bound
        ),
        start,
        60,
    );
}

#[test]
fn criterion_11_full_measure() {
    let start = Instant::now();
    let sample = SampleSpec::new(11, 10_000).with_n_max(200);
    let mut worst = 1.0f64;
    for lo in random_unit_squares(11, 20, 20.0) {
        let e = escaping_density(&F, lo, 1.0, &sample).unwrap();
        worst = worst.min(e.fraction);
    }
    report(11, "full-measure corollary", worst >= 0.95, format!("smallest escaped fraction {worst:.5}"), start, 60);
}
