//! Inverse branches of `kπ sinh` on the half-strips `U_{n,R}`, `U_{n,L}`
//! and dynamic rays traced by pulling anchor points back along an
//! itinerary.

use std::f64::consts::{PI, TAU};

use num_complex::Complex64;

use crate::dynamics::{evaluate, ComplexValue, Itinerary, ItinerarySymbol, MapSpec, Side, EPS_AXIS, X_MAX};
use crate::error::{Error, Result};

/// Default pullback depth for landing estimates.
pub const DEFAULT_DEPTH: usize = 24;

/// Default landing tolerance.
pub const DEFAULT_LANDING_TOL: f64 = 1e-9;

/// Default real part of the anchor points.
pub const DEFAULT_ANCHOR_RE: f64 = 25.0;

/// Relative residual accepted by the forward round-trip check.
const ROUND_TRIP_TOL: f64 = 1e-9;

/// `asinh` on the closed right half-plane, accurate near 0 and for huge
/// arguments where `u²` would overflow.
fn asinh_right(u: Complex64) -> Complex64 {
    let r = u.norm();
    if r < 1e-4 {
        let u2 = u * u;
        u * (1.0 - u2 * (1.0 / 6.0 - u2 * (3.0 / 40.0)))
    } else if r > 1e150 {
        (u * 2.0).ln()
    } else {
        (u + (u * u + 1.0).sqrt()).ln()
    }
}

/// Principal inverse hyperbolic sine, using oddness on the left half-plane
/// to avoid cancellation in `u + √(u²+1)`.
pub fn asinh(u: Complex64) -> Complex64 {
    if u.re < 0.0 {
        -asinh_right(-u)
    } else {
        asinh_right(u)
    }
}

/// Whether `w` lies within the axis band of the slit removed from the image
/// of a `side` piece. The band is `ε_axis` wide, narrowed in proportion to
/// `|w|` below 1 so that targets near the fixed point 0 stay resolvable.
fn on_slit(k: i32, w: Complex64, side: Side) -> bool {
    let bound = (k as f64).abs() * PI;
    let eps = EPS_AXIS * w.norm().min(1.0);
    let on_segment = w.re.abs() <= eps && w.im.abs() <= bound + eps;
    // the horizontal boundary lines of a right half-strip map onto sign(k)·ℝ⁺
    let ray_sign = match side {
        Side::R => (k as f64).signum(),
        Side::L => -(k as f64).signum(),
    };
    let on_ray = w.im.abs() <= eps && w.re * ray_sign >= -eps;
    on_segment || on_ray
}

/// The unique `z` in the open piece `U_symbol` with `f(z) = w`.
///
/// Fails with `BranchDomain` when `w` lies on the slit removed from the
/// piece's image and with `Verification` when the forward round trip does
/// not reproduce `w`.
pub fn inverse_branch(map: &MapSpec, w: ComplexValue, symbol: ItinerarySymbol) -> Result<ComplexValue> {
    let k = map.require_sinh("inverse_branch")?;
    if !w.is_finite() {
        return Err(Error::Domain(format!("inverse_branch target is not finite: {w}")));
    }
    if on_slit(k, w, symbol.side) {
        return Err(Error::BranchDomain { re: w.re, im: w.im, depth: None });
    }
    let u = w / (k as f64 * PI);
    let z0 = asinh(u);
    // the solutions of sinh z = u are z0 + 2πim and iπ - z0 + 2πim
    let mut z = if (z0.re > 0.0) == (symbol.side == Side::R) {
        z0
    } else {
        Complex64::new(0.0, PI) - z0
    };
    let lo = TAU * symbol.strip_index as f64;
    let shift = ((lo - z.im) / TAU).ceil();
    z.im += shift * TAU;
    if z.im >= lo + TAU {
        z.im -= TAU;
    }
    if z.re.abs() > X_MAX || !symbol.contains(z, EPS_AXIS) {
        return Err(Error::Verification { re: w.re, im: w.im, residual: f64::INFINITY });
    }
    let residual = (evaluate(map, z)? - w).norm();
    if residual > ROUND_TRIP_TOL * w.norm().max(1.0) {
        return Err(Error::Verification { re: w.re, im: w.im, residual });
    }
    Ok(z)
}

/// Anchor in the middle of the strip of `symbol`, on the side of `symbol`.
pub fn anchor_point(symbol: ItinerarySymbol, anchor_re: f64) -> ComplexValue {
    Complex64::new(symbol.sign() * anchor_re, symbol.mid_height())
}

/// Points of a ray traced to finite depth, far end first.
#[derive(Debug, Clone, PartialEq)]
pub struct RayApproximation {
    pub itinerary: Itinerary,
    pub points: Vec<ComplexValue>,
    /// Pullback depth that produced each entry of `points`.
    pub depths: Vec<usize>,
    pub landing_estimate: Option<ComplexValue>,
    /// `|z_depth - z_{depth-1}|`; `+∞` when fewer than two depths were traced.
    pub landing_gap: Option<f64>,
}

impl RayApproximation {
    /// First `(point index, step)` whose forward orbit leaves the piece
    /// prescribed by the itinerary, if any.
    pub fn forward_violation(&self, map: &MapSpec) -> Result<Option<(usize, usize)>> {
        for (idx, (&z, &depth)) in self.points.iter().zip(&self.depths).enumerate() {
            let mut point = z;
            for step in 0..=depth {
                let Some(symbol) = self.itinerary.symbols.get(step) else { break };
                if !symbol.contains(point, EPS_AXIS) {
                    return Ok(Some((idx, step)));
                }
                if step < depth {
                    point = evaluate(map, point)?;
                }
            }
        }
        Ok(None)
    }
}

/// Pullback `g_{s_1} ∘ … ∘ g_{s_m}(A_m)` of the anchor for depth `m`.
fn pullback(map: &MapSpec, symbols: &[ItinerarySymbol], m: usize, anchor_re: f64) -> Result<ComplexValue> {
    let anchor_symbol = symbols.get(m).copied().unwrap_or(symbols[m - 1]);
    let mut z = anchor_point(anchor_symbol, anchor_re);
    for symbol in symbols[..m].iter().rev() {
        z = inverse_branch(map, z, *symbol).map_err(|e| match e {
            Error::BranchDomain { re, im, .. } => Error::BranchDomain { re, im, depth: Some(m) },
            other => other,
        })?;
    }
    Ok(z)
}

fn check_trace_args(map: &MapSpec, itinerary: &Itinerary, anchor_re: f64, depth: usize) -> Result<()> {
    map.require_sinh("trace_ray")?;
    if itinerary.len() < depth {
        return Err(Error::Domain(format!(
            "itinerary has {} symbols but depth {depth} was requested",
            itinerary.len()
        )));
    }
    if !(20.0..=X_MAX / 2.0).contains(&anchor_re) {
        return Err(Error::Domain(format!("anchor_re must lie in [20, {}], got {anchor_re}", X_MAX / 2.0)));
    }
    Ok(())
}

/// Traces the ray with the given itinerary to pullback depth `depth`.
pub fn trace_ray(map: &MapSpec, itinerary: &Itinerary, anchor_re: f64, depth: usize) -> Result<RayApproximation> {
    check_trace_args(map, itinerary, anchor_re, depth)?;
    let symbols = &itinerary.symbols;
    let mut raw = Vec::with_capacity(depth);
    for m in 1..=depth {
        raw.push(pullback(map, symbols, m, anchor_re)?);
    }
    let mut points: Vec<ComplexValue> = Vec::with_capacity(depth);
    let mut depths = Vec::with_capacity(depth);
    for (idx, &z) in raw.iter().enumerate() {
        if points.last() != Some(&z) {
            points.push(z);
            depths.push(idx + 1);
        }
    }
    let landing_gap = match raw.len() {
        0 => None,
        1 => Some(f64::INFINITY),
        n => Some((raw[n - 1] - raw[n - 2]).norm()),
    };
    Ok(RayApproximation {
        itinerary: itinerary.clone(),
        points,
        depths,
        landing_estimate: raw.last().copied(),
        landing_gap,
    })
}

/// Landing estimate of a ray.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Landing {
    pub point: ComplexValue,
    pub gap: f64,
    /// `gap ≤ tol`.
    pub converged: bool,
}

/// Estimates where the ray with the given itinerary lands.
pub fn landing_point(map: &MapSpec, itinerary: &Itinerary, depth: usize, tol: f64) -> Result<Landing> {
    landing_point_with_anchor(map, itinerary, depth, tol, DEFAULT_ANCHOR_RE)
}

pub fn landing_point_with_anchor(
    map: &MapSpec,
    itinerary: &Itinerary,
    depth: usize,
    tol: f64,
    anchor_re: f64,
) -> Result<Landing> {
    if tol.is_nan() || tol <= 0.0 {
        return Err(Error::Domain(format!("landing tolerance must be positive, got {tol}")));
    }
    if depth == 0 {
        return Err(Error::Domain("landing_point needs depth ≥ 1".into()));
    }
    check_trace_args(map, itinerary, anchor_re, depth)?;
    let last = pullback(map, &itinerary.symbols, depth, anchor_re)?;
    let gap = if depth == 1 {
        f64::INFINITY
    } else {
        (last - pullback(map, &itinerary.symbols, depth - 1, anchor_re)?).norm()
    };
    Ok(Landing { point: last, gap, converged: gap <= tol })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::classify;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    const F: MapSpec = MapSpec::SinhK(1);

    fn r(n: i64) -> ItinerarySymbol {
        ItinerarySymbol::new(n, Side::R)
    }

    fn l(n: i64) -> ItinerarySymbol {
        ItinerarySymbol::new(n, Side::L)
    }

    #[test]
    fn asinh_matches_library_away_from_cuts() {
        for u in [c(0.3, 0.2), c(-4.0, 1.0), c(2.0, -7.0), c(1e-6, 3e-6), c(-1e-5, -2e-5)] {
            let ours = asinh(u);
            assert!((ours.sinh() - u).norm() <= 1e-14 * u.norm().max(1e-300) + 1e-300);
        }
        let huge = c(3e200, 1e200);
        let z = asinh(huge);
        assert!(z.is_finite());
        assert!((z.re - (2.0 * huge.norm()).ln()).abs() < 1e-12);
    }

    #[test]
    fn round_trip_recovers_point() {
        let z = c(2.0, 1.0);
        let w = evaluate(&F, z).unwrap();
        let back = inverse_branch(&F, w, r(0)).unwrap();
        assert!((back - z).norm() <= 1e-9);
    }

    #[test]
    fn negative_real_target_for_right_piece() {
        let z = inverse_branch(&F, c(-5.0, 0.0), r(0)).unwrap();
        assert!(z.re > 0.0 && z.im > 0.0 && z.im < TAU);
        assert!((evaluate(&F, z).unwrap() - c(-5.0, 0.0)).norm() < 1e-12);
        // it lies on iπ + ℝ⁺
        assert!((z.im - PI).abs() < 1e-12);
    }

    #[test]
    fn slits_rejected() {
        assert!(matches!(inverse_branch(&F, c(5.0, 0.0), r(0)), Err(Error::BranchDomain { .. })));
        assert!(matches!(inverse_branch(&F, c(0.0, 2.0), r(3)), Err(Error::BranchDomain { .. })));
        assert!(matches!(inverse_branch(&F, c(-5.0, 0.0), l(0)), Err(Error::BranchDomain { .. })));
        assert!(inverse_branch(&F, c(5.0, 0.0), l(2)).is_ok());
        // k < 0 swaps the rays
        let g = MapSpec::SinhK(-2);
        assert!(matches!(inverse_branch(&g, c(-5.0, 0.0), r(0)), Err(Error::BranchDomain { .. })));
        assert!(inverse_branch(&g, c(5.0, 0.0), r(0)).is_ok());
        // the imaginary axis beyond the segment is admissible
        assert!(inverse_branch(&F, c(0.0, 5.0), r(1)).is_ok());
        assert!(inverse_branch(&F, c(0.0, -5.0), l(-3)).is_ok());
    }

    #[test]
    fn other_maps_rejected() {
        assert!(matches!(
            inverse_branch(&MapSpec::SineK(1), c(-5.0, 0.0), r(0)),
            Err(Error::UnsupportedMap(_))
        ));
    }

    #[test]
    fn depth_zero_is_empty() {
        let it = Itinerary::constant(r(0), 5);
        let ray = trace_ray(&F, &it, 25.0, 0).unwrap();
        assert!(ray.points.is_empty());
        assert_eq!(ray.landing_estimate, None);
    }

    #[test]
    fn trace_argument_checks() {
        let it = Itinerary::constant(r(0), 5);
        assert!(trace_ray(&F, &it, 25.0, 6).is_err());
        assert!(trace_ray(&F, &it, 10.0, 3).is_err());
        assert!(trace_ray(&F, &it, 400.0, 3).is_err());
        assert!(landing_point(&F, &it, 3, 0.0).is_err());
    }

    #[test]
    fn constant_right_ray_tends_to_zero() {
        let it = Itinerary::constant(r(0), 12);
        let ray = trace_ray(&F, &it, 25.0, 12).unwrap();
        assert_eq!(ray.points.len(), 12);
        assert_eq!(ray.forward_violation(&F).unwrap(), None);
        for pair in ray.points.windows(2) {
            assert!(pair[1].norm() < pair[0].norm());
        }
        assert!(ray.points.iter().all(|z| r(0).contains_open(*z)));
        assert!(ray.points[11].norm() < 1e-4);
    }

    #[test]
    fn alternating_ray_regression() {
        let symbols: Vec<_> = (0..10).map(|i| if i % 2 == 0 { r(0) } else { l(0) }).collect();
        let it = Itinerary::new(symbols);
        let ray = trace_ray(&F, &it, 25.0, 10).unwrap();
        assert_eq!(ray.forward_violation(&F).unwrap(), None);
        let expected = [
            c(2.77887300098628, 3.0175350773463743),
            c(0.9784585121659802, 2.456561199091153),
            c(0.4315663204402732, 2.3458519845606918),
        ];
        for (z, e) in ray.points.iter().zip(expected) {
            assert!((z - e).norm() < 1e-9, "{z} vs {e}");
        }
        // it lands at the fixed point iy = iπ sin y on the imaginary axis,
        // whose multiplier π cos y is negative and alternates the sides
        let it = Itinerary::new((0..24).map(|i| if i % 2 == 0 { r(0) } else { l(0) }).collect());
        let landing = landing_point(&F, &it, 24, 1e-9).unwrap();
        let p = landing.point;
        assert!(p.re.abs() < 1e-6);
        assert!((PI * p.im.sin() - p.im).abs() < 1e-6);
    }

    #[test]
    fn landing_at_zero() {
        let it: Itinerary = "0R*24".parse().unwrap();
        let landing = landing_point(&F, &it, 24, 1e-9).unwrap();
        assert!(landing.point.norm() <= 1e-9);
        assert!(landing.converged);
    }

    #[test]
    fn landing_at_i_pi() {
        let (sym, ambiguous) = classify(c(0.5, PI));
        assert_eq!((sym, ambiguous), (r(0), false));
        let (sym, _) = classify(evaluate(&F, c(0.5, PI)).unwrap());
        assert_eq!(sym, l(-1));
        let it: Itinerary = "0R,-1L*23".parse().unwrap();
        let landing = landing_point(&F, &it, 24, 1e-9).unwrap();
        assert!((landing.point - c(0.0, PI)).norm() <= 1e-6);
        assert!(evaluate(&F, landing.point).unwrap().norm() < 1e-6);
    }

    #[test]
    fn depth_one_does_not_converge() {
        let it: Itinerary = "0R*3".parse().unwrap();
        let landing = landing_point(&F, &it, 1, 1e-9).unwrap();
        assert!(landing.gap.is_infinite());
        assert!(!landing.converged);
        let ray = trace_ray(&F, &it, 25.0, 1).unwrap();
        assert_eq!(ray.landing_gap, Some(f64::INFINITY));
    }

    #[test]
    fn refinement_moves_little() {
        for text in ["0R*30", "0R,-1L*29", "1R*30", "0L,0R*29"] {
            let it: Itinerary = text.parse().unwrap();
            let a = landing_point(&F, &it, 20, 1e-9).unwrap();
            let b = landing_point(&F, &it, 30, 1e-9).unwrap_or_else(|e| panic!("{text}: {e}"));
            assert!(a.gap < 1e-6, "{text}: gap {}", a.gap);
            assert!((a.point - b.point).norm() <= 10.0 * a.gap, "{text}");
        }
    }

    #[test]
    fn unrealizable_itinerary_reports_depth() {
        // strips that drift too fast cannot be reached from mid-strip anchors
        let symbols: Vec<_> = (0..6).map(|i| r(10i64.pow(2 * i as u32 + 3))).collect();
        let it = Itinerary::new(symbols);
        match trace_ray(&F, &it, 25.0, 6) {
            Err(Error::BranchDomain { depth, .. }) => assert!(depth.is_some()),
            Err(Error::Verification { .. }) => {}
            Ok(ray) => assert_eq!(ray.forward_violation(&F).unwrap(), None),
            Err(e) => panic!("unexpected error {e}"),
        }
    }

    proptest! {
        #[test]
        fn round_trip_random_targets(
            log_mod in 0.0f64..(1e4f64).ln(),
            arg in -PI..PI,
            strip in -5i64..5,
        ) {
            let w = Complex64::from_polar(log_mod.exp(), arg);
            prop_assume!(!on_slit(1, w, Side::R));
            let z = inverse_branch(&F, w, r(strip)).unwrap();
            prop_assert!(r(strip).contains_open(z));
            prop_assert!((evaluate(&F, z).unwrap() - w).norm() <= 1e-9 * w.norm().max(1.0));
        }

        #[test]
        fn left_branch_round_trip(re in -50.0f64..50.0, im in -50.0f64..50.0, strip in -5i64..5) {
            let w = c(re, im);
            prop_assume!(!on_slit(3, w, Side::L));
            let g = MapSpec::SinhK(3);
            let z = inverse_branch(&g, w, l(strip)).unwrap();
            prop_assert!(l(strip).contains_open(z));
        }
    }
}
