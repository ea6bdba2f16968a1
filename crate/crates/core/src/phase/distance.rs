use std::f64::consts::PI;

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use super::{ConicMap, PhaseError, PoincareSet};
use crate::Point;

pub const DEFAULT_DISTANCE_TOL: f64 = 1e-6;

const SEEDS: usize = 256;
const NEWTON_ITERS: usize = 50;
/// Refinement runs from this many of the closest seeds.
const REFINE: usize = 8;

/// How the controller's distance `d` is measured.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DistanceMetric {
    /// Nearest point on the fitted curve.
    #[default]
    Curve,
    /// Nearest of the five Poincaré points.
    Points,
}

impl DistanceMetric {
    pub fn measure(self, p: Point, map: &ConicMap, points: &PoincareSet, tol: f64) -> Result<f64, PhaseError> {
        match self {
            DistanceMetric::Curve => distance_to_conic(p, map, tol),
            DistanceMetric::Points => Ok(points
                .points()
                .iter()
                .map(|q| (p[0] - q[0]).hypot(p[1] - q[1]))
                .fold(f64::INFINITY, f64::min)),
        }
    }
}

/// Euclidean distance from `p` to the real locus of `map`, centimeters.
pub fn distance_to_conic(p: Point, map: &ConicMap, tol: f64) -> Result<f64, PhaseError> {
    nearest_point_on_conic(p, map, tol).map(|(_, d)| d)
}

/// Nearest locus point and its distance.
///
/// Seeds come from a parametric sweep for ellipses and, for every conic
/// type, from intersecting the conic with lines through `p` at evenly
/// spaced angles. The closest seeds are polished by Newton's method on
/// the Lagrange conditions `q - p = λ∇F(q)`, `F(q) = 0`; a polished point
/// is kept only if it lies on the locus within `tol`.
pub fn nearest_point_on_conic(p: Point, map: &ConicMap, tol: f64) -> Result<(Point, f64), PhaseError> {
    if !(tol > 0.0) {
        return Err(PhaseError::InvalidTolerance(tol));
    }
    if !(p[0].is_finite() && p[1].is_finite()) {
        return Err(PhaseError::InvalidMap("non-finite probe point".into()));
    }

    let mut seeds: Vec<Point> = Vec::with_capacity(3 * SEEDS);
    match EllipseFrame::of(map) {
        Some(EllipseFrame::Empty) => return Err(PhaseError::EmptyLocus),
        Some(EllipseFrame::Point(c)) => return Ok((c, dist(p, c))),
        Some(EllipseFrame::Real { center, axes, radii }) => {
            seeds.extend((0..SEEDS).map(|i| {
                let t = 2.0 * PI * i as f64 / SEEDS as f64;
                let (u, v) = (radii[0] * t.cos(), radii[1] * t.sin());
                [
                    center[0] + u * axes[0][0] + v * axes[1][0],
                    center[1] + u * axes[0][1] + v * axes[1][1],
                ]
            }));
        }
        None => {
            // A singular point (crossing of a line pair) has no usable
            // gradient; offer it directly.
            if let Some(c) = map.center() {
                if map.eval(c).abs() <= 1e-12 * (1.0 + c[0] * c[0] + c[1] * c[1]) {
                    seeds.push(c);
                }
            }
        }
    }
    ray_seeds(p, map, &mut seeds);

    if seeds.is_empty() {
        return Err(PhaseError::EmptyLocus);
    }

    seeds.sort_by(|a, b| dist(p, *a).total_cmp(&dist(p, *b)));
    let mut best = (seeds[0], dist(p, seeds[0]));
    for &seed in seeds.iter().take(REFINE) {
        if let Some(q) = refine(p, seed, map) {
            let g = map.gradient(q);
            let off_locus = map.eval(q).abs() / g[0].hypot(g[1]).max(f64::MIN_POSITIVE);
            let d = dist(p, q);
            if off_locus <= tol && d < best.1 {
                best = (q, d);
            }
        }
    }
    Ok(best)
}

fn dist(p: Point, q: Point) -> f64 {
    (p[0] - q[0]).hypot(p[1] - q[1])
}

enum EllipseFrame {
    Empty,
    Point(Point),
    Real {
        center: Point,
        axes: [[f64; 2]; 2],
        radii: [f64; 2],
    },
}

impl EllipseFrame {
    /// `None` when the conic is not of ellipse type.
    fn of(map: &ConicMap) -> Option<Self> {
        let [mut a, mut b, mut c, ..] = map.coeffs();
        let scale = a * a + 0.5 * b * b + c * c;
        if map.discriminant() <= 1e-9 * scale {
            return None;
        }
        let center = map.center()?;
        let mut k = map.eval(center);
        if a < 0.0 {
            (a, b, c, k) = (-a, -b, -c, -k);
        }
        if k.abs() <= 1e-12 * (1.0 + center[0] * center[0] + center[1] * center[1]) {
            return Some(EllipseFrame::Point(center));
        }
        if k > 0.0 {
            return Some(EllipseFrame::Empty);
        }
        // Eigen-decomposition of [[a, b/2], [b/2, c]].
        let half_b = 0.5 * b;
        let mean = 0.5 * (a + c);
        let rad = (0.25 * (a - c) * (a - c) + half_b * half_b).sqrt();
        let (l1, l2) = (mean + rad, mean - rad);
        let angle = 0.5 * b.atan2(a - c);
        let v1 = [angle.cos(), angle.sin()];
        let v2 = [-angle.sin(), angle.cos()];
        Some(EllipseFrame::Real {
            center,
            axes: [v1, v2],
            radii: [(-k / l1).sqrt(), (-k / l2).sqrt()],
        })
    }
}

/// Intersections of the conic with lines through `p`.
fn ray_seeds(p: Point, map: &ConicMap, out: &mut Vec<Point>) {
    let [a, b, c, ..] = map.coeffs();
    let g = map.gradient(p);
    let f0 = map.eval(p);
    for i in 0..SEEDS {
        let phi = PI * (i as f64 + 0.5) / SEEDS as f64;
        let u = [phi.cos(), phi.sin()];
        // F(p + t u) = alpha t² + beta t + gamma
        let alpha = a * u[0] * u[0] + b * u[0] * u[1] + c * u[1] * u[1];
        let beta = g[0] * u[0] + g[1] * u[1];
        let gamma = f0;
        let mut push = |t: f64| {
            if t.is_finite() {
                out.push([p[0] + t * u[0], p[1] + t * u[1]]);
            }
        };
        if alpha.abs() <= 1e-14 * (beta.abs() + gamma.abs()).max(1e-300) {
            if beta != 0.0 {
                push(-gamma / beta);
            }
            continue;
        }
        let mut disc = beta * beta - 4.0 * alpha * gamma;
        if disc < 0.0 {
            if disc >= -1e-12 * (beta * beta + (4.0 * alpha * gamma).abs()) {
                disc = 0.0;
            } else {
                continue;
            }
        }
        let sq = disc.sqrt();
        let qv = -0.5 * (beta + beta.signum() * sq);
        if qv != 0.0 {
            push(qv / alpha);
            push(gamma / qv);
        } else {
            push(0.0);
        }
    }
}

/// Newton iteration on `(q, λ)` for the stationarity conditions of
/// `|q - p|²` on `F = 0`.
fn refine(p: Point, seed: Point, map: &ConicMap) -> Option<Point> {
    let [a, b, c, ..] = map.coeffs();
    let g0 = map.gradient(seed);
    let gn = g0[0] * g0[0] + g0[1] * g0[1];
    if gn == 0.0 {
        return None;
    }
    let lambda0 = ((seed[0] - p[0]) * g0[0] + (seed[1] - p[1]) * g0[1]) / gn;
    let mut x = Vector3::new(seed[0], seed[1], lambda0);
    let scale = 1.0 + p[0].abs() + p[1].abs();

    for _ in 0..NEWTON_ITERS {
        let q = [x[0], x[1]];
        let lam = x[2];
        let g = map.gradient(q);
        let r = Vector3::new(q[0] - p[0] - lam * g[0], q[1] - p[1] - lam * g[1], map.eval(q));
        let jac = Matrix3::new(
            1.0 - 2.0 * a * lam,
            -b * lam,
            -g[0],
            -b * lam,
            1.0 - 2.0 * c * lam,
            -g[1],
            g[0],
            g[1],
            0.0,
        );
        let step = jac.lu().solve(&r)?;
        x -= step;
        if !x.iter().all(|v| v.is_finite()) {
            return None;
        }
        if step[0].abs() + step[1].abs() <= 1e-15 * (scale + x[0].abs() + x[1].abs()) {
            break;
        }
    }
    Some([x[0], x[1]])
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const TOL: f64 = DEFAULT_DISTANCE_TOL;

    /// Dense sampling of an axis-aligned ellipse; independent of the solver.
    fn sampled_distance(p: Point, rx: f64, ry: f64, n: usize) -> f64 {
        (0..n)
            .map(|i| {
                let t = 2.0 * PI * i as f64 / n as f64;
                dist(p, [rx * t.cos(), ry * t.sin()])
            })
            .fold(f64::INFINITY, f64::min)
    }

    #[test]
    fn radial_distance_to_circle() {
        let circle = ConicMap::ellipse([0.0, 0.0], 1.0, 1.0).unwrap();
        assert!((distance_to_conic([2.0, 0.0], &circle, TOL).unwrap() - 1.0).abs() < 1e-12);
        assert!((distance_to_conic([0.0, 0.0], &circle, TOL).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn points_on_the_curve() {
        let m = ConicMap::ellipse([0.3, -0.2], 2.0, 0.7).unwrap();
        for i in 0..50 {
            let t = i as f64 * 0.37;
            let p = [0.3 + 2.0 * t.cos(), -0.2 + 0.7 * t.sin()];
            assert!(distance_to_conic(p, &m, TOL).unwrap() < TOL);
        }
    }

    #[test]
    fn interior_probe_off_the_axis() {
        // x²/4 + y² = 1 from (0, 0.5): the off-axis stationary point at
        // sin θ = -1/6 is farther than the vertex (0, 1).
        let m = ConicMap::ellipse([0.0, 0.0], 2.0, 1.0).unwrap();
        let d = distance_to_conic([0.0, 0.5], &m, TOL).unwrap();
        assert!((d - 0.5).abs() < 1e-9);
        let off_axis = {
            let s = -1.0f64 / 6.0;
            dist([0.0, 0.5], [2.0 * (1.0 - s * s).sqrt(), s])
        };
        assert!(off_axis > d);
        assert!((sampled_distance([0.0, 0.5], 2.0, 1.0, 100_000) - d).abs() < 1e-4);
    }

    #[test]
    fn imaginary_ellipse_has_no_locus() {
        let m = ConicMap::new([1.0, 0.0, 1.0, 0.0, 0.0, 1.0]).unwrap();
        assert_eq!(distance_to_conic([0.0, 0.0], &m, TOL), Err(PhaseError::EmptyLocus));
        let parallel = ConicMap::new([1.0, 0.0, 0.0, 0.0, 0.0, 1.0]).unwrap();
        assert_eq!(distance_to_conic([0.5, 0.0], &parallel, TOL), Err(PhaseError::EmptyLocus));
    }

    #[test]
    fn single_point_conic() {
        let m = ConicMap::new([1.0, 0.0, 1.0, -2.0, 0.0, 1.0]).unwrap();
        assert!((distance_to_conic([1.0, 3.0], &m, TOL).unwrap() - 3.0).abs() < 1e-9);
    }

    #[test]
    fn line_pair_and_hyperbola() {
        let cross = ConicMap::new([0.0, 1.0, 0.0, 0.0, 0.0, 0.0]).unwrap();
        assert!((distance_to_conic([3.0, 0.5], &cross, TOL).unwrap() - 0.5).abs() < 1e-12);
        assert!(distance_to_conic([0.0, 0.0], &cross, TOL).unwrap() < 1e-12);

        // xy = 1 from the origin: nearest points (±1, ±1).
        let hyp = ConicMap::new([0.0, 1.0, 0.0, 0.0, 0.0, -1.0]).unwrap();
        assert!((distance_to_conic([0.0, 0.0], &hyp, TOL).unwrap() - 2f64.sqrt()).abs() < 1e-9);
    }

    #[test]
    fn parabola() {
        // y = x²; from (0, 2) the nearest points are at x² = 1.5.
        let m = ConicMap::new([1.0, 0.0, 0.0, 0.0, -1.0, 0.0]).unwrap();
        let expect = (1.5f64 + 0.25).sqrt();
        assert!((distance_to_conic([0.0, 2.0], &m, TOL).unwrap() - expect).abs() < 1e-9);
    }

    #[test]
    fn rejects_bad_tolerance() {
        let m = ConicMap::ellipse([0.0, 0.0], 1.0, 1.0).unwrap();
        assert_eq!(distance_to_conic([0.0, 0.0], &m, 0.0), Err(PhaseError::InvalidTolerance(0.0)));
    }

    #[test]
    fn point_metric() {
        let set = PoincareSet {
            x_max: [1.0, 0.0],
            y_max: [0.0, 1.0],
            x_min: [-1.0, 0.0],
            y_min: [0.0, -1.0],
            origin: [0.0, 0.0],
            indices: [0; 4],
        };
        let m = ConicMap::ellipse([0.0, 0.0], 1.0, 1.0).unwrap();
        let d = DistanceMetric::Points.measure([0.0, 0.4], &m, &set, TOL).unwrap();
        assert!((d - 0.4).abs() < 1e-15);
    }

    fn rotate(p: Point, th: f64, shift: Point) -> Point {
        let (s, c) = th.sin_cos();
        [c * p[0] - s * p[1] + shift[0], s * p[0] + c * p[1] + shift[1]]
    }

    proptest! {
        #[test]
        fn distance_is_nonnegative_and_matches_sampling(
            rx in 0.3f64..2.5,
            ry in 0.3f64..2.5,
            px in -4.0f64..4.0,
            py in -4.0f64..4.0,
        ) {
            let m = ConicMap::ellipse([0.0, 0.0], rx, ry).unwrap();
            let d = distance_to_conic([px, py], &m, TOL).unwrap();
            prop_assert!(d >= 0.0);
            prop_assert!((sampled_distance([px, py], rx, ry, 100_000) - d).abs() < 1e-4);
        }

        #[test]
        fn rigid_motions_commute_with_fit_and_distance(
            pts in prop::array::uniform5(prop::array::uniform2(-3.0f64..3.0)),
            probe in prop::array::uniform2(-4.0f64..4.0),
            th in 0.0f64..(2.0 * PI),
            shift in prop::array::uniform2(-5.0f64..5.0),
        ) {
            let Ok(m) = super::super::fit_conic_points(&pts) else { return Ok(()) };
            let moved = pts.map(|p| rotate(p, th, shift));
            let Ok(m2) = super::super::fit_conic_points(&moved) else { return Ok(()) };
            let d1 = distance_to_conic(probe, &m, TOL);
            let d2 = distance_to_conic(rotate(probe, th, shift), &m2, TOL);
            match (d1, d2) {
                (Ok(a), Ok(b)) => prop_assert!((a - b).abs() < 1e-6, "{a} vs {b}"),
                (a, b) => prop_assert!(false, "{a:?} / {b:?}"),
            }
        }
    }
}
