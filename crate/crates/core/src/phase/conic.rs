use nalgebra::{SMatrix, SVector};
use serde::{Deserialize, Serialize};

use super::{PhaseError, PoincareSet};
use crate::Point;

/// Normalization convention carried alongside serialized coefficients.
pub const NORMALIZATION: &str = "unit-euclidean-norm;first-nonzero-positive";

/// Coefficients smaller than this (after scaling to unit norm) do not count
/// as "first nonzero" when fixing the sign.
const SIGN_EPS: f64 = 1e-12;
const RANK_EPS: f64 = 1e-10;

/// Second-degree curve `a x² + b xy + c y² + d x + e y + f = 0`.
///
/// Coefficients are kept at unit Euclidean norm with the first
/// non-negligible coefficient positive, so equal curves compare equal.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ConicJson", into = "ConicJson")]
pub struct ConicMap {
    coeffs: [f64; 6],
}

#[derive(Serialize, Deserialize)]
struct ConicJson {
    a: f64,
    b: f64,
    c: f64,
    d: f64,
    e: f64,
    f: f64,
    #[serde(default)]
    normalization: Option<String>,
}

impl From<ConicMap> for ConicJson {
    fn from(m: ConicMap) -> Self {
        let [a, b, c, d, e, f] = m.coeffs;
        ConicJson {
            a,
            b,
            c,
            d,
            e,
            f,
            normalization: Some(NORMALIZATION.to_string()),
        }
    }
}

impl TryFrom<ConicJson> for ConicMap {
    type Error = PhaseError;

    fn try_from(j: ConicJson) -> Result<Self, Self::Error> {
        ConicMap::new([j.a, j.b, j.c, j.d, j.e, j.f])
    }
}

impl ConicMap {
    pub fn new(coeffs: [f64; 6]) -> Result<Self, PhaseError> {
        if coeffs.iter().any(|c| !c.is_finite()) {
            return Err(PhaseError::InvalidMap("non-finite coefficient".into()));
        }
        let norm = coeffs.iter().map(|c| c * c).sum::<f64>().sqrt();
        if norm == 0.0 {
            return Err(PhaseError::InvalidMap("all coefficients are zero".into()));
        }
        let mut unit = coeffs.map(|c| c / norm);
        if unit[..5].iter().all(|c| c.abs() <= SIGN_EPS) {
            return Err(PhaseError::InvalidMap("no x or y terms".into()));
        }
        if let Some(first) = unit.iter().find(|c| c.abs() > SIGN_EPS) {
            if *first < 0.0 {
                unit = unit.map(|c| -c);
            }
        }
        Ok(Self { coeffs: unit })
    }

    /// Axis-aligned ellipse `(x-cx)²/rx² + (y-cy)²/ry² = 1`.
    pub fn ellipse(center: Point, rx: f64, ry: f64) -> Result<Self, PhaseError> {
        let (ax, ay) = (1.0 / (rx * rx), 1.0 / (ry * ry));
        Self::new([
            ax,
            0.0,
            ay,
            -2.0 * ax * center[0],
            -2.0 * ay * center[1],
            ax * center[0] * center[0] + ay * center[1] * center[1] - 1.0,
        ])
    }

    pub fn coeffs(&self) -> [f64; 6] {
        self.coeffs
    }

    pub fn eval(&self, p: Point) -> f64 {
        let [a, b, c, d, e, f] = self.coeffs;
        let [x, y] = p;
        a * x * x + b * x * y + c * y * y + d * x + e * y + f
    }

    pub fn gradient(&self, p: Point) -> [f64; 2] {
        let [a, b, c, d, e, _] = self.coeffs;
        let [x, y] = p;
        [2.0 * a * x + b * y + d, b * x + 2.0 * c * y + e]
    }

    /// `ac - b²/4`: positive for ellipses, negative for hyperbolas.
    pub fn discriminant(&self) -> f64 {
        let [a, b, c, ..] = self.coeffs;
        a * c - 0.25 * b * b
    }

    /// Where the gradient vanishes, when the quadratic part is invertible.
    pub fn center(&self) -> Option<Point> {
        let [a, b, c, d, e, _] = self.coeffs;
        let det = self.discriminant();
        if det.abs() <= 1e-14 {
            return None;
        }
        // Solve [2a b; b 2c] q = -[d; e].
        let det2 = 4.0 * det;
        Some([(-d * 2.0 * c + b * e) / det2, (-2.0 * a * e + b * d) / det2])
    }
}

/// Conic through the five Poincaré points.
pub fn fit_conic(pts: &PoincareSet) -> Result<ConicMap, PhaseError> {
    fit_conic_points(&pts.points())
}

/// Conic through five points: the null vector of the 5×6 design matrix with
/// rows `(x², xy, y², x, y, 1)`.
///
/// Points are first shifted to their centroid and scaled to unit RMS radius
/// so the rank test is independent of units; the null vector is mapped
/// back afterwards.
pub fn fit_conic_points(points: &[Point; 5]) -> Result<ConicMap, PhaseError> {
    if points.iter().flatten().any(|v| !v.is_finite()) {
        return Err(PhaseError::InvalidMap("non-finite input point".into()));
    }
    let cx = points.iter().map(|p| p[0]).sum::<f64>() / 5.0;
    let cy = points.iter().map(|p| p[1]).sum::<f64>() / 5.0;
    let rms = (points
        .iter()
        .map(|p| (p[0] - cx).powi(2) + (p[1] - cy).powi(2))
        .sum::<f64>()
        / 5.0)
        .sqrt();
    if !(rms > 0.0) {
        return Err(PhaseError::DegenerateConfiguration { rank: 1 });
    }
    let s = 1.0 / rms;

    let mut design = SMatrix::<f64, 6, 6>::zeros();
    for (row, p) in points.iter().enumerate() {
        let x = (p[0] - cx) * s;
        let y = (p[1] - cy) * s;
        let r = [x * x, x * y, y * y, x, y, 1.0];
        for (col, v) in r.into_iter().enumerate() {
            design[(row, col)] = v;
        }
    }

    let svd = design.svd(false, true);
    let sv = &svd.singular_values;
    let smax = sv.max();
    let rank = sv.iter().filter(|v| **v > RANK_EPS * smax).count();
    if rank < 5 {
        return Err(PhaseError::DegenerateConfiguration { rank });
    }
    let v_t = svd.v_t.expect("requested V^T");
    let (imin, _) = sv.argmin();
    let null: SVector<f64, 6> = v_t.row(imin).transpose();
    let [a, b, c, d, e, f] = [null[0], null[1], null[2], null[3], null[4], null[5]];

    // Undo x' = s(x - cx), y' = s(y - cy).
    let s2 = s * s;
    let coeffs = [
        a * s2,
        b * s2,
        c * s2,
        -2.0 * a * s2 * cx - b * s2 * cy + d * s,
        -b * s2 * cx - 2.0 * c * s2 * cy + e * s,
        a * s2 * cx * cx + b * s2 * cx * cy + c * s2 * cy * cy - d * s * cx - e * s * cy + f,
    ];
    ConicMap::new(coeffs)
}
