//! Nested elliptical stability zones on the foot.
//!
//! Coordinates are in the foot frame: `x` along the foot's long axis
//! (anterior-posterior), `y` medial-lateral, both in cm. Each boundary `k`
//! is the ellipse `x̂²/d1² + ŷ²/d2² = 1` in coordinates normalized by foot
//! length and centered at `center_frac · foot_length` along `x`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::phase::PhaseTrajectory;
use crate::Point;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ZoneError {
    #[error("empty COP series")]
    EmptySeries,
    #[error("invalid zone bounds: {0}")]
    InvalidBounds(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ZoneBounds {
    pub center_frac: f64,
    /// cm
    pub foot_length: f64,
    /// `[d1, d2]` semi-axes as fractions of foot length.
    pub high_preference: [f64; 2],
    pub low_preference: [f64; 2],
    pub undesirable: [f64; 2],
}

impl Default for ZoneBounds {
    fn default() -> Self {
        Self {
            center_frac: 0.47,
            foot_length: 20.0,
            high_preference: [0.16, 0.07],
            low_preference: [0.57, 0.43],
            undesirable: [0.97, 0.59],
        }
    }
}

impl ZoneBounds {
    pub fn validate(&self) -> Result<(), ZoneError> {
        let bad = |msg: String| Err(ZoneError::InvalidBounds(msg));
        if !(self.foot_length > 0.0 && self.foot_length.is_finite()) {
            return bad(format!("foot_length = {}", self.foot_length));
        }
        if !(self.center_frac > 0.0 && self.center_frac < 1.0) {
            return bad(format!("center_frac = {} outside (0, 1)", self.center_frac));
        }
        let axes = self.semi_axes();
        for (label, [d1, d2]) in ZoneLabel::ALL.iter().zip(axes) {
            if !(d1.is_finite() && d2 > 0.0 && d2 < d1) {
                return bad(format!("{label}: need 0 < d2 < d1, got d1 = {d1}, d2 = {d2}"));
            }
        }
        for k in 1..3 {
            if !(axes[k - 1][0] < axes[k][0] && axes[k - 1][1] < axes[k][1]) {
                return bad(format!("{} does not nest inside {}", ZoneLabel::ALL[k - 1], ZoneLabel::ALL[k]));
            }
        }
        Ok(())
    }

    pub fn semi_axes(&self) -> [[f64; 2]; 3] {
        [self.high_preference, self.low_preference, self.undesirable]
    }

    /// Zone center in the foot frame, cm.
    pub fn center(&self) -> Point {
        [self.center_frac * self.foot_length, 0.0]
    }

    /// `e_k` for the three boundaries, innermost first.
    pub fn forms(&self, p: Point) -> [f64; 3] {
        let x = (p[0] - self.center_frac * self.foot_length) / self.foot_length;
        let y = p[1] / self.foot_length;
        self.semi_axes().map(|[d1, d2]| x * x / (d1 * d1) + y * y / (d2 * d2))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ZoneLabel {
    HighPreference,
    LowPreference,
    Undesirable,
    Unstable,
}

impl ZoneLabel {
    pub const ALL: [ZoneLabel; 4] = [
        ZoneLabel::HighPreference,
        ZoneLabel::LowPreference,
        ZoneLabel::Undesirable,
        ZoneLabel::Unstable,
    ];

    pub fn short(self) -> &'static str {
        match self {
            ZoneLabel::HighPreference => "HP",
            ZoneLabel::LowPreference => "LP",
            ZoneLabel::Undesirable => "UD",
            ZoneLabel::Unstable => "US",
        }
    }
}

impl fmt::Display for ZoneLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.short())
    }
}

impl FromStr for ZoneLabel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ZoneLabel::ALL
            .into_iter()
            .find(|z| z.short() == s || format!("{z:?}") == s)
            .ok_or_else(|| format!("unknown zone label {s:?}"))
    }
}

/// Innermost zone whose boundary strictly contains `p`.
pub fn classify(p: Point, b: &ZoneBounds) -> ZoneLabel {
    let e = b.forms(p);
    match e.iter().position(|&v| v < 1.0) {
        Some(k) => ZoneLabel::ALL[k],
        None => ZoneLabel::Unstable,
    }
}

/// Fraction of samples in each zone.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Occupancy {
    #[serde(rename = "HP")]
    pub high_preference: f64,
    #[serde(rename = "LP")]
    pub low_preference: f64,
    #[serde(rename = "UD")]
    pub undesirable: f64,
    #[serde(rename = "US")]
    pub unstable: f64,
    pub samples: usize,
}

impl Occupancy {
    pub fn get(&self, z: ZoneLabel) -> f64 {
        match z {
            ZoneLabel::HighPreference => self.high_preference,
            ZoneLabel::LowPreference => self.low_preference,
            ZoneLabel::Undesirable => self.undesirable,
            ZoneLabel::Unstable => self.unstable,
        }
    }

    /// Fractions of an already classified series.
    pub fn from_labels(labels: &[ZoneLabel]) -> Result<Self, ZoneError> {
        if labels.is_empty() {
            return Err(ZoneError::EmptySeries);
        }
        let mut counts = [0usize; 4];
        for &l in labels {
            counts[l as usize] += 1;
        }
        let n = labels.len() as f64;
        let f = counts.map(|c| c as f64 / n);
        Ok(Occupancy {
            high_preference: f[0],
            low_preference: f[1],
            undesirable: f[2],
            unstable: f[3],
            samples: labels.len(),
        })
    }
}

pub fn occupancy(cop: &[Point], b: &ZoneBounds) -> Result<Occupancy, ZoneError> {
    let labels: Vec<ZoneLabel> = cop.iter().map(|&p| classify(p, b)).collect();
    Occupancy::from_labels(&labels)
}

/// Place the mean-centered trajectory so its mean sits at the zone center.
pub fn to_foot_frame(traj: &PhaseTrajectory, b: &ZoneBounds) -> Vec<Point> {
    let c = b.center();
    traj.points.iter().map(|p| [p[0] + c[0], p[1] + c[1]]).collect()
}
