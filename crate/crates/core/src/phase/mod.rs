//! COP phase-space trajectory and its identified second-degree mapping.
//!
//! The "phase space" here is COP_x plotted against COP_y (position against
//! position). Five points summarize a trajectory: the extremes along each
//! axis and the origin, which after mean-centering is the trial's mean COP.
//! The unique conic through them is the identified mapping, and the
//! controller acts on the distance from the current COP to that curve.

mod conic;
mod distance;
mod logistic;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::{CopSource, IngestError, Trial};
use crate::Point;

pub use conic::{fit_conic, fit_conic_points, ConicMap, NORMALIZATION};
pub use distance::{distance_to_conic, nearest_point_on_conic, DistanceMetric, DEFAULT_DISTANCE_TOL};
pub use logistic::{logistic_iterate, LogisticParams};

/// Axis ranges below this are treated as degenerate, centimeters.
pub const DEGENERACY_TOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PhaseError {
    #[error("trajectory needs at least 2 samples, got {0}")]
    TooFewSamples(usize),
    #[error("trajectory has no extent along {axis} (range {range} cm)")]
    DegenerateTrajectory { axis: char, range: f64 },
    #[error("the five points do not determine a unique conic (rank {rank})")]
    DegenerateConfiguration { rank: usize },
    #[error("conic coefficients are invalid: {0}")]
    InvalidMap(String),
    #[error("the conic has no real points")]
    EmptyLocus,
    #[error("distance tolerance must be positive, got {0}")]
    InvalidTolerance(f64),
    #[error("logistic parameters out of range: r = {r}, x0 = {x0}")]
    InvalidLogisticParams { r: f64, x0: f64 },
    #[error(transparent)]
    Ingest(#[from] IngestError),
}

/// Mean-centered COP pairs in recording order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseTrajectory {
    pub points: Vec<Point>,
    pub dt: f64,
    /// The mean that was subtracted, in the original plate frame.
    pub mean: Point,
}

impl PhaseTrajectory {
    /// Center a COP series on its mean.
    pub fn from_cop(cop: &[Point], dt: f64) -> Result<Self, PhaseError> {
        if cop.len() < 2 {
            return Err(PhaseError::TooFewSamples(cop.len()));
        }
        let n = cop.len() as f64;
        let mean = cop
            .iter()
            .fold([0.0, 0.0], |acc, p| [acc[0] + p[0], acc[1] + p[1]]);
        let mean = [mean[0] / n, mean[1] / n];
        let points = cop.iter().map(|p| [p[0] - mean[0], p[1] - mean[1]]).collect();
        Ok(Self { points, dt, mean })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Trajectory of a trial's COP taken from `source`, with `dt = 1/sample_rate`.
pub fn build_trajectory(trial: &Trial, source: CopSource) -> Result<PhaseTrajectory, PhaseError> {
    if trial.samples.len() < 2 {
        return Err(PhaseError::TooFewSamples(trial.samples.len()));
    }
    let cop = trial.cop_series(source)?;
    PhaseTrajectory::from_cop(&cop, trial.dt())
}

/// The five points that summarize a trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PoincareSet {
    pub x_max: Point,
    pub y_max: Point,
    pub x_min: Point,
    pub y_min: Point,
    pub origin: Point,
    /// Sample indices of `x_max`, `y_max`, `x_min`, `y_min`.
    pub indices: [usize; 4],
}

impl PoincareSet {
    pub fn points(&self) -> [Point; 5] {
        [self.x_max, self.y_max, self.x_min, self.y_min, self.origin]
    }
}

/// Pick the extremes along each axis (first occurrence on ties) plus the
/// origin.
pub fn extract_poincare_points(traj: &PhaseTrajectory) -> Result<PoincareSet, PhaseError> {
    let pts = &traj.points;
    if pts.len() < 2 {
        return Err(PhaseError::TooFewSamples(pts.len()));
    }
    let argext = |axis: usize, better: fn(f64, f64) -> bool| {
        let mut best = 0;
        for (i, p) in pts.iter().enumerate().skip(1) {
            if better(p[axis], pts[best][axis]) {
                best = i;
            }
        }
        best
    };
    let ix_max = argext(0, |a, b| a > b);
    let iy_max = argext(1, |a, b| a > b);
    let ix_min = argext(0, |a, b| a < b);
    let iy_min = argext(1, |a, b| a < b);

    let x_range = pts[ix_max][0] - pts[ix_min][0];
    if !(x_range > DEGENERACY_TOL) {
        return Err(PhaseError::DegenerateTrajectory { axis: 'x', range: x_range });
    }
    let y_range = pts[iy_max][1] - pts[iy_min][1];
    if !(y_range > DEGENERACY_TOL) {
        return Err(PhaseError::DegenerateTrajectory { axis: 'y', range: y_range });
    }

    Ok(PoincareSet {
        x_max: pts[ix_max],
        y_max: pts[iy_max],
        x_min: pts[ix_min],
        y_min: pts[iy_min],
        origin: [0.0, 0.0],
        indices: [ix_max, iy_max, ix_min, iy_min],
    })
}
