//! Single-link inverted pendulum actuated by stimulation intensity, and the
//! closed loop with the intermittent controller.
//!
//! The body leans by `theta` (rad, positive anterior) about the ankle:
//!
//! ```text
//! I·θ̈ = m·g·h·sin θ − c·θ̇ − sign(θ)·τ·u + T_ankle(θ) + disturbance
//! ```
//!
//! `T_ankle` is an optional passive ankle torque `−clamp(k·θ, ±limit)`,
//! zero with default parameters. The direction of the stimulation torque
//! is taken from the lean at the start of each step and held across it.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::control::{gate_step, ControlError, ControllerLimits, ControllerState, FuzzyConfig, PidGains};
use crate::phase::{distance_to_conic, ConicMap, DEFAULT_DISTANCE_TOL};
use crate::zones::{classify, ZoneBounds, ZoneLabel};
use crate::Point;

pub const FALL_ANGLE: f64 = std::f64::consts::FRAC_PI_2;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PlantError {
    #[error("fall at t = {t:.3} s (theta = {theta:.4} rad)")]
    Fall { t: f64, theta: f64 },
    #[error("invalid plant parameters: {0}")]
    InvalidParams(String),
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),
    #[error("trace line {line}: {reason}")]
    TraceFormat { line: usize, reason: String },
    #[error(transparent)]
    Control(#[from] ControlError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PlantParams {
    /// kg
    pub mass: f64,
    /// Ankle to center of mass, m.
    pub com_height: f64,
    /// kg·m², `mass·com_height²` when unset.
    pub inertia: Option<f64>,
    /// N·m·s/rad
    pub viscous_damping: f64,
    /// N·m per unit of stimulation intensity.
    pub torque_per_intensity: f64,
    pub gravity: f64,
    /// Control period, s.
    pub dt: f64,
    /// RK4 steps per control period.
    pub substeps: usize,
    /// Passive ankle stiffness, N·m/rad.
    pub ankle_stiffness: f64,
    /// Saturation of the passive ankle torque, N·m.
    pub ankle_torque_limit: f64,
    /// Medial-lateral COP oscillation amplitude, cm.
    pub cop_y_amplitude: f64,
    /// Hz
    pub cop_y_frequency: f64,
}

impl Default for PlantParams {
    fn default() -> Self {
        Self {
            mass: 70.0,
            com_height: 1.0,
            inertia: None,
            viscous_damping: 2.5,
            torque_per_intensity: 60.0,
            gravity: 9.81,
            dt: 0.01,
            substeps: 1,
            ankle_stiffness: 0.0,
            ankle_torque_limit: 0.0,
            cop_y_amplitude: 0.0,
            cop_y_frequency: 0.5,
        }
    }
}

impl PlantParams {
    pub fn inertia(&self) -> f64 {
        self.inertia.unwrap_or(self.mass * self.com_height * self.com_height)
    }

    pub fn validate(&self) -> Result<(), PlantError> {
        let positive = [
            ("mass", self.mass),
            ("com_height", self.com_height),
            ("inertia", self.inertia()),
            ("viscous_damping", self.viscous_damping),
            ("torque_per_intensity", self.torque_per_intensity),
            ("gravity", self.gravity),
            ("dt", self.dt),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(PlantError::InvalidParams(format!("{name} = {v} must be positive")));
            }
        }
        let non_negative = [
            ("ankle_stiffness", self.ankle_stiffness),
            ("ankle_torque_limit", self.ankle_torque_limit),
            ("cop_y_amplitude", self.cop_y_amplitude),
            ("cop_y_frequency", self.cop_y_frequency),
        ];
        for (name, v) in non_negative {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(PlantError::InvalidParams(format!("{name} = {v} must be >= 0")));
            }
        }
        if self.substeps == 0 {
            return Err(PlantError::InvalidParams("substeps must be >= 1".into()));
        }
        Ok(())
    }

    fn accel(&self, theta: f64, omega: f64, actuation: f64, disturbance: f64) -> f64 {
        let passive = -(self.ankle_stiffness * theta).clamp(-self.ankle_torque_limit, self.ankle_torque_limit);
        let gravity = self.mass * self.gravity * self.com_height * theta.sin();
        (gravity - self.viscous_damping * omega - actuation + passive + disturbance) / self.inertia()
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct SimState {
    pub theta: f64,
    pub omega: f64,
    pub t: f64,
}

/// Advance one control period with `u` and `disturbance` held constant.
pub fn step_plant(s: &SimState, u: f64, disturbance: f64, p: &PlantParams) -> Result<SimState, PlantError> {
    let actuation = s.theta.signum() * p.torque_per_intensity * u;
    let actuation = if s.theta == 0.0 { 0.0 } else { actuation };
    let h = p.dt / p.substeps as f64;
    let f = |th: f64, om: f64| (om, p.accel(th, om, actuation, disturbance));
    let (mut th, mut om) = (s.theta, s.omega);
    for _ in 0..p.substeps {
        let k1 = f(th, om);
        let k2 = f(th + 0.5 * h * k1.0, om + 0.5 * h * k1.1);
        let k3 = f(th + 0.5 * h * k2.0, om + 0.5 * h * k2.1);
        let k4 = f(th + h * k3.0, om + h * k3.1);
        th += h / 6.0 * (k1.0 + 2.0 * k2.0 + 2.0 * k3.0 + k4.0);
        om += h / 6.0 * (k1.1 + 2.0 * k2.1 + 2.0 * k3.1 + k4.1);
    }
    let t = s.t + p.dt;
    if !(th.abs() < FALL_ANGLE) {
        return Err(PlantError::Fall { t, theta: th });
    }
    Ok(SimState { theta: th, omega: om, t })
}

/// COP in the map's frame, cm: the center-of-mass projection along `x`
/// and the configured medial-lateral oscillation along `y`.
pub fn cop_of_state(s: &SimState, p: &PlantParams) -> Point {
    let x = 100.0 * p.com_height * s.theta.sin();
    let y = p.cop_y_amplitude * (std::f64::consts::TAU * p.cop_y_frequency * s.t).sin();
    [x, y]
}

/// A rectangular ankle-torque pulse.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pulse {
    /// s
    pub start: f64,
    /// s
    pub duration: f64,
    /// N·m, positive pushes anterior.
    pub torque: f64,
}

impl Pulse {
    pub fn end(&self) -> f64 {
        self.start + self.duration
    }

    /// Half-open on the sample grid so a pulse covers `duration/dt` steps.
    fn active_at(&self, t: f64, dt: f64) -> bool {
        let eps = 1e-9 * dt;
        t >= self.start - eps && t < self.end() - eps
    }
}

pub fn disturbance_at(profile: &[Pulse], t: f64, dt: f64) -> f64 {
    profile.iter().filter(|p| p.active_at(t, dt)).map(|p| p.torque).sum()
}

/// Built-in reference map: an ellipse with semi-axes 0.5 cm × 0.25 cm
/// whose lowest point is the origin.
pub fn reference_map() -> ConicMap {
    ConicMap::ellipse([0.0, 0.25], 0.5, 0.25).expect("valid ellipse")
}

/// Everything a closed-loop run needs besides the map and controller
/// settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Scenario {
    pub plant: PlantParams,
    pub zones: ZoneBounds,
    pub limits: ControllerLimits,
    pub disturbances: Vec<Pulse>,
    /// s
    pub duration: f64,
    pub initial_theta: f64,
    pub initial_omega: f64,
    /// Gaussian COP sensor noise, cm. Zero disables the generator.
    pub noise_std: f64,
    pub controller_enabled: bool,
    pub distance_tol: f64,
}

impl Default for Scenario {
    fn default() -> Self {
        Self {
            plant: PlantParams::default(),
            zones: ZoneBounds::default(),
            limits: ControllerLimits::default(),
            disturbances: Vec::new(),
            duration: 30.0,
            initial_theta: 0.0,
            initial_omega: 0.0,
            noise_std: 0.0,
            controller_enabled: true,
            distance_tol: DEFAULT_DISTANCE_TOL,
        }
    }
}

impl Scenario {
    /// 30 s of quiet standing with a 15 N·m, 0.2 s anterior push at 5 s,
    /// on a body whose passive ankle holds small leans only.
    pub fn reference() -> Self {
        Self {
            plant: PlantParams {
                viscous_damping: REFERENCE_DAMPING,
                ankle_stiffness: REFERENCE_STIFFNESS,
                ankle_torque_limit: REFERENCE_TORQUE_LIMIT,
                ..PlantParams::default()
            },
            disturbances: vec![Pulse {
                start: 5.0,
                duration: 0.2,
                torque: 15.0,
            }],
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), PlantError> {
        self.plant.validate()?;
        self.zones
            .validate()
            .map_err(|e| PlantError::InvalidScenario(e.to_string()))?;
        let bad = |m: String| Err(PlantError::InvalidScenario(m));
        if !(self.duration > 0.0 && self.duration.is_finite()) {
            return bad(format!("duration = {} must be positive", self.duration));
        }
        if self.duration < self.plant.dt {
            return bad(format!("duration {} is shorter than one step", self.duration));
        }
        for (i, p) in self.disturbances.iter().enumerate() {
            if !(p.start >= 0.0 && p.duration >= 0.0 && p.end() <= self.duration + 1e-9 && p.torque.is_finite()) {
                return bad(format!("disturbance {i} must lie within [0, {}]", self.duration));
            }
        }
        if !(self.initial_theta.abs() < FALL_ANGLE && self.initial_omega.is_finite()) {
            return bad("initial state".into());
        }
        if !(self.noise_std >= 0.0 && self.noise_std.is_finite()) {
            return bad(format!("noise_std = {}", self.noise_std));
        }
        if !(self.distance_tol > 0.0) {
            return bad(format!("distance_tol = {}", self.distance_tol));
        }
        if !(self.limits.u_max > 0.0 && self.limits.windup_limit >= 0.0) {
            return bad("controller limits".into());
        }
        Ok(())
    }

    pub fn steps(&self) -> usize {
        (self.duration / self.plant.dt).round() as usize
    }
}

// Passive ankle of the reference body: stiffer than gravity near upright
// (800 vs 687 N·m/rad) but saturating at 15 N·m, so leans past about
// 1.3° still fall without stimulation.
const REFERENCE_DAMPING: f64 = 40.0;
const REFERENCE_STIFFNESS: f64 = 800.0;
const REFERENCE_TORQUE_LIMIT: f64 = 15.0;

/// Time-aligned closed-loop samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimTrace {
    pub t: Vec<f64>,
    pub cop: Vec<Point>,
    pub d: Vec<f64>,
    pub active: Vec<bool>,
    pub u: Vec<f64>,
    pub zone: Vec<ZoneLabel>,
    /// Set when the run ended in a fall, at the time it was detected.
    pub fall: Option<f64>,
}

pub const TRACE_HEADER: &str = "t,copx,copy,d,active,u,zone";

impl SimTrace {
    fn with_capacity(n: usize) -> Self {
        Self {
            t: Vec::with_capacity(n),
            cop: Vec::with_capacity(n),
            d: Vec::with_capacity(n),
            active: Vec::with_capacity(n),
            u: Vec::with_capacity(n),
            zone: Vec::with_capacity(n),
            fall: None,
        }
    }

    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    /// `[start, end)` times of each run of active samples.
    pub fn episodes(&self) -> Vec<(f64, f64)> {
        let mut out = Vec::new();
        let mut start = None;
        for (i, &a) in self.active.iter().enumerate() {
            match (a, start) {
                (true, None) => start = Some(self.t[i]),
                (false, Some(s)) => {
                    out.push((s, self.t[i]));
                    start = None;
                }
                _ => {}
            }
        }
        if let Some(s) = start {
            let end = self.t.last().copied().unwrap_or(s) + self.dt();
            out.push((s, end));
        }
        out
    }

    fn dt(&self) -> f64 {
        if self.t.len() >= 2 {
            self.t[1] - self.t[0]
        } else {
            0.0
        }
    }

    /// Time from the pulse onset to the start of the quiet stretch
    /// (controller off, COP in the high-preference zone) that lasts until
    /// the next pulse or the end of the run. `None` if the run does not
    /// settle or ended in a fall.
    pub fn recovery_time(&self, pulse: &Pulse, profile: &[Pulse]) -> Option<f64> {
        if self.fall.is_some() || self.is_empty() {
            return None;
        }
        let eps = 1e-9 * self.dt().max(1e-12);
        let horizon = profile
            .iter()
            .map(|p| p.start)
            .filter(|&s| s > pulse.start + eps)
            .fold(f64::INFINITY, f64::min);
        let quiet = |i: usize| !self.active[i] && self.zone[i] == ZoneLabel::HighPreference;
        let mut start = None;
        for i in 0..self.len() {
            let t = self.t[i];
            if t >= horizon - eps {
                break;
            }
            if t < pulse.end() - eps {
                continue;
            }
            if quiet(i) {
                start.get_or_insert(t);
            } else {
                start = None;
            }
        }
        start.map(|t| t - pulse.start)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::with_capacity(64 * self.len() + 64);
        if let Some(f) = self.fall {
            s.push_str(&format!("# fall: {f}\n"));
        }
        s.push_str(TRACE_HEADER);
        s.push('\n');
        for i in 0..self.len() {
            s.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                self.t[i],
                self.cop[i][0],
                self.cop[i][1],
                self.d[i],
                u8::from(self.active[i]),
                self.u[i],
                self.zone[i]
            ));
        }
        s
    }

    pub fn from_csv(text: &str) -> Result<Self, PlantError> {
        let err = |line: usize, reason: String| PlantError::TraceFormat { line, reason };
        let mut trace = SimTrace::with_capacity(0);
        let mut header = false;
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let row = raw.trim();
            if row.is_empty() {
                continue;
            }
            if let Some(comment) = row.strip_prefix('#') {
                let (key, value) = comment
                    .split_once(':')
                    .ok_or_else(|| err(line, "comment without key".into()))?;
                if key.trim() == "fall" {
                    let f = value.trim().parse().map_err(|_| err(line, format!("bad fall time {value:?}")))?;
                    trace.fall = Some(f);
                }
                continue;
            }
            if !header {
                if row != TRACE_HEADER {
                    return Err(err(line, format!("expected header {TRACE_HEADER:?}")));
                }
                header = true;
                continue;
            }
            let cols: Vec<&str> = row.split(',').collect();
            if cols.len() != 7 {
                return Err(err(line, format!("expected 7 columns, found {}", cols.len())));
            }
            let num = |k: usize| -> Result<f64, PlantError> {
                cols[k]
                    .trim()
                    .parse::<f64>()
                    .map_err(|_| err(line, format!("bad number {:?}", cols[k])))
            };
            trace.t.push(num(0)?);
            trace.cop.push([num(1)?, num(2)?]);
            trace.d.push(num(3)?);
            trace.active.push(match cols[4].trim() {
                "1" => true,
                "0" => false,
                other => return Err(err(line, format!("bad active flag {other:?}"))),
            });
            trace.u.push(num(5)?);
            trace.zone.push(cols[6].trim().parse().map_err(|e: String| err(line, e))?);
        }
        if !header {
            return Err(err(1, "missing header".into()));
        }
        Ok(trace)
    }
}

/// Closed loop with default scenario settings around `p`.
pub fn run_closed_loop(
    p: &PlantParams,
    map: &ConicMap,
    cfg: &FuzzyConfig,
    gains: &PidGains,
    disturbance_profile: &[Pulse],
    duration: f64,
    seed: u64,
) -> Result<SimTrace, PlantError> {
    let scenario = Scenario {
        plant: p.clone(),
        disturbances: disturbance_profile.to_vec(),
        duration,
        ..Scenario::default()
    };
    simulate(&scenario, map, cfg, gains, seed)
}

/// Run a scenario. Each step measures the COP, gates and actuates, then
/// integrates the plant over one control period. A fall ends the trace
/// early with [`SimTrace::fall`] set.
pub fn simulate(
    sc: &Scenario,
    map: &ConicMap,
    cfg: &FuzzyConfig,
    gains: &PidGains,
    seed: u64,
) -> Result<SimTrace, PlantError> {
    sc.validate()?;
    cfg.validate()?;
    gains.validate()?;
    let p = &sc.plant;
    let n = sc.steps();
    let mut noise = (sc.noise_std > 0.0).then(|| {
        let dist = Normal::new(0.0, sc.noise_std).expect("finite std");
        (ChaCha8Rng::seed_from_u64(seed), dist)
    });

    let mut trace = SimTrace::with_capacity(n);
    let mut s = SimState {
        theta: sc.initial_theta,
        omega: sc.initial_omega,
        t: 0.0,
    };
    let mut ctrl = ControllerState::default();
    let centre = sc.zones.center();
    for k in 0..n {
        let t = k as f64 * p.dt;
        s.t = t;
        let mut cop = cop_of_state(&s, p);
        if let Some((rng, dist)) = noise.as_mut() {
            cop[0] += dist.sample(rng);
            cop[1] += dist.sample(rng);
        }
        let d = distance_to_conic(cop, map, sc.distance_tol).map_err(ControlError::from)?;
        let u = if sc.controller_enabled {
            let (u, next) = gate_step(d, cfg, gains, &sc.limits, &ctrl, p.dt)?;
            ctrl = next;
            u
        } else {
            0.0
        };
        trace.t.push(t);
        trace.cop.push(cop);
        trace.d.push(d);
        trace.active.push(sc.controller_enabled && ctrl.active);
        trace.u.push(u);
        trace.zone.push(classify([cop[0] + centre[0], cop[1] + centre[1]], &sc.zones));

        match step_plant(&s, u, disturbance_at(&sc.disturbances, t, p.dt), p) {
            Ok(next) => s = next,
            Err(PlantError::Fall { t, .. }) => {
                trace.fall = Some(t);
                break;
            }
            Err(e) => return Err(e),
        }
    }
    Ok(trace)
}
