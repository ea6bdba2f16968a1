use serde::{Deserialize, Serialize};

use super::fuzzy::evaluate_unchecked;
use super::{pid_step, ControlError, FuzzyConfig, PidGains, PidState};
use crate::phase::{distance_to_conic, ConicMap, DEFAULT_DISTANCE_TOL};
use crate::Point;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ControllerLimits {
    /// Bound on the PID integral, cm·s.
    pub windup_limit: f64,
    /// Saturation of the stimulation intensity.
    pub u_max: f64,
}

impl Default for ControllerLimits {
    fn default() -> Self {
        Self {
            windup_limit: 10.0,
            u_max: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ControllerState {
    pub active: bool,
    pub pid: PidState,
    pub last_d: f64,
    /// Fuzzy output behind `active`.
    pub last_y: f64,
}

/// Gate on a precomputed distance `d`.
///
/// At or below the activation threshold the output is exactly zero and the
/// PID state returns to rest. Above it the PID runs on `e = d` and the
/// output is clipped to `[0, u_max]`.
pub fn gate_step(
    d: f64,
    cfg: &FuzzyConfig,
    gains: &PidGains,
    limits: &ControllerLimits,
    state: &ControllerState,
    dt: f64,
) -> Result<(f64, ControllerState), ControlError> {
    let y = evaluate_unchecked(d, cfg)?;
    if y <= cfg.activation_threshold {
        return Ok((
            0.0,
            ControllerState {
                active: false,
                pid: PidState::default(),
                last_d: d,
                last_y: y,
            },
        ));
    }
    let (raw, pid) = pid_step(&state.pid, d, dt, gains, limits.windup_limit);
    Ok((
        raw.clamp(0.0, limits.u_max),
        ControllerState {
            active: true,
            pid,
            last_d: d,
            last_y: y,
        },
    ))
}

/// One controller step from a COP sample, with default limits and
/// distance tolerance.
pub fn intermittent_step(
    p: Point,
    map: &ConicMap,
    cfg: &FuzzyConfig,
    gains: &PidGains,
    state: &ControllerState,
    dt: f64,
) -> Result<(f64, ControllerState), ControlError> {
    cfg.validate()?;
    let d = distance_to_conic(p, map, DEFAULT_DISTANCE_TOL)?;
    gate_step(d, cfg, gains, &ControllerLimits::default(), state, dt)
}

/// Owns the reference map, configuration and running state.
#[derive(Debug, Clone)]
pub struct IntermittentController {
    pub map: ConicMap,
    pub fuzzy: FuzzyConfig,
    pub gains: PidGains,
    pub limits: ControllerLimits,
    pub distance_tol: f64,
    state: ControllerState,
}

impl IntermittentController {
    pub fn new(map: ConicMap, fuzzy: FuzzyConfig, gains: PidGains, limits: ControllerLimits) -> Result<Self, ControlError> {
        fuzzy.validate()?;
        gains.validate()?;
        if !(limits.u_max > 0.0 && limits.windup_limit >= 0.0) {
            return Err(ControlError::InvalidGains(format!(
                "limits u_max = {}, windup = {}",
                limits.u_max, limits.windup_limit
            )));
        }
        Ok(Self {
            map,
            fuzzy,
            gains,
            limits,
            distance_tol: DEFAULT_DISTANCE_TOL,
            state: ControllerState::default(),
        })
    }

    pub fn state(&self) -> &ControllerState {
        &self.state
    }

    pub fn reset(&mut self) {
        self.state = ControllerState::default();
    }

    /// Distance of `p` to the reference curve.
    pub fn distance(&self, p: Point) -> Result<f64, ControlError> {
        Ok(distance_to_conic(p, &self.map, self.distance_tol)?)
    }

    pub fn step(&mut self, p: Point, dt: f64) -> Result<f64, ControlError> {
        let d = self.distance(p)?;
        self.step_distance(d, dt)
    }

    pub fn step_distance(&mut self, d: f64, dt: f64) -> Result<f64, ControlError> {
        let (u, next) = gate_step(d, &self.fuzzy, &self.gains, &self.limits, &self.state, dt)?;
        self.state = next;
        Ok(u)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn circle() -> ConicMap {
        ConicMap::ellipse([0.0, 0.0], 1.0, 1.0).unwrap()
    }

    #[test]
    fn near_curve_is_silent() {
        let (u, s) = intermittent_step(
            [1.01, 0.0],
            &circle(),
            &FuzzyConfig::default(),
            &PidGains::PAPER,
            &ControllerState::default(),
            0.01,
        )
        .unwrap();
        assert_eq!(u, 0.0);
        assert!(!s.active);
        assert!((s.last_d - 0.01).abs() < 1e-12);
    }

    #[test]
    fn first_active_step() {
        let (u, s) = intermittent_step(
            [1.2, 0.0],
            &circle(),
            &FuzzyConfig::default(),
            &PidGains::PAPER,
            &ControllerState::default(),
            0.01,
        )
        .unwrap();
        assert!(s.active);
        assert!((u - 0.176).abs() < 1e-12, "{u}");
    }

    #[test]
    fn saturates_at_u_max() {
        let mut c = IntermittentController::new(circle(), FuzzyConfig::default(), PidGains::PAPER, ControllerLimits::default()).unwrap();
        assert_eq!(c.step([4.0, 0.0], 0.01).unwrap(), 1.0);
    }

    #[test]
    fn empty_locus_propagates() {
        let m = ConicMap::new([1.0, 0.0, 1.0, 0.0, 0.0, 1.0]).unwrap();
        let err = intermittent_step([0.0, 0.0], &m, &FuzzyConfig::default(), &PidGains::PAPER, &ControllerState::default(), 0.01)
            .unwrap_err();
        assert_eq!(err, ControlError::Phase(crate::phase::PhaseError::EmptyLocus));
    }

    #[test]
    fn alternating_sequence_is_zero_below_threshold() {
        let mut c = IntermittentController::new(circle(), FuzzyConfig::default(), PidGains::PAPER, ControllerLimits::default()).unwrap();
        for i in 0..200 {
            let d = if i % 3 == 0 { 0.01 } else { 0.3 };
            let u = c.step_distance(d, 0.01).unwrap();
            if d < 0.05 {
                assert_eq!(u, 0.0);
                assert_eq!(c.state().pid, PidState::default());
            } else {
                assert!(u > 0.0);
            }
        }
    }

    proptest! {
        #[test]
        fn gated_steps_leak_nothing(ds in prop::collection::vec(0.0f64..0.2, 1..300)) {
            let cfg = FuzzyConfig::default();
            let mut state = ControllerState::default();
            for d in ds {
                let (u, next) = gate_step(d, &cfg, &PidGains::PAPER, &ControllerLimits::default(), &state, 0.01).unwrap();
                if next.last_y <= cfg.activation_threshold {
                    prop_assert_eq!(u, 0.0);
                    prop_assert!(!next.active);
                    prop_assert_eq!(next.pid, PidState::default());
                } else {
                    prop_assert!(next.active);
                }
                state = next;
            }
        }
    }
}
