use serde::{Deserialize, Serialize};

use super::ControlError;

/// Parallel-form gains mapping centimeters of error to stimulation units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PidGains {
    pub kp: f64,
    pub ki: f64,
    pub kd: f64,
}

impl PidGains {
    /// Gains reported for the original controller.
    pub const PAPER: PidGains = PidGains {
        kp: 0.87,
        ki: 1.0,
        kd: 0.93,
    };

    pub fn new(kp: f64, ki: f64, kd: f64) -> Result<Self, ControlError> {
        let g = Self { kp, ki, kd };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<(), ControlError> {
        for (name, v) in [("kp", self.kp), ("ki", self.ki), ("kd", self.kd)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(ControlError::InvalidGains(format!("{name} = {v} must be finite and >= 0")));
            }
        }
        Ok(())
    }
}

impl Default for PidGains {
    fn default() -> Self {
        Self::PAPER
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct PidState {
    /// Accumulated error, cm·s.
    pub integral: f64,
    pub prev_error: f64,
    pub initialized: bool,
}

/// One step of `u = kp·e + ki·∫e + kd·de/dt`.
///
/// Rectangular integration clamped to `±windup_limit` (pass infinity to
/// disable), backward-difference derivative, and no derivative kick on the
/// first call after a reset.
pub fn pid_step(state: &PidState, error: f64, dt: f64, gains: &PidGains, windup_limit: f64) -> (f64, PidState) {
    let integral = (state.integral + error * dt).clamp(-windup_limit, windup_limit);
    let derivative = if state.initialized {
        (error - state.prev_error) / dt
    } else {
        0.0
    };
    let u = gains.kp * error + gains.ki * integral + gains.kd * derivative;
    (
        u,
        PidState {
            integral,
            prev_error: error,
            initialized: true,
        },
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const NO_LIMIT: f64 = f64::INFINITY;

    #[test]
    fn zero_error() {
        let s0 = PidState::default();
        let (u, s1) = pid_step(&s0, 0.0, 0.01, &PidGains::PAPER, 10.0);
        assert_eq!(u, 0.0);
        assert_eq!(s1, PidState { initialized: true, ..s0 });
    }

    #[test]
    fn pure_proportional() {
        let g = PidGains::new(1.0, 0.0, 0.0).unwrap();
        let mut s = PidState::default();
        for _ in 0..5 {
            let (u, next) = pid_step(&s, 1.0, 0.01, &g, 10.0);
            assert_eq!(u, 1.0);
            s = next;
        }
    }

    #[test]
    fn paper_gains_two_steps() {
        let g = PidGains::PAPER;
        let (_, s) = pid_step(&PidState::default(), 0.1, 0.01, &g, 10.0);
        let (u, _) = pid_step(&s, 0.1, 0.01, &g, 10.0);
        assert!((u - 0.089).abs() < 1e-12, "{u}");
    }

    #[test]
    fn derivative_after_first_step() {
        let g = PidGains::new(0.0, 0.0, 2.0).unwrap();
        let (u0, s) = pid_step(&PidState::default(), 0.5, 0.1, &g, 10.0);
        assert_eq!(u0, 0.0);
        let (u1, _) = pid_step(&s, 0.7, 0.1, &g, 10.0);
        assert!((u1 - 4.0).abs() < 1e-12);
    }

    #[test]
    fn integral_is_clamped() {
        let g = PidGains::new(0.0, 1.0, 0.0).unwrap();
        let mut s = PidState::default();
        for _ in 0..1000 {
            s = pid_step(&s, 5.0, 0.1, &g, 10.0).1;
        }
        assert_eq!(s.integral, 10.0);
    }

    #[test]
    fn negative_gains_rejected() {
        assert!(PidGains::new(-0.1, 0.0, 0.0).is_err());
        assert!(PidGains::new(0.1, f64::NAN, 0.0).is_err());
    }

    proptest! {
        #[test]
        fn proportional_only_is_exact(kp in 0.0f64..10.0, e in -5.0f64..5.0, dt in 0.001f64..0.1) {
            let g = PidGains::new(kp, 0.0, 0.0).unwrap();
            let (u, _) = pid_step(&PidState::default(), e, dt, &g, 10.0);
            prop_assert_eq!(u, kp * e);
        }

        #[test]
        fn doubling_errors_doubles_output(
            errors in prop::collection::vec(0.0f64..2.0, 1..50),
            kp in 0.0f64..3.0, ki in 0.0f64..3.0, kd in 0.0f64..3.0,
        ) {
            let g = PidGains::new(kp, ki, kd).unwrap();
            let (mut s1, mut s2) = (PidState::default(), PidState::default());
            for e in errors {
                let (u1, n1) = pid_step(&s1, e, 0.01, &g, NO_LIMIT);
                let (u2, n2) = pid_step(&s2, 2.0 * e, 0.01, &g, NO_LIMIT);
                prop_assert!((u2 - 2.0 * u1).abs() <= 1e-9 * (1.0 + u1.abs()));
                s1 = n1;
                s2 = n2;
            }
        }
    }
}
