//! Ziegler-Nichols ultimate-cycle tuning.
//!
//! The loop under test is closed with a pure proportional gain. The
//! ultimate gain is the smallest gain whose error trace neither decays nor
//! grows: the peak-to-trough amplitude of the last cycle, divided by the
//! amplitude [`ZN_CYCLES`] cycles earlier, lies in [`SUSTAINED_BAND`].
//! Bisection finds the lower edge of that band.

use serde::{Deserialize, Serialize};

use super::{ControlError, PidGains};

/// Number of final cycles the decay ratio spans.
pub const ZN_CYCLES: usize = 5;
pub const SUSTAINED_BAND: (f64, f64) = (0.95, 1.05);

/// Amplitudes below this fraction of the trace's largest swing are
/// numerical noise.
const NOISE_FLOOR: f64 = 1e-9;
const BISECTION_STEPS: usize = 60;

/// Error samples of a proportional loop at a fixed step.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorTrace {
    pub dt: f64,
    pub samples: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Oscillation {
    /// No cycles at all, or cycles that died out into noise.
    Decayed,
    /// Some cycles, but fewer than needed for a decay measurement.
    TooShort { cycles: usize },
    /// Amplitude ratio over the final cycles and the mean period.
    Cycles { ratio: f64, period: f64 },
    /// The trace blew up to non-finite values.
    Diverged,
}

impl Oscillation {
    fn sustained_or_growing(&self) -> bool {
        match *self {
            Oscillation::Cycles { ratio, .. } => ratio >= SUSTAINED_BAND.0,
            Oscillation::Diverged => true,
            _ => false,
        }
    }
}

/// Classify an error trace by its final cycles.
pub fn analyze_oscillation(trace: &ErrorTrace) -> Oscillation {
    let e = &trace.samples;
    if e.iter().any(|v| !v.is_finite()) {
        return Oscillation::Diverged;
    }
    if e.len() < 3 {
        return Oscillation::Decayed;
    }

    // Alternate local maxima and minima; plateaus count once.
    let mut extrema: Vec<(usize, f64)> = Vec::new();
    let mut rising: Option<bool> = None;
    for i in 1..e.len() {
        let delta = e[i] - e[i - 1];
        if delta == 0.0 {
            continue;
        }
        let up = delta > 0.0;
        if let Some(was_up) = rising {
            if was_up != up {
                extrema.push((i - 1, e[i - 1]));
            }
        }
        rising = Some(up);
    }

    let swing_max = extrema
        .windows(2)
        .map(|w| (w[1].1 - w[0].1).abs())
        .fold(0.0, f64::max);
    if swing_max == 0.0 {
        return Oscillation::Decayed;
    }
    let floor = NOISE_FLOOR * swing_max;
    // Drop the tail of swings that have fallen into the noise.
    let significant = extrema
        .windows(2)
        .rposition(|w| (w[1].1 - w[0].1).abs() >= floor)
        .map_or(0, |k| k + 2);
    let truncated = significant < extrema.len();
    let extrema = &extrema[..significant];
    // Oscillation also counts as over once the trace stays monotone for
    // several half-cycles before the end.
    let stalled = match extrema {
        [first, .., last] => {
            let half = (last.0 - first.0) as f64 / (extrema.len() - 1) as f64;
            (e.len() - 1 - last.0) as f64 > 4.0 * half
        }
        _ => true,
    };
    let decayed_early = truncated || stalled;

    // Amplitude of each cycle, indexed by its maximum.
    let mut cycles: Vec<(usize, f64)> = Vec::new();
    for w in extrema.windows(2) {
        let ((i0, v0), (_, v1)) = (w[0], w[1]);
        if v0 > v1 {
            cycles.push((i0, 0.5 * (v0 - v1)));
        }
    }

    if cycles.len() < ZN_CYCLES + 1 {
        return if decayed_early || cycles.len() < 2 {
            Oscillation::Decayed
        } else {
            Oscillation::TooShort { cycles: cycles.len() }
        };
    }
    if decayed_early {
        return Oscillation::Decayed;
    }

    let last = cycles.len() - 1;
    let ratio = cycles[last].1 / cycles[last - ZN_CYCLES].1;

    // Period from upward crossings of the window's midline.
    let start = cycles[last - ZN_CYCLES].0;
    let window = &e[start..];
    let mid = window.iter().sum::<f64>() / window.len() as f64;
    let mut crossings = Vec::new();
    for i in start + 1..e.len() {
        let (a, b) = (e[i - 1] - mid, e[i] - mid);
        if a < 0.0 && b >= 0.0 {
            crossings.push((i - 1) as f64 + a / (a - b));
        }
    }
    let period = if crossings.len() >= 2 {
        (crossings[crossings.len() - 1] - crossings[0]) / (crossings.len() - 1) as f64 * trace.dt
    } else {
        (cycles[last].0 - cycles[last - ZN_CYCLES].0) as f64 / ZN_CYCLES as f64 * trace.dt
    };
    Oscillation::Cycles { ratio, period }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TuningResult {
    pub gains: PidGains,
    pub ultimate_gain: f64,
    pub ultimate_period: f64,
    /// Decay ratio measured at the ultimate gain.
    pub decay_ratio: f64,
}

/// Classic ultimate-cycle rules: `kp = 0.6 Ku`, `Ti = Tu/2`, `Td = Tu/8`,
/// returned in parallel form (`ki = kp/Ti`, `kd = kp·Td`).
pub fn ziegler_nichols_gains(ultimate_gain: f64, ultimate_period: f64) -> PidGains {
    let kp = 0.6 * ultimate_gain;
    PidGains {
        kp,
        ki: kp / (ultimate_period / 2.0),
        kd: kp * ultimate_period / 8.0,
    }
}

/// Find the ultimate gain in `kp_range` by bisection and apply the
/// Ziegler-Nichols table.
///
/// `plant(kp, horizon)` must return the error trace of the loop closed by
/// a proportional gain `kp`, simulated for `horizon` seconds.
pub fn tune_ziegler_nichols<F>(mut plant: F, kp_range: (f64, f64), horizon: f64) -> Result<TuningResult, ControlError>
where
    F: FnMut(f64, f64) -> ErrorTrace,
{
    let (lo, hi) = kp_range;
    if !(lo > 0.0 && hi > lo && hi.is_finite()) {
        return Err(ControlError::InvalidTuning(format!("kp range [{lo}, {hi}]")));
    }
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(ControlError::InvalidTuning(format!("horizon {horizon}")));
    }

    let mut classify = |kp: f64| -> Result<Oscillation, ControlError> {
        match analyze_oscillation(&plant(kp, horizon)) {
            Oscillation::TooShort { cycles } => Err(ControlError::NoDecayMeasurement { kp, cycles }),
            other => Ok(other),
        }
    };

    if !classify(hi)?.sustained_or_growing() {
        return Err(ControlError::NoUltimateGain { lo, hi });
    }
    let (mut below, mut above) = (lo, hi);
    if classify(lo)?.sustained_or_growing() {
        above = lo;
    } else {
        for _ in 0..BISECTION_STEPS {
            let mid = 0.5 * (below + above);
            if classify(mid)?.sustained_or_growing() {
                above = mid;
            } else {
                below = mid;
            }
            if above - below <= 1e-9 * above {
                break;
            }
        }
    }

    let ku = above;
    match classify(ku)? {
        Oscillation::Cycles { ratio, period } if ratio <= SUSTAINED_BAND.1 => Ok(TuningResult {
            gains: ziegler_nichols_gains(ku, period),
            ultimate_gain: ku,
            ultimate_period: period,
            decay_ratio: ratio,
        }),
        // Jumped straight from decaying to growing: no sustained cycle.
        _ => Err(ControlError::NoUltimateGain { lo, hi }),
    }
}

/// `1 / (s^n + a_{n-1} s^{n-1} + … + a_0)` in controllable canonical form,
/// for benchmarking the tuner.
#[derive(Debug, Clone, PartialEq)]
pub struct AllPolePlant {
    /// `[a_{n-1}, …, a_0]`.
    den: Vec<f64>,
}

impl AllPolePlant {
    /// `den` lists the monic denominator's coefficients after the leading 1,
    /// highest power first: `s(s+1)(s+2)` is `[3, 2, 0]`.
    pub fn new(den: Vec<f64>) -> Result<Self, ControlError> {
        if den.is_empty() || den.iter().any(|v| !v.is_finite()) {
            return Err(ControlError::InvalidTuning("plant denominator".into()));
        }
        Ok(Self { den })
    }

    pub fn order(&self) -> usize {
        self.den.len()
    }

    fn deriv(&self, x: &[f64], u: f64, out: &mut [f64]) {
        // x[0] = y, x[k] = y^(k); y^(n) = u - Σ a_k y^(k)
        let n = x.len();
        out[..n - 1].copy_from_slice(&x[1..]);
        let acc: f64 = self.den.iter().rev().zip(x).map(|(a, v)| a * v).sum();
        out[n - 1] = u - acc;
    }

    /// Unit-step error `1 - y` of the loop closed by `u = kp·e`, input held
    /// over each step and the state advanced by RK4.
    pub fn proportional_error(&self, kp: f64, horizon: f64, dt: f64) -> ErrorTrace {
        let n = self.order();
        let steps = (horizon / dt).round() as usize;
        let mut x = vec![0.0; n];
        let (mut k1, mut k2, mut k3, mut k4, mut tmp) = (vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]);
        let mut samples = Vec::with_capacity(steps + 1);
        for _ in 0..=steps {
            let e: f64 = 1.0 - x[0];
            samples.push(e);
            if !e.is_finite() {
                break;
            }
            let u = kp * e;
            self.deriv(&x, u, &mut k1);
            for i in 0..n {
                tmp[i] = x[i] + 0.5 * dt * k1[i];
            }
            self.deriv(&tmp, u, &mut k2);
            for i in 0..n {
                tmp[i] = x[i] + 0.5 * dt * k2[i];
            }
            self.deriv(&tmp, u, &mut k3);
            for i in 0..n {
                tmp[i] = x[i] + dt * k3[i];
            }
            self.deriv(&tmp, u, &mut k4);
            for i in 0..n {
                x[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
            }
        }
        ErrorTrace { dt, samples }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn sine_trace(growth: f64, period: f64, cycles: f64) -> ErrorTrace {
        let dt = 0.001;
        let n = (cycles * period / dt) as usize;
        ErrorTrace {
            dt,
            samples: (0..n)
                .map(|i| {
                    let t = i as f64 * dt;
                    (growth * t).exp() * (2.0 * PI * t / period).sin()
                })
                .collect(),
        }
    }

    #[test]
    fn steady_sine_is_sustained() {
        match analyze_oscillation(&sine_trace(0.0, 2.0, 20.0)) {
            Oscillation::Cycles { ratio, period } => {
                assert!((ratio - 1.0).abs() < 1e-3);
                assert!((period - 2.0).abs() < 1e-3);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn damped_sine_ratio() {
        let sigma = -0.05;
        match analyze_oscillation(&sine_trace(sigma, 1.0, 30.0)) {
            Oscillation::Cycles { ratio, .. } => {
                assert!((ratio - (sigma * 5.0f64).exp()).abs() < 2e-3, "{ratio}");
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn short_and_flat_traces() {
        assert_eq!(
            analyze_oscillation(&sine_trace(0.0, 2.0, 3.2)),
            Oscillation::TooShort { cycles: 3 }
        );
        let flat = ErrorTrace {
            dt: 0.01,
            samples: (0..1000).map(|i| (-(i as f64) * 0.01).exp()).collect(),
        };
        assert_eq!(analyze_oscillation(&flat), Oscillation::Decayed);
        let blown = ErrorTrace {
            dt: 0.01,
            samples: vec![0.0, 1.0, f64::INFINITY],
        };
        assert_eq!(analyze_oscillation(&blown), Oscillation::Diverged);
    }

    #[test]
    fn zn_table() {
        let g = ziegler_nichols_gains(6.0, 2.0 * PI / 2f64.sqrt());
        assert!((g.kp - 3.6).abs() < 1e-12);
        assert!((g.ki - 1.6205).abs() < 1e-3);
        assert!((g.kd - 1.9993).abs() < 1e-3);
    }

    #[test]
    fn third_order_benchmark() {
        // Routh: s³ + 3s² + 2s + K is marginal at K = 6 with ω = √2.
        let plant = AllPolePlant::new(vec![3.0, 2.0, 0.0]).unwrap();
        let r = tune_ziegler_nichols(|kp, h| plant.proportional_error(kp, h, 0.001), (0.5, 20.0), 120.0).unwrap();
        let tu = 2.0 * PI / 2f64.sqrt();
        assert!((r.ultimate_gain - 6.0).abs() / 6.0 < 0.1, "{r:?}");
        assert!((r.ultimate_period - tu).abs() / tu < 0.1, "{r:?}");
        assert!((r.gains.kp - 3.6).abs() / 3.6 < 0.1);
        assert!((r.gains.ki - 1.62).abs() / 1.62 < 0.1);
        assert!((r.gains.kd - 2.00).abs() / 2.00 < 0.1);
        assert!(r.decay_ratio >= SUSTAINED_BAND.0 && r.decay_ratio <= SUSTAINED_BAND.1);
    }

    #[test]
    fn first_order_has_no_ultimate_gain() {
        let plant = AllPolePlant::new(vec![1.0]).unwrap();
        let err = tune_ziegler_nichols(|kp, h| plant.proportional_error(kp, h, 0.001), (0.5, 50.0), 30.0).unwrap_err();
        assert!(matches!(err, ControlError::NoUltimateGain { .. }));
    }

    #[test]
    fn horizon_too_short() {
        let plant = AllPolePlant::new(vec![3.0, 2.0, 0.0]).unwrap();
        let err = tune_ziegler_nichols(|kp, h| plant.proportional_error(kp, h, 0.001), (0.5, 20.0), 12.0).unwrap_err();
        assert!(matches!(err, ControlError::NoDecayMeasurement { .. }), "{err:?}");
    }

    #[test]
    fn deterministic() {
        let plant = AllPolePlant::new(vec![3.0, 2.0, 0.0]).unwrap();
        let run = || tune_ziegler_nichols(|kp, h| plant.proportional_error(kp, h, 0.002), (1.0, 12.0), 80.0).unwrap();
        assert_eq!(run(), run());
    }

    #[test]
    fn bad_range() {
        let plant = AllPolePlant::new(vec![1.0]).unwrap();
        assert!(matches!(
            tune_ziegler_nichols(|kp, h| plant.proportional_error(kp, h, 0.01), (2.0, 1.0), 10.0),
            Err(ControlError::InvalidTuning(_))
        ));
    }
}
