use std::f64::consts::PI;

use super::IngestError;

/// Second-order section in transposed direct form II, `a0` normalized to 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Biquad {
    pub b: [f64; 3],
    pub a: [f64; 2],
}

impl Biquad {
    /// Internal state that makes a constant input `x` produce a constant
    /// output from the first sample.
    fn steady_state(&self, x: f64) -> [f64; 2] {
        let gain = (self.b[0] + self.b[1] + self.b[2]) / (1.0 + self.a[0] + self.a[1]);
        let y = gain * x;
        let z2 = self.b[2] * x - self.a[1] * y;
        let z1 = y - self.b[0] * x;
        [z1, z2]
    }

    fn run(&self, signal: &mut [f64]) {
        let Some(&first) = signal.first() else {
            return;
        };
        let [mut z1, mut z2] = self.steady_state(first);
        for v in signal.iter_mut() {
            let x = *v;
            let y = self.b[0] * x + z1;
            z1 = self.b[1] * x - self.a[0] * y + z2;
            z2 = self.b[2] * x - self.a[1] * y;
            *v = y;
        }
    }
}

/// Low-pass Butterworth as a cascade of bilinear-transformed biquads with
/// the cutoff prewarped, so the digital response is exactly -3 dB at the
/// cutoff.
#[derive(Debug, Clone, PartialEq)]
pub struct Butterworth {
    sections: Vec<Biquad>,
}

impl Butterworth {
    pub fn lowpass(order: usize, cutoff: f64, sample_rate: f64) -> Result<Self, IngestError> {
        if order != 2 && order != 4 {
            return Err(IngestError::UnsupportedOrder(order));
        }
        let nyquist = sample_rate / 2.0;
        if !(cutoff > 0.0 && cutoff < nyquist) {
            return Err(IngestError::CutoffOutOfRange { cutoff, nyquist });
        }

        let k = (PI * cutoff / sample_rate).tan();
        let k2 = k * k;
        let sections = (0..order / 2)
            .map(|i| {
                let theta = PI * (2 * i + 1) as f64 / (2 * order) as f64;
                let q = 1.0 / (2.0 * theta.cos());
                let norm = 1.0 / (1.0 + k / q + k2);
                let b0 = k2 * norm;
                Biquad {
                    b: [b0, 2.0 * b0, b0],
                    a: [2.0 * (k2 - 1.0) * norm, (1.0 - k / q + k2) * norm],
                }
            })
            .collect();
        Ok(Self { sections })
    }

    pub fn sections(&self) -> &[Biquad] {
        &self.sections
    }

    /// Causal single pass, state initialized at the first sample's steady
    /// state.
    pub fn filter(&self, series: &[f64]) -> Vec<f64> {
        let mut out = series.to_vec();
        for s in &self.sections {
            s.run(&mut out);
        }
        out
    }

    /// Forward-backward pass over an odd-reflected extension of the signal.
    /// Zero phase, squared magnitude response.
    pub fn filtfilt(&self, series: &[f64]) -> Vec<f64> {
        let n = series.len();
        if n < 2 {
            return series.to_vec();
        }
        let pad = (3 * (2 * self.sections.len() + 1)).min(n - 1);

        let mut ext = Vec::with_capacity(n + 2 * pad);
        let first = series[0];
        let last = series[n - 1];
        ext.extend((1..=pad).rev().map(|i| 2.0 * first - series[i]));
        ext.extend_from_slice(series);
        ext.extend((1..=pad).map(|i| 2.0 * last - series[n - 1 - i]));

        for s in &self.sections {
            s.run(&mut ext);
        }
        ext.reverse();
        for s in &self.sections {
            s.run(&mut ext);
        }
        ext.reverse();

        ext[pad..pad + n].to_vec()
    }
}

/// Zero-phase Butterworth low-pass of `series` sampled at `sample_rate`.
pub fn lowpass(series: &[f64], sample_rate: f64, cutoff: f64, order: usize) -> Result<Vec<f64>, IngestError> {
    Ok(Butterworth::lowpass(order, cutoff, sample_rate)?.filtfilt(series))
}
