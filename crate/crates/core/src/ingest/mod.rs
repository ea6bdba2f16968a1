//! Force-platform trial ingestion.
//!
//! A trial record is UTF-8 text: `# key: value` header lines, an optional
//! column-label line (as found in PhysioNet BDS exports), then data rows
//! `t fx fy fz mx my mz copx copy` separated by whitespace or commas.
//! Units are s, N, N·m and cm.

mod filter;
mod record;
mod sidecar;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::Point;

pub use filter::{lowpass, Biquad, Butterworth};
pub use record::{parse_trial, write_trial, DATA_COLUMNS};
pub use sidecar::{parse_info_table, parse_sidecar};

/// Minimum vertical load accepted by [`cop_from_wrench`], newtons.
pub const DEFAULT_MIN_LOAD: f64 = 10.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum IngestError {
    #[error("input is not valid UTF-8")]
    NotUtf8,
    #[error("malformed header at line {line}: {reason}")]
    MalformedHeader { line: usize, reason: String },
    #[error("line {line}: expected {expected} columns, found {found}")]
    RowArity {
        line: usize,
        found: usize,
        expected: usize,
    },
    #[error("line {line}, column {column}: cannot parse {token:?} as a finite number")]
    BadNumber {
        line: usize,
        column: usize,
        token: String,
    },
    #[error("line {line}: time decreases")]
    NonMonotonicTime { line: usize },
    #[error("line {line}: sample spacing departs from 1/sample_rate by more than 1e-6 s")]
    NonUniformSampling { line: usize },
    #[error("record has no data rows")]
    NoSamples,
    #[error("sample {index} has no recorded COP")]
    MissingCop { index: usize },
    #[error("vertical load {fz} N is below the {min_load} N off-plate guard")]
    NoLoad { fz: f64, min_load: f64 },
    #[error("cutoff {cutoff} Hz must lie strictly between 0 and the Nyquist frequency {nyquist} Hz")]
    CutoffOutOfRange { cutoff: f64, nyquist: f64 },
    #[error("unsupported filter order {0}; expected 2 or 4")]
    UnsupportedOrder(usize),
}

/// One platform sample: force and moment vectors plus the recorded COP when
/// the record carries it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WrenchSample {
    pub t: f64,
    pub force: [f64; 3],
    pub moment: [f64; 3],
    pub cop: Option<Point>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trial {
    pub id: String,
    pub sample_rate: f64,
    pub samples: Vec<WrenchSample>,
    /// Header fields other than `id` and `sample_rate`, verbatim.
    pub meta: BTreeMap<String, String>,
}

impl Trial {
    pub fn dt(&self) -> f64 {
        1.0 / self.sample_rate
    }

    /// Recording length, `samples × dt`.
    pub fn duration(&self) -> f64 {
        self.samples.len() as f64 * self.dt()
    }

    /// COP series drawn from `source`, one point per sample.
    pub fn cop_series(&self, source: CopSource) -> Result<Vec<Point>, IngestError> {
        self.samples
            .iter()
            .enumerate()
            .map(|(index, s)| match source {
                CopSource::Recorded => s.cop.ok_or(IngestError::MissingCop { index }),
                CopSource::Wrench { min_load } => cop_from_wrench(s, min_load),
                CopSource::Auto { min_load } => match s.cop {
                    Some(c) => Ok(c),
                    None => cop_from_wrench(s, min_load),
                },
            })
            .collect()
    }
}

/// Which channels feed the COP series.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum CopSource {
    /// Recorded COP columns only.
    Recorded,
    /// Always derive from the force/moment wrench.
    Wrench { min_load: f64 },
    /// Recorded when present, wrench otherwise.
    Auto { min_load: f64 },
}

impl Default for CopSource {
    fn default() -> Self {
        CopSource::Auto {
            min_load: DEFAULT_MIN_LOAD,
        }
    }
}

/// COP from the plate wrench with the origin at the sensor center:
/// `x = -m_y / f_z`, `y = m_x / f_z`, returned in centimeters.
pub fn cop_from_wrench(s: &WrenchSample, min_load: f64) -> Result<Point, IngestError> {
    let fz = s.force[2];
    if !(fz.abs() >= min_load) {
        return Err(IngestError::NoLoad { fz, min_load });
    }
    Ok([-s.moment[1] / fz * 100.0, s.moment[0] / fz * 100.0])
}
