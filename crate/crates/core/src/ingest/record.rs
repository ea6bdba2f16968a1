use std::collections::BTreeMap;
use std::fmt::Write as _;

use super::{IngestError, Trial, WrenchSample};

/// Columns per data row: time, force xyz, moment xyz, COP xy.
pub const DATA_COLUMNS: usize = 9;

const SPACING_TOL: f64 = 1e-6;
const DEFAULT_SAMPLE_RATE: f64 = 100.0;

fn tokens(line: &str) -> impl Iterator<Item = &str> {
    line.split(|c: char| c == ',' || c.is_whitespace())
        .filter(|t| !t.is_empty())
}

fn is_missing(token: &str) -> bool {
    matches!(token, "-" | "nan" | "NaN" | "NAN")
}

/// Parse one trial record.
///
/// `id` and `sample_rate` header keys fill the corresponding fields; every
/// other header key lands in `meta` untouched. Without a `sample_rate`
/// header the rate is taken from the first time step (100 Hz for a single
/// sample). COP cells holding `nan` or `-` mark the COP as absent.
pub fn parse_trial(bytes: &[u8]) -> Result<Trial, IngestError> {
    let text = std::str::from_utf8(bytes).map_err(|_| IngestError::NotUtf8)?;

    let mut id = String::new();
    let mut sample_rate: Option<f64> = None;
    let mut meta = BTreeMap::new();
    let mut samples: Vec<WrenchSample> = Vec::new();
    let mut seen_labels = false;

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }

        if let Some(body) = line.strip_prefix('#') {
            let body = body.trim();
            if body.is_empty() {
                continue;
            }
            if !samples.is_empty() {
                return Err(IngestError::MalformedHeader {
                    line: line_no,
                    reason: "header line after data rows".into(),
                });
            }
            let (key, value) = body.split_once(':').ok_or_else(|| IngestError::MalformedHeader {
                line: line_no,
                reason: "expected `key: value`".into(),
            })?;
            let key = key.trim();
            let value = value.trim();
            if key.is_empty() {
                return Err(IngestError::MalformedHeader {
                    line: line_no,
                    reason: "empty key".into(),
                });
            }
            match key {
                "id" => id = value.to_string(),
                "sample_rate" => {
                    let rate: f64 = value.parse().ok().filter(|r: &f64| r.is_finite() && *r > 0.0).ok_or_else(|| {
                        IngestError::MalformedHeader {
                            line: line_no,
                            reason: format!("sample_rate {value:?} is not a positive number"),
                        }
                    })?;
                    sample_rate = Some(rate);
                }
                _ => {
                    meta.insert(key.to_string(), value.to_string());
                }
            }
            continue;
        }

        let cells: Vec<&str> = tokens(line).collect();

        // A PhysioNet export starts with a row of column labels.
        if samples.is_empty() && !seen_labels && cells.first().is_some_and(|c| c.parse::<f64>().is_err()) {
            if cells.len() != DATA_COLUMNS {
                return Err(IngestError::RowArity {
                    line: line_no,
                    found: cells.len(),
                    expected: DATA_COLUMNS,
                });
            }
            seen_labels = true;
            continue;
        }

        if cells.len() != DATA_COLUMNS {
            return Err(IngestError::RowArity {
                line: line_no,
                found: cells.len(),
                expected: DATA_COLUMNS,
            });
        }

        let mut values = [0.0f64; DATA_COLUMNS];
        for (column, cell) in cells.iter().enumerate() {
            let bad = || IngestError::BadNumber {
                line: line_no,
                column: column + 1,
                token: cell.to_string(),
            };
            values[column] = if column >= 7 && is_missing(cell) {
                f64::NAN
            } else {
                let v: f64 = cell.parse().map_err(|_| bad())?;
                if !v.is_finite() {
                    return Err(bad());
                }
                v
            };
        }

        let cop = if values[7].is_nan() || values[8].is_nan() {
            None
        } else {
            Some([values[7], values[8]])
        };
        let sample = WrenchSample {
            t: values[0],
            force: [values[1], values[2], values[3]],
            moment: [values[4], values[5], values[6]],
            cop,
        };

        if let Some(prev) = samples.last() {
            if sample.t < prev.t {
                return Err(IngestError::NonMonotonicTime { line: line_no });
            }
            let step = sample.t - prev.t;
            let rate = *sample_rate.get_or_insert(1.0 / step);
            if !rate.is_finite() || (step - 1.0 / rate).abs() > SPACING_TOL {
                return Err(IngestError::NonUniformSampling { line: line_no });
            }
        }
        samples.push(sample);
    }

    if samples.is_empty() {
        return Err(IngestError::NoSamples);
    }

    Ok(Trial {
        id,
        sample_rate: sample_rate.unwrap_or(DEFAULT_SAMPLE_RATE),
        samples,
        meta,
    })
}

/// Serialize a trial in the same text format [`parse_trial`] reads.
pub fn write_trial(trial: &Trial) -> String {
    let mut out = String::new();
    if !trial.id.is_empty() {
        let _ = writeln!(out, "# id: {}", trial.id);
    }
    let _ = writeln!(out, "# sample_rate: {}", trial.sample_rate);
    for (k, v) in &trial.meta {
        let _ = writeln!(out, "# {k}: {v}");
    }
    for s in &trial.samples {
        let _ = write!(
            out,
            "{} {} {} {} {} {} {}",
            s.t, s.force[0], s.force[1], s.force[2], s.moment[0], s.moment[1], s.moment[2]
        );
        match s.cop {
            Some([x, y]) => {
                let _ = writeln!(out, " {x} {y}");
            }
            None => out.push_str(" nan nan\n"),
        }
    }
    out
}
