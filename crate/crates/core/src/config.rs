//! Run configuration as flat `section.key = value` text.
//!
//! Blank lines and lines starting with `#` are ignored. Every key must be
//! known and appear at most once; values are checked against the type of
//! the setting they address. [`RunConfig::to_text`] emits every key, and
//! parsing that text reproduces the configuration exactly.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::control::{ControllerLimits, FuzzyConfig, PidGains};
use crate::ingest::{CopSource, DEFAULT_MIN_LOAD};
use crate::phase::DEFAULT_DISTANCE_TOL;
use crate::plant::{Pulse, Scenario};
use crate::zones::ZoneBounds;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("line {line}: {reason}")]
    Syntax { line: usize, reason: String },
    #[error("unknown key {key:?}")]
    UnknownKey { key: String },
    #[error("key {key:?} set twice (line {line})")]
    DuplicateKey { key: String, line: usize },
    #[error("{key} = {value:?}: expected {expected}")]
    BadValue { key: String, value: String, expected: &'static str },
    #[error("{0}")]
    Invalid(String),
    #[error("{key}: no such file {path:?}")]
    MissingPath { key: &'static str, path: PathBuf },
    #[error("cannot read {path:?}: {reason}")]
    Io { path: PathBuf, reason: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum OutputFormat {
    #[default]
    Csv,
    Json,
}

impl OutputFormat {
    pub fn extension(self) -> &'static str {
        match self {
            OutputFormat::Csv => "csv",
            OutputFormat::Json => "json",
        }
    }
}

/// Where the simulated controller's reference curve comes from.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum MapSource {
    #[default]
    Builtin,
    /// Fit to the Poincaré points of `input.trial`.
    Trial,
    /// A conic JSON file.
    File(PathBuf),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub trial: Option<PathBuf>,
    pub sidecar: Option<PathBuf>,
    pub info_table: Option<PathBuf>,
    pub cop_source: CopSource,
    pub filter_enabled: bool,
    /// Hz
    pub filter_cutoff: f64,
    pub filter_order: usize,
    /// Distance at which the fuzzy gate crosses over, cm.
    pub fuzzy_threshold: f64,
    /// Gate opens when the fuzzy output exceeds this.
    pub fuzzy_activation: f64,
    pub gains: PidGains,
    pub distance_tol: f64,
    pub scenario: Scenario,
    pub map: MapSource,
    /// `[a_{n-1}, …, a_0]` of the monic all-pole benchmark plant.
    pub tune_plant: Vec<f64>,
    pub tune_kp_range: (f64, f64),
    pub tune_horizon: f64,
    pub tune_dt: f64,
    /// Skip the tuner and emit the published gains.
    pub tune_paper_preset: bool,
    pub out_dir: PathBuf,
    pub format: OutputFormat,
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            trial: None,
            sidecar: None,
            info_table: None,
            cop_source: CopSource::default(),
            filter_enabled: true,
            filter_cutoff: 10.0,
            filter_order: 4,
            fuzzy_threshold: 0.05,
            fuzzy_activation: 0.5,
            gains: PidGains::PAPER,
            distance_tol: DEFAULT_DISTANCE_TOL,
            scenario: Scenario::reference(),
            map: MapSource::Builtin,
            tune_plant: vec![3.0, 2.0, 0.0],
            tune_kp_range: (0.5, 20.0),
            tune_horizon: 120.0,
            tune_dt: 0.001,
            tune_paper_preset: false,
            out_dir: PathBuf::from("out"),
            format: OutputFormat::Csv,
            seed: 0,
        }
    }
}

fn parse_f64(key: &str, v: &str) -> Result<f64, ConfigError> {
    v.parse::<f64>()
        .ok()
        .filter(|x| x.is_finite())
        .ok_or_else(|| bad(key, v, "a finite number"))
}

fn parse_usize(key: &str, v: &str) -> Result<usize, ConfigError> {
    v.parse().map_err(|_| bad(key, v, "a non-negative integer"))
}

fn parse_bool(key: &str, v: &str) -> Result<bool, ConfigError> {
    match v {
        "true" | "yes" | "on" | "1" => Ok(true),
        "false" | "no" | "off" | "0" => Ok(false),
        _ => Err(bad(key, v, "true or false")),
    }
}

fn parse_path(v: &str) -> Option<PathBuf> {
    (!v.is_empty() && v != "none").then(|| PathBuf::from(v))
}

fn bad(key: &str, value: &str, expected: &'static str) -> ConfigError {
    ConfigError::BadValue {
        key: key.to_string(),
        value: value.to_string(),
        expected,
    }
}

/// `start:duration:torque` triples separated by commas; `none` is empty.
fn parse_pulses(key: &str, v: &str) -> Result<Vec<Pulse>, ConfigError> {
    if v.is_empty() || v == "none" {
        return Ok(Vec::new());
    }
    v.split(',')
        .map(|item| {
            let parts: Vec<&str> = item.trim().split(':').collect();
            let [s, d, t] = parts[..] else {
                return Err(bad(key, v, "start:duration:torque[, ...]"));
            };
            Ok(Pulse {
                start: parse_f64(key, s.trim())?,
                duration: parse_f64(key, d.trim())?,
                torque: parse_f64(key, t.trim())?,
            })
        })
        .collect()
}

fn parse_list(key: &str, v: &str) -> Result<Vec<f64>, ConfigError> {
    v.split(',').map(|x| parse_f64(key, x.trim())).collect()
}

fn path_text(p: &Option<PathBuf>) -> String {
    p.as_ref().map_or_else(|| "none".to_string(), |p| p.display().to_string())
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut cfg = Self::default();
        cfg.apply(text)?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Io {
            path: path.to_path_buf(),
            reason: e.to_string(),
        })?;
        Self::parse(&text)
    }

    /// Apply the settings in `text` on top of `self`.
    pub fn apply(&mut self, text: &str) -> Result<(), ConfigError> {
        let mut seen = std::collections::BTreeSet::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let row = raw.trim();
            if row.is_empty() || row.starts_with('#') {
                continue;
            }
            let (key, value) = row.split_once('=').ok_or_else(|| ConfigError::Syntax {
                line,
                reason: format!("expected `key = value`, got {row:?}"),
            })?;
            let key = key.trim();
            if key.is_empty() {
                return Err(ConfigError::Syntax {
                    line,
                    reason: "empty key".into(),
                });
            }
            if !seen.insert(key.to_string()) {
                return Err(ConfigError::DuplicateKey {
                    key: key.to_string(),
                    line,
                });
            }
            self.set(key, value.trim())?;
        }
        Ok(())
    }

    /// Set a single key; the same names the text format uses.
    pub fn set(&mut self, key: &str, v: &str) -> Result<(), ConfigError> {
        let sc = &mut self.scenario;
        let pl = &mut sc.plant;
        let z = &mut sc.zones;
        match key {
            "input.trial" => self.trial = parse_path(v),
            "input.sidecar" => self.sidecar = parse_path(v),
            "input.info_table" => self.info_table = parse_path(v),
            "cop.source" => {
                let min_load = self.min_load();
                self.cop_source = match v {
                    "recorded" => CopSource::Recorded,
                    "wrench" => CopSource::Wrench { min_load },
                    "auto" => CopSource::Auto { min_load },
                    _ => return Err(bad(key, v, "recorded, wrench or auto")),
                }
            }
            "cop.min_load" => {
                let m = parse_f64(key, v)?;
                match &mut self.cop_source {
                    CopSource::Wrench { min_load } | CopSource::Auto { min_load } => *min_load = m,
                    CopSource::Recorded => {}
                }
            }
            "filter.enabled" => self.filter_enabled = parse_bool(key, v)?,
            "filter.cutoff" => self.filter_cutoff = parse_f64(key, v)?,
            "filter.order" => self.filter_order = parse_usize(key, v)?,
            "fuzzy.threshold" => self.fuzzy_threshold = parse_f64(key, v)?,
            "fuzzy.activation" => self.fuzzy_activation = parse_f64(key, v)?,
            "pid.kp" => self.gains.kp = parse_f64(key, v)?,
            "pid.ki" => self.gains.ki = parse_f64(key, v)?,
            "pid.kd" => self.gains.kd = parse_f64(key, v)?,
            "pid.windup" => sc.limits.windup_limit = parse_f64(key, v)?,
            "pid.u_max" => sc.limits.u_max = parse_f64(key, v)?,
            "distance.tol" => {
                self.distance_tol = parse_f64(key, v)?;
                sc.distance_tol = self.distance_tol;
            }
            "zones.center_frac" => z.center_frac = parse_f64(key, v)?,
            "zones.foot_length" => z.foot_length = parse_f64(key, v)?,
            "zones.hp.d1" => z.high_preference[0] = parse_f64(key, v)?,
            "zones.hp.d2" => z.high_preference[1] = parse_f64(key, v)?,
            "zones.lp.d1" => z.low_preference[0] = parse_f64(key, v)?,
            "zones.lp.d2" => z.low_preference[1] = parse_f64(key, v)?,
            "zones.ud.d1" => z.undesirable[0] = parse_f64(key, v)?,
            "zones.ud.d2" => z.undesirable[1] = parse_f64(key, v)?,
            "plant.mass" => pl.mass = parse_f64(key, v)?,
            "plant.com_height" => pl.com_height = parse_f64(key, v)?,
            "plant.inertia" => {
                pl.inertia = match v {
                    "auto" => None,
                    _ => Some(parse_f64(key, v)?),
                }
            }
            "plant.damping" => pl.viscous_damping = parse_f64(key, v)?,
            "plant.torque_per_intensity" => pl.torque_per_intensity = parse_f64(key, v)?,
            "plant.gravity" => pl.gravity = parse_f64(key, v)?,
            "plant.dt" => pl.dt = parse_f64(key, v)?,
            "plant.substeps" => pl.substeps = parse_usize(key, v)?,
            "plant.ankle_stiffness" => pl.ankle_stiffness = parse_f64(key, v)?,
            "plant.ankle_torque_limit" => pl.ankle_torque_limit = parse_f64(key, v)?,
            "plant.cop_y_amplitude" => pl.cop_y_amplitude = parse_f64(key, v)?,
            "plant.cop_y_frequency" => pl.cop_y_frequency = parse_f64(key, v)?,
            "sim.duration" => sc.duration = parse_f64(key, v)?,
            "sim.pulses" => sc.disturbances = parse_pulses(key, v)?,
            "sim.initial_theta" => sc.initial_theta = parse_f64(key, v)?,
            "sim.initial_omega" => sc.initial_omega = parse_f64(key, v)?,
            "sim.noise_std" => sc.noise_std = parse_f64(key, v)?,
            "sim.controller" => sc.controller_enabled = parse_bool(key, v)?,
            "sim.map" => {
                self.map = match v {
                    "builtin" => MapSource::Builtin,
                    "trial" => MapSource::Trial,
                    "" => return Err(bad(key, v, "builtin, trial or a conic JSON path")),
                    path => MapSource::File(PathBuf::from(path)),
                }
            }
            "tune.plant" => self.tune_plant = parse_list(key, v)?,
            "tune.kp_min" => self.tune_kp_range.0 = parse_f64(key, v)?,
            "tune.kp_max" => self.tune_kp_range.1 = parse_f64(key, v)?,
            "tune.horizon" => self.tune_horizon = parse_f64(key, v)?,
            "tune.dt" => self.tune_dt = parse_f64(key, v)?,
            "tune.preset" => {
                self.tune_paper_preset = match v {
                    "paper" => true,
                    "none" => false,
                    _ => return Err(bad(key, v, "paper or none")),
                }
            }
            "output.dir" => self.out_dir = PathBuf::from(v),
            "output.format" => {
                self.format = match v {
                    "csv" => OutputFormat::Csv,
                    "json" => OutputFormat::Json,
                    _ => return Err(bad(key, v, "csv or json")),
                }
            }
            "seed" => self.seed = v.parse().map_err(|_| bad(key, v, "an unsigned 64-bit integer"))?,
            _ => return Err(ConfigError::UnknownKey { key: key.to_string() }),
        }
        Ok(())
    }

    fn min_load(&self) -> f64 {
        match self.cop_source {
            CopSource::Wrench { min_load } | CopSource::Auto { min_load } => min_load,
            CopSource::Recorded => DEFAULT_MIN_LOAD,
        }
    }

    /// Every key with its current value, in the text format.
    pub fn to_text(&self) -> String {
        let sc = &self.scenario;
        let pl = &sc.plant;
        let z = &sc.zones;
        let (source, min_load) = match self.cop_source {
            CopSource::Recorded => ("recorded", None),
            CopSource::Wrench { min_load } => ("wrench", Some(min_load)),
            CopSource::Auto { min_load } => ("auto", Some(min_load)),
        };
        let pulses = if sc.disturbances.is_empty() {
            "none".to_string()
        } else {
            sc.disturbances
                .iter()
                .map(|p| format!("{}:{}:{}", p.start, p.duration, p.torque))
                .collect::<Vec<_>>()
                .join(", ")
        };
        let map = match &self.map {
            MapSource::Builtin => "builtin".to_string(),
            MapSource::Trial => "trial".to_string(),
            MapSource::File(p) => p.display().to_string(),
        };
        let entries: Vec<(&str, String)> = vec![
            ("input.trial", path_text(&self.trial)),
            ("input.sidecar", path_text(&self.sidecar)),
            ("input.info_table", path_text(&self.info_table)),
            ("cop.source", source.to_string()),
            ("cop.min_load", min_load.map_or(String::new(), |m| m.to_string())),
            ("filter.enabled", self.filter_enabled.to_string()),
            ("filter.cutoff", self.filter_cutoff.to_string()),
            ("filter.order", self.filter_order.to_string()),
            ("fuzzy.threshold", self.fuzzy_threshold.to_string()),
            ("fuzzy.activation", self.fuzzy_activation.to_string()),
            ("pid.kp", self.gains.kp.to_string()),
            ("pid.ki", self.gains.ki.to_string()),
            ("pid.kd", self.gains.kd.to_string()),
            ("pid.windup", sc.limits.windup_limit.to_string()),
            ("pid.u_max", sc.limits.u_max.to_string()),
            ("distance.tol", self.distance_tol.to_string()),
            ("zones.center_frac", z.center_frac.to_string()),
            ("zones.foot_length", z.foot_length.to_string()),
            ("zones.hp.d1", z.high_preference[0].to_string()),
            ("zones.hp.d2", z.high_preference[1].to_string()),
            ("zones.lp.d1", z.low_preference[0].to_string()),
            ("zones.lp.d2", z.low_preference[1].to_string()),
            ("zones.ud.d1", z.undesirable[0].to_string()),
            ("zones.ud.d2", z.undesirable[1].to_string()),
            ("plant.mass", pl.mass.to_string()),
            ("plant.com_height", pl.com_height.to_string()),
            ("plant.inertia", pl.inertia.map_or("auto".to_string(), |i| i.to_string())),
            ("plant.damping", pl.viscous_damping.to_string()),
            ("plant.torque_per_intensity", pl.torque_per_intensity.to_string()),
            ("plant.gravity", pl.gravity.to_string()),
            ("plant.dt", pl.dt.to_string()),
            ("plant.substeps", pl.substeps.to_string()),
            ("plant.ankle_stiffness", pl.ankle_stiffness.to_string()),
            ("plant.ankle_torque_limit", pl.ankle_torque_limit.to_string()),
            ("plant.cop_y_amplitude", pl.cop_y_amplitude.to_string()),
            ("plant.cop_y_frequency", pl.cop_y_frequency.to_string()),
            ("sim.duration", sc.duration.to_string()),
            ("sim.pulses", pulses),
            ("sim.initial_theta", sc.initial_theta.to_string()),
            ("sim.initial_omega", sc.initial_omega.to_string()),
            ("sim.noise_std", sc.noise_std.to_string()),
            ("sim.controller", sc.controller_enabled.to_string()),
            ("sim.map", map),
            (
                "tune.plant",
                self.tune_plant.iter().map(f64::to_string).collect::<Vec<_>>().join(", "),
            ),
            ("tune.kp_min", self.tune_kp_range.0.to_string()),
            ("tune.kp_max", self.tune_kp_range.1.to_string()),
            ("tune.horizon", self.tune_horizon.to_string()),
            ("tune.dt", self.tune_dt.to_string()),
            ("tune.preset", if self.tune_paper_preset { "paper" } else { "none" }.to_string()),
            ("output.dir", self.out_dir.display().to_string()),
            ("output.format", self.format.extension().to_string()),
            ("seed", self.seed.to_string()),
        ];
        let mut s = String::new();
        for (k, v) in entries {
            if k == "cop.min_load" && v.is_empty() {
                continue;
            }
            let _ = writeln!(s, "{k} = {v}");
        }
        s
    }

    pub fn fuzzy(&self) -> FuzzyConfig {
        FuzzyConfig {
            activation_threshold: self.fuzzy_activation,
            ..FuzzyConfig::with_distance_threshold(self.fuzzy_threshold)
        }
    }

    pub fn limits(&self) -> ControllerLimits {
        self.scenario.limits
    }

    pub fn zones(&self) -> ZoneBounds {
        self.scenario.zones
    }

    /// Type-level checks beyond parsing: ranges and cross-field rules.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let inv = |m: String| Err(ConfigError::Invalid(m));
        if !(self.filter_cutoff > 0.0) {
            return inv(format!("filter.cutoff = {} must be positive", self.filter_cutoff));
        }
        if ![2, 4].contains(&self.filter_order) {
            return inv(format!("filter.order = {} must be 2 or 4", self.filter_order));
        }
        if !(self.fuzzy_threshold > 0.0 && self.fuzzy_threshold * 1.2 < 1.0) {
            return inv(format!("fuzzy.threshold = {} must lie in (0, 1/1.2)", self.fuzzy_threshold));
        }
        if !(self.fuzzy_activation > 0.0 && self.fuzzy_activation < 1.0) {
            return inv(format!("fuzzy.activation = {} must lie in (0, 1)", self.fuzzy_activation));
        }
        self.fuzzy().validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        self.gains.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        if !(self.distance_tol > 0.0) {
            return inv(format!("distance.tol = {} must be positive", self.distance_tol));
        }
        self.scenario.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        if self.tune_plant.is_empty() {
            return inv("tune.plant needs at least one coefficient".into());
        }
        let (lo, hi) = self.tune_kp_range;
        if !(lo > 0.0 && hi > lo) {
            return inv(format!("tune.kp_min = {lo}, tune.kp_max = {hi}: need 0 < min < max"));
        }
        if !(self.tune_horizon > 0.0 && self.tune_dt > 0.0 && self.tune_dt < self.tune_horizon) {
            return inv("tune.horizon and tune.dt must be positive with dt < horizon".into());
        }
        Ok(())
    }

    /// Every referenced input file must exist.
    pub fn check_paths(&self) -> Result<(), ConfigError> {
        let mut paths = vec![
            ("input.trial", self.trial.as_ref()),
            ("input.sidecar", self.sidecar.as_ref()),
            ("input.info_table", self.info_table.as_ref()),
        ];
        if let MapSource::File(p) = &self.map {
            paths.push(("sim.map", Some(p)));
        }
        for (key, p) in paths {
            if let Some(p) = p {
                if !p.is_file() {
                    return Err(ConfigError::MissingPath { key, path: p.clone() });
                }
            }
        }
        Ok(())
    }
}
