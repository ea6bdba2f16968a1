use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use balance_core::config::{MapSource, OutputFormat, RunConfig};
use balance_core::control::{tune_ziegler_nichols, AllPolePlant, PidGains};
use balance_core::ingest::{lowpass, parse_info_table, parse_sidecar, parse_trial, Trial};
use balance_core::phase::{
    distance_to_conic, extract_poincare_points, fit_conic, ConicMap, PhaseTrajectory, PoincareSet,
};
use balance_core::plant::{reference_map, simulate, SimTrace};
use balance_core::zones::{occupancy, to_foot_frame, Occupancy, ZoneLabel};
use balance_core::Point;
use serde::Serialize;

use crate::error::{CliError, Exit};
use crate::output::{file_stem_for, Outputs};

fn read_input(path: &Path) -> Result<Vec<u8>, CliError> {
    std::fs::read(path).map_err(|e| CliError::io(Exit::Data, path, e))
}

/// Trial with sidecar and info-table fields merged into its metadata.
pub fn load_trial(path: &Path, cfg: &RunConfig) -> Result<Trial, CliError> {
    let mut trial = parse_trial(&read_input(path)?)?;
    if trial.id.is_empty() {
        trial.id = path.file_stem().map_or_else(String::new, |s| s.to_string_lossy().into_owned());
    }
    if let Some(p) = &cfg.sidecar {
        for (k, v) in parse_sidecar(&read_input(p)?)? {
            trial.meta.entry(k).or_insert(v);
        }
    }
    if let Some(p) = &cfg.info_table {
        if let Some(row) = parse_info_table(&read_input(p)?, &trial.id)? {
            for (k, v) in row {
                trial.meta.entry(k).or_insert(v);
            }
        }
    }
    Ok(trial)
}

/// COP series of the trial, low-passed when the filter is enabled.
pub fn cop_of_trial(trial: &Trial, cfg: &RunConfig) -> Result<Vec<Point>, CliError> {
    let cop = trial.cop_series(cfg.cop_source)?;
    if !cfg.filter_enabled {
        return Ok(cop);
    }
    let xs: Vec<f64> = cop.iter().map(|p| p[0]).collect();
    let ys: Vec<f64> = cop.iter().map(|p| p[1]).collect();
    let xs = lowpass(&xs, trial.sample_rate, cfg.filter_cutoff, cfg.filter_order)?;
    let ys = lowpass(&ys, trial.sample_rate, cfg.filter_cutoff, cfg.filter_order)?;
    Ok(xs.into_iter().zip(ys).map(|(x, y)| [x, y]).collect())
}

pub fn conic_kind(m: &ConicMap) -> &'static str {
    let [a, b, c, d, e, f] = m.coeffs();
    let det = a * (c * f - e * e / 4.0) - b / 2.0 * (b / 2.0 * f - e * d / 4.0) + d / 2.0 * (b * e / 4.0 - c * d / 2.0);
    let disc = m.discriminant();
    let eps = 1e-12;
    match (det.abs() < eps, disc) {
        (true, x) if x > eps => "point ellipse",
        (true, x) if x < -eps => "line pair",
        (true, _) => "parallel lines",
        (false, x) if x > eps => {
            if a * det > 0.0 {
                "imaginary ellipse"
            } else {
                "ellipse"
            }
        }
        (false, x) if x < -eps => "hyperbola",
        _ => "parabola",
    }
}

#[derive(Serialize)]
struct PoincareJson<'a> {
    #[serde(flatten)]
    set: &'a PoincareSet,
    /// Subtracted trial mean, plate frame, cm.
    mean: Point,
}

#[derive(Serialize)]
pub struct AnalyzeSummary {
    pub id: String,
    pub samples: usize,
    pub sample_rate: f64,
    pub duration: f64,
    pub filter: Option<(f64, usize)>,
    pub conic: ConicMap,
    pub conic_kind: &'static str,
    pub d_mean: f64,
    pub d_max: f64,
    /// Share of samples with `d` above the gate threshold.
    pub d_above_threshold: f64,
    pub occupancy: Occupancy,
    pub meta: std::collections::BTreeMap<String, String>,
}

fn occupancy_csv(o: &Occupancy) -> String {
    let mut s = String::from("zone,fraction\n");
    for z in ZoneLabel::ALL {
        let _ = writeln!(s, "{z},{}", o.get(z));
    }
    s
}

pub fn analyze(paths: &[PathBuf], cfg: &RunConfig) -> Result<Vec<AnalyzeSummary>, CliError> {
    let mut paths = paths.to_vec();
    if paths.is_empty() {
        match &cfg.trial {
            Some(p) => paths.push(p.clone()),
            None => return Err(CliError::new(Exit::Config, "config::MissingInput", "no trial given (argument or input.trial)")),
        }
    }
    for p in &paths {
        if !p.is_file() {
            return Err(CliError::new(Exit::Config, "config::MissingPath", format!("no such file {}", p.display())));
        }
    }
    paths.iter().map(|p| analyze_one(p, cfg)).collect()
}

fn analyze_one(path: &Path, cfg: &RunConfig) -> Result<AnalyzeSummary, CliError> {
    let trial = load_trial(path, cfg)?;
    let cop = cop_of_trial(&trial, cfg)?;
    let traj = PhaseTrajectory::from_cop(&cop, trial.dt())?;
    let poincare = extract_poincare_points(&traj)?;
    let conic = fit_conic(&poincare)?;
    let d = traj
        .points
        .iter()
        .map(|&p| distance_to_conic(p, &conic, cfg.distance_tol))
        .collect::<Result<Vec<f64>, _>>()?;
    let zones = cfg.zones();
    let foot = to_foot_frame(&traj, &zones);
    let occ = occupancy(&foot, &zones)?;

    let dir = cfg.out_dir.join(file_stem_for(&trial.id));
    let mut out = Outputs::default();
    let dt = trial.dt();
    let mut traj_csv = String::from("t,x,y\n");
    let mut d_csv = String::from("t,d\n");
    for (i, (p, di)) in traj.points.iter().zip(&d).enumerate() {
        let t = i as f64 * dt;
        let _ = writeln!(traj_csv, "{t},{},{}", p[0], p[1]);
        let _ = writeln!(d_csv, "{t},{di}");
    }
    out.text(dir.join("trajectory.csv"), &traj_csv)?;
    out.json(
        dir.join("poincare.json"),
        &PoincareJson {
            set: &poincare,
            mean: traj.mean,
        },
    )?;
    out.json(dir.join("conic.json"), &conic)?;
    out.text(dir.join("distance.csv"), &d_csv)?;
    match cfg.format {
        OutputFormat::Json => out.json(dir.join("occupancy.json"), &occ)?,
        OutputFormat::Csv => out.text(dir.join("occupancy.csv"), &occupancy_csv(&occ))?,
    }

    let n = d.len() as f64;
    let summary = AnalyzeSummary {
        id: trial.id.clone(),
        samples: trial.samples.len(),
        sample_rate: trial.sample_rate,
        duration: trial.duration(),
        filter: cfg.filter_enabled.then_some((cfg.filter_cutoff, cfg.filter_order)),
        conic_kind: conic_kind(&conic),
        conic,
        d_mean: d.iter().sum::<f64>() / n,
        d_max: d.iter().copied().fold(0.0, f64::max),
        d_above_threshold: d.iter().filter(|&&x| x > cfg.fuzzy_threshold).count() as f64 / n,
        occupancy: occ,
        meta: trial.meta.clone(),
    };
    out.json(dir.join("summary.json"), &summary)?;
    print_analyze(&summary, &out);
    Ok(summary)
}

fn print_analyze(s: &AnalyzeSummary, out: &Outputs) {
    println!("trial {}: {} samples at {} Hz ({} s)", s.id, s.samples, s.sample_rate, s.duration);
    match s.filter {
        Some((fc, order)) => println!("  filter     order-{order} zero-phase low-pass at {fc} Hz"),
        None => println!("  filter     off"),
    }
    let c = s.conic.coeffs();
    println!(
        "  conic      {:.6}x² {:+.6}xy {:+.6}y² {:+.6}x {:+.6}y {:+.6} = 0 ({})",
        c[0], c[1], c[2], c[3], c[4], c[5], s.conic_kind
    );
    println!(
        "  distance   mean {:.4} cm, max {:.4} cm, {:.1}% above threshold",
        s.d_mean,
        s.d_max,
        100.0 * s.d_above_threshold
    );
    let o = &s.occupancy;
    println!(
        "  occupancy  HP {:.4}  LP {:.4}  UD {:.4}  US {:.4}",
        o.high_preference, o.low_preference, o.undesirable, o.unstable
    );
    for p in &out.written {
        println!("  wrote      {}", p.display());
    }
}

fn load_map(cfg: &RunConfig) -> Result<ConicMap, CliError> {
    match &cfg.map {
        MapSource::Builtin => Ok(reference_map()),
        MapSource::File(p) => {
            let bytes = read_input(p)?;
            serde_json::from_slice(&bytes)
                .map_err(|e| CliError::new(Exit::Data, "phase::InvalidMap", format!("{}: {e}", p.display())))
        }
        MapSource::Trial => {
            let Some(path) = &cfg.trial else {
                return Err(CliError::new(Exit::Config, "config::MissingInput", "sim.map = trial needs input.trial"));
            };
            let trial = load_trial(path, cfg)?;
            let cop = cop_of_trial(&trial, cfg)?;
            let traj = PhaseTrajectory::from_cop(&cop, trial.dt())?;
            Ok(fit_conic(&extract_poincare_points(&traj)?)?)
        }
    }
}

#[derive(Serialize)]
struct Recovery {
    pulse_start: f64,
    pulse_torque: f64,
    recovery_time: Option<f64>,
}

#[derive(Serialize)]
struct TraceSummary {
    samples: usize,
    duration: f64,
    episodes: usize,
    episode_times: Vec<(f64, f64)>,
    active_fraction: f64,
    max_u: f64,
    recovery: Vec<Recovery>,
    fall: Option<f64>,
    occupancy: Occupancy,
}

fn summarize(trace: &SimTrace, cfg: &RunConfig) -> Result<TraceSummary, CliError> {
    let n = trace.len();
    let episodes = trace.episodes();
    Ok(TraceSummary {
        samples: n,
        duration: n as f64 * cfg.scenario.plant.dt,
        episodes: episodes.len(),
        episode_times: episodes,
        active_fraction: trace.active.iter().filter(|a| **a).count() as f64 / n.max(1) as f64,
        max_u: trace.u.iter().copied().fold(0.0, f64::max),
        recovery: cfg
            .scenario
            .disturbances
            .iter()
            .map(|p| Recovery {
                pulse_start: p.start,
                pulse_torque: p.torque,
                recovery_time: trace.recovery_time(p, &cfg.scenario.disturbances),
            })
            .collect(),
        fall: trace.fall,
        occupancy: Occupancy::from_labels(&trace.zone)?,
    })
}

fn print_trace_summary(s: &TraceSummary, out: &Outputs) {
    println!("{} samples ({} s), {} activation episode(s)", s.samples, s.duration, s.episodes);
    for (a, b) in &s.episode_times {
        println!("  active     {a:.2} .. {b:.2} s");
    }
    for r in &s.recovery {
        match r.recovery_time {
            Some(t) => println!("  pulse      {} N·m at {} s: recovered after {t:.2} s", r.pulse_torque, r.pulse_start),
            None => println!("  pulse      {} N·m at {} s: not recovered", r.pulse_torque, r.pulse_start),
        }
    }
    let o = &s.occupancy;
    println!(
        "  occupancy  HP {:.4}  LP {:.4}  UD {:.4}  US {:.4}",
        o.high_preference, o.low_preference, o.undesirable, o.unstable
    );
    println!("  max u      {:.4}, active {:.1}% of samples", s.max_u, 100.0 * s.active_fraction);
    if let Some(t) = s.fall {
        println!("  FALL       at {t:.2} s");
    }
    for p in &out.written {
        println!("  wrote      {}", p.display());
    }
}

fn fall_error(t: f64) -> CliError {
    CliError::new(Exit::Runtime, "plant::Fall", format!("the body fell at t = {t:.3} s"))
}

pub fn simulate_cmd(cfg: &RunConfig) -> Result<(), CliError> {
    let map = load_map(cfg)?;
    let trace = simulate(&cfg.scenario, &map, &cfg.fuzzy(), &cfg.gains, cfg.seed)?;
    let summary = summarize(&trace, cfg)?;

    let mut out = Outputs::default();
    match cfg.format {
        OutputFormat::Csv => out.text(cfg.out_dir.join("trace.csv"), &trace.to_csv())?,
        OutputFormat::Json => out.json(cfg.out_dir.join("trace.json"), &trace)?,
    }
    out.json(cfg.out_dir.join("summary.json"), &summary)?;
    print_trace_summary(&summary, &out);
    match trace.fall {
        Some(t) => Err(fall_error(t)),
        None => Ok(()),
    }
}

#[derive(Serialize)]
struct GainsJson {
    kp: f64,
    ki: f64,
    kd: f64,
    source: &'static str,
    ultimate_gain: Option<f64>,
    ultimate_period: Option<f64>,
    decay_ratio: Option<f64>,
    plant_denominator: Option<Vec<f64>>,
}

pub fn tune_cmd(cfg: &RunConfig) -> Result<(), CliError> {
    let gains = if cfg.tune_paper_preset {
        let g = PidGains::PAPER;
        GainsJson {
            kp: g.kp,
            ki: g.ki,
            kd: g.kd,
            source: "paper",
            ultimate_gain: None,
            ultimate_period: None,
            decay_ratio: None,
            plant_denominator: None,
        }
    } else {
        let plant = AllPolePlant::new(cfg.tune_plant.clone())?;
        let r = tune_ziegler_nichols(
            |kp, horizon| plant.proportional_error(kp, horizon, cfg.tune_dt),
            cfg.tune_kp_range,
            cfg.tune_horizon,
        )?;
        GainsJson {
            kp: r.gains.kp,
            ki: r.gains.ki,
            kd: r.gains.kd,
            source: "ziegler-nichols",
            ultimate_gain: Some(r.ultimate_gain),
            ultimate_period: Some(r.ultimate_period),
            decay_ratio: Some(r.decay_ratio),
            plant_denominator: Some(cfg.tune_plant.clone()),
        }
    };
    let mut out = Outputs::default();
    out.json(cfg.out_dir.join("gains.json"), &gains)?;
    println!("gains ({}): kp = {}, ki = {}, kd = {}", gains.source, gains.kp, gains.ki, gains.kd);
    if let (Some(ku), Some(tu)) = (gains.ultimate_gain, gains.ultimate_period) {
        println!("  ultimate   K_u = {ku:.4}, T_u = {tu:.4} s");
    }
    for p in &out.written {
        println!("  wrote      {}", p.display());
    }
    Ok(())
}

pub fn report_cmd(trace_path: &Path, cfg: &RunConfig) -> Result<(), CliError> {
    if !trace_path.is_file() {
        return Err(CliError::new(
            Exit::Config,
            "config::MissingPath",
            format!("no such file {}", trace_path.display()),
        ));
    }
    let bytes = read_input(trace_path)?;
    let is_json = trace_path.extension().is_some_and(|e| e == "json");
    let trace = if is_json {
        serde_json::from_slice::<SimTrace>(&bytes)
            .map_err(|e| CliError::new(Exit::Data, "plant::TraceFormat", format!("{}: {e}", trace_path.display())))?
    } else {
        let text = String::from_utf8(bytes)
            .map_err(|_| CliError::new(Exit::Data, "plant::TraceFormat", "trace is not UTF-8"))?;
        SimTrace::from_csv(&text)?
    };
    let summary = summarize(&trace, cfg)?;
    let mut out = Outputs::default();
    match cfg.format {
        OutputFormat::Json => out.json(cfg.out_dir.join("report.json"), &summary)?,
        OutputFormat::Csv => {
            let o = &summary.occupancy;
            let mut s = String::from("metric,value\n");
            let _ = writeln!(s, "samples,{}", summary.samples);
            let _ = writeln!(s, "episodes,{}", summary.episodes);
            let _ = writeln!(s, "active_fraction,{}", summary.active_fraction);
            let _ = writeln!(s, "max_u,{}", summary.max_u);
            for z in ZoneLabel::ALL {
                let _ = writeln!(s, "occupancy_{z},{}", o.get(z));
            }
            for (i, r) in summary.recovery.iter().enumerate() {
                let v = r.recovery_time.map_or_else(|| "none".to_string(), |t| t.to_string());
                let _ = writeln!(s, "recovery_{i},{v}");
            }
            if let Some(t) = summary.fall {
                let _ = writeln!(s, "fall,{t}");
            }
            out.text(cfg.out_dir.join("report.csv"), &s)?;
        }
    }
    print_trace_summary(&summary, &out);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kinds() {
        assert_eq!(conic_kind(&ConicMap::ellipse([0.0, 0.0], 2.0, 1.0).unwrap()), "ellipse");
        assert_eq!(conic_kind(&ConicMap::new([0.0, 1.0, 0.0, 0.0, 0.0, -1.0]).unwrap()), "hyperbola");
        assert_eq!(conic_kind(&ConicMap::new([0.0, 1.0, 0.0, 0.0, 0.0, 0.0]).unwrap()), "line pair");
        assert_eq!(conic_kind(&ConicMap::new([1.0, 0.0, 0.0, 0.0, -1.0, 0.0]).unwrap()), "parabola");
        assert_eq!(conic_kind(&ConicMap::new([1.0, 0.0, 1.0, 0.0, 0.0, 1.0]).unwrap()), "imaginary ellipse");
        assert_eq!(conic_kind(&ConicMap::new([1.0, 0.0, 1.0, 0.0, 0.0, 0.0]).unwrap()), "point ellipse");
    }
}
