use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use balance_core::plant::SimTrace;
use serde_json::Value;

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

fn balance(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_balance"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .expect("run balance")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn analyze_ellipse_fixture() {
    let dir = tempfile::tempdir().unwrap();
    let trial = fixture("ellipse.txt");
    let o = balance(&["analyze", trial.to_str().unwrap()], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let base = dir.path().join("ELLI0BDS");

    let occ = std::fs::read_to_string(base.join("occupancy.csv")).unwrap();
    assert_eq!(occ.lines().nth(1), Some("HP,1"));

    // Five points of the generating ellipse after centering: (±1, 0),
    // (0, ±0.5) and the origin. The only conic through them is xy = 0.
    let c = json(&base.join("conic.json"));
    let got: Vec<f64> = ["a", "b", "c", "d", "e", "f"].iter().map(|k| c[k].as_f64().unwrap()).collect();
    let want = [0.0, 1.0, 0.0, 0.0, 0.0, 0.0];
    for (g, w) in got.iter().zip(want) {
        assert!((g - w).abs() < 1e-6, "{got:?}");
    }

    let p = json(&base.join("poincare.json"));
    let x_max: Vec<f64> = p["x_max"].as_array().unwrap().iter().map(|v| v.as_f64().unwrap()).collect();
    assert!((x_max[0] - 1.0).abs() < 1e-6 && x_max[1].abs() < 1e-6);
    let mean = p["mean"][0].as_f64().unwrap();
    assert!((mean - 0.5).abs() < 1e-6, "{mean}");

    let d = std::fs::read_to_string(base.join("distance.csv")).unwrap();
    let mut lines = d.lines();
    assert_eq!(lines.next(), Some("t,d"));
    let rows: Vec<(f64, f64)> = lines
        .map(|l| {
            let (t, v) = l.split_once(',').unwrap();
            (t.parse().unwrap(), v.parse().unwrap())
        })
        .collect();
    assert_eq!(rows.len(), 6000);
    assert!(rows.iter().all(|&(_, v)| v >= 0.0));
    // Distance to the line pair xy = 0 is min(|x|, |y|).
    let traj = std::fs::read_to_string(base.join("trajectory.csv")).unwrap();
    for (line, &(_, dv)) in traj.lines().skip(1).zip(&rows) {
        let v: Vec<f64> = line.split(',').map(|s| s.parse().unwrap()).collect();
        assert!((dv - v[1].abs().min(v[2].abs())).abs() < 1e-6);
    }
}

#[test]
fn analyze_json_occupancy_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let trial = fixture("ellipse.txt");
    let o = balance(&["analyze", trial.to_str().unwrap(), "--format", "json"], dir.path());
    assert!(o.status.success());
    let occ = json(&dir.path().join("ELLI0BDS/occupancy.json"));
    assert_eq!(occ["HP"].as_f64(), Some(1.0));
    assert_eq!(occ["samples"].as_u64(), Some(6000));
    let summary = json(&dir.path().join("ELLI0BDS/summary.json"));
    assert_eq!(summary["meta"]["vision"], "open");
    assert!(String::from_utf8_lossy(&o.stdout).contains("occupancy  HP 1.0000"));
}

#[test]
fn analyze_missing_file_names_path() {
    let dir = tempfile::tempdir().unwrap();
    let o = balance(&["analyze", "/no/such/trial.txt"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("/no/such/trial.txt"));
}

#[test]
fn analyze_bad_record_is_data_error() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.txt");
    std::fs::write(&bad, "# id: X\n0 0 0 700 0 0 0 0 0\n0.01 0 0 700 0 0\n").unwrap();
    let o = balance(&["analyze", bad.to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("ingest::RowArity"), "{}", stderr(&o));
}

#[test]
fn analyze_cutoff_above_nyquist_is_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let trial = fixture("ellipse.txt");
    let o = balance(&["analyze", trial.to_str().unwrap(), "--filter-cutoff", "80"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("ingest::CutoffOutOfRange"));
}

#[test]
fn simulate_is_deterministic() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for d in [&a, &b] {
        let o = balance(&["simulate", "--seed", "7", "--set", "sim.noise_std=0.01"], d.path());
        assert!(o.status.success(), "{}", stderr(&o));
    }
    for f in ["trace.csv", "summary.json"] {
        let x = std::fs::read(a.path().join(f)).unwrap();
        let y = std::fs::read(b.path().join(f)).unwrap();
        assert_eq!(x, y, "{f} differs");
    }
}

#[test]
fn reference_pulse_gives_one_episode() {
    let dir = tempfile::tempdir().unwrap();
    let o = balance(&["simulate"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let s = json(&dir.path().join("summary.json"));
    assert_eq!(s["episodes"].as_u64(), Some(1));
    assert!(s["fall"].is_null());
    let rec = s["recovery"][0]["recovery_time"].as_f64().unwrap();
    assert!(rec > 0.0 && rec < 10.0);

    let text = std::fs::read_to_string(dir.path().join("trace.csv")).unwrap();
    let trace = SimTrace::from_csv(&text).unwrap();
    assert_eq!(trace.len(), 3000);
    assert_eq!(trace.to_csv(), text);
}

#[test]
fn simulate_json_trace() {
    let dir = tempfile::tempdir().unwrap();
    let o = balance(&["simulate", "--format", "json", "--set", "sim.duration=8"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let t: SimTrace = serde_json::from_str(&std::fs::read_to_string(dir.path().join("trace.json")).unwrap()).unwrap();
    assert_eq!(t.len(), 800);
}

#[test]
fn simulate_rejects_zero_duration() {
    let dir = tempfile::tempdir().unwrap();
    let o = balance(&["simulate", "--set", "sim.duration=0"], dir.path());
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn fall_has_its_own_exit_code() {
    let dir = tempfile::tempdir().unwrap();
    let o = balance(&["simulate", "--set", "sim.controller=false"], dir.path());
    assert_eq!(o.status.code(), Some(4));
    assert!(stderr(&o).contains("plant::Fall"));
    let s = json(&dir.path().join("summary.json"));
    assert!(s["fall"].as_f64().unwrap() < 30.0);
}

#[test]
fn threshold_flag_reaches_the_gate() {
    // A wider gate lets the push carry the body further before the
    // controller steps in.
    let first_activation = |extra: &[&str]| {
        let dir = tempfile::tempdir().unwrap();
        let mut args = vec!["simulate"];
        args.extend_from_slice(extra);
        let o = balance(&args, dir.path());
        assert!(o.status.success(), "{}", stderr(&o));
        let s = json(&dir.path().join("summary.json"));
        s["episode_times"][0][0].as_f64().unwrap()
    };
    let default = first_activation(&[]);
    let wide = first_activation(&["--threshold", "0.3"]);
    assert!(wide > default + 0.05, "{default} vs {wide}");
}

#[test]
fn config_file_and_flag_precedence() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    std::fs::write(&cfg, "# short run\nsim.duration = 10\noutput.format = json\nseed = 3\n").unwrap();
    let o = balance(&["simulate", "--config", cfg.to_str().unwrap(), "--format", "csv"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let text = std::fs::read_to_string(dir.path().join("trace.csv")).unwrap();
    assert_eq!(SimTrace::from_csv(&text).unwrap().len(), 1000);
    assert!(!dir.path().join("trace.json").exists());

    std::fs::write(&cfg, "sim.duratoin = 10\n").unwrap();
    let o = balance(&["simulate", "--config", cfg.to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("config::UnknownKey"));
}

#[test]
fn tune_benchmark_plant() {
    let dir = tempfile::tempdir().unwrap();
    let o = balance(&["tune"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let g = json(&dir.path().join("gains.json"));
    for (k, want) in [("kp", 3.6), ("ki", 1.62), ("kd", 2.00)] {
        let v = g[k].as_f64().unwrap();
        assert!((v - want).abs() / want < 0.1, "{k} = {v}");
    }
    assert!((g["ultimate_gain"].as_f64().unwrap() - 6.0).abs() < 0.6);
    assert!(g["ultimate_period"].as_f64().is_some());
}

#[test]
fn tune_first_order_fails() {
    let dir = tempfile::tempdir().unwrap();
    let o = balance(&["tune", "--set", "tune.plant=1"], dir.path());
    assert_eq!(o.status.code(), Some(4));
    assert!(stderr(&o).contains("NoUltimateGain"));
}

#[test]
fn tune_paper_preset() {
    let dir = tempfile::tempdir().unwrap();
    let o = balance(&["tune", "--preset", "paper", "--set", "tune.plant=1"], dir.path());
    assert!(o.status.success());
    let g = json(&dir.path().join("gains.json"));
    assert_eq!((g["kp"].as_f64(), g["ki"].as_f64(), g["kd"].as_f64()), (Some(0.87), Some(1.0), Some(0.93)));
    assert_eq!(g["source"], "paper");
}

#[test]
fn report_on_simulated_trace() {
    let dir = tempfile::tempdir().unwrap();
    assert!(balance(&["simulate"], dir.path()).status.success());
    let trace = dir.path().join("trace.csv");
    let o = balance(&["report", trace.to_str().unwrap(), "--format", "json"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let r = json(&dir.path().join("report.json"));
    assert_eq!(r["episodes"].as_u64(), Some(1));
    assert_eq!(r["occupancy"]["HP"].as_f64(), Some(1.0));

    let o = balance(&["report", trace.to_str().unwrap()], dir.path());
    assert!(o.status.success());
    let csv = std::fs::read_to_string(dir.path().join("report.csv")).unwrap();
    assert!(csv.starts_with("metric,value\n"));
    assert!(csv.contains("episodes,1\n"));

    let bad = dir.path().join("bad.csv");
    std::fs::write(&bad, "nonsense\n").unwrap();
    let o = balance(&["report", bad.to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn simulate_on_fitted_trial_map() {
    let dir = tempfile::tempdir().unwrap();
    let trial = fixture("ellipse.txt");
    let o = balance(
        &[
            "simulate",
            "--set",
            &format!("input.trial={}", trial.display()),
            "--set",
            "sim.map=trial",
            "--set",
            "sim.duration=10",
        ],
        dir.path(),
    );
    // Exit 0 or 4 are both outcomes of a valid run; anything else is not.
    assert!(matches!(o.status.code(), Some(0) | Some(4)), "{}", stderr(&o));
    assert!(dir.path().join("trace.csv").exists());
}
