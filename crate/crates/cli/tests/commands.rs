use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn eitsim(args: &[&std::ffi::OsStr]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_eitsim")).args(args).output().unwrap()
}

fn write_config(dir: &Path, name: &str, body: &str) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, body).unwrap();
    path
}

fn run(command: &str, config: &Path, out: &Path, extra: &[&str]) -> Output {
    let mut args: Vec<&std::ffi::OsStr> = vec![command.as_ref(), "--config".as_ref(), config.as_os_str()];
    args.push("--out".as_ref());
    args.push(out.as_os_str());
    args.extend(extra.iter().map(std::ffi::OsStr::new));
    eitsim(&args)
}

fn read_json(path: PathBuf) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

const SPECTRUM: &str = r#"{"command": "spectrum", "control_power": "7 uW",
    "grid": {"start": "-2 GHz", "stop": "2 GHz", "points": 401}}"#;

#[test]
fn reruns_and_plots_leave_csv_bytes_unchanged() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "s.json", SPECTRUM);
    let (a, b, c) = (dir.path().join("a"), dir.path().join("b"), dir.path().join("c"));
    assert!(run("spectrum", &cfg, &a, &[]).status.success());
    assert!(run("spectrum", &cfg, &b, &[]).status.success());
    assert!(run("spectrum", &cfg, &c, &["--plot"]).status.success());
    for f in ["spectrum.csv", "spectrum_no_control.csv", "spectrum.json"] {
        let first = std::fs::read(a.join(f)).unwrap();
        assert_eq!(first, std::fs::read(b.join(f)).unwrap(), "{f}");
        assert_eq!(first, std::fs::read(c.join(f)).unwrap(), "{f}");
    }
    assert!(!a.join("spectrum.svg").exists());
    assert!(c.join("spectrum.svg").exists());
}

#[test]
fn spectrum_report_lists_artifacts_and_window() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "s.json", SPECTRUM);
    let out = dir.path().join("o");
    let output = run("spectrum", &cfg, &out, &[]);
    assert!(output.status.success(), "{}", String::from_utf8_lossy(&output.stderr));
    let report = read_json(out.join("report.json"));
    assert_eq!(report["command"], "spectrum");
    for a in report["artifacts"].as_array().unwrap() {
        assert!(Path::new(a.as_str().unwrap()).exists());
    }
    let lines = report["metrics"]["lines"].as_array().unwrap();
    assert_eq!(lines.len(), 4);
    let reference = lines
        .iter()
        .min_by(|a, b| {
            let x = a["center_hz"].as_f64().unwrap().abs();
            let y = b["center_hz"].as_f64().unwrap().abs();
            x.total_cmp(&y)
        })
        .unwrap();
    let t = reference["window"]["window_transmission"].as_f64().unwrap();
    assert!((t - 0.20).abs() < 0.05, "{t}");
}

#[test]
fn sweep_summary_is_monotone() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "sweep.json",
        r#"{"command": "sweep", "grid": {"start": "-2.5 GHz", "stop": "2.5 GHz", "points": 1001}}"#,
    );
    let out = dir.path().join("o");
    assert!(run("sweep", &cfg, &out, &["--plot"]).status.success());
    let summary = read_json(out.join("sweep_summary.json"));
    let entries = summary["entries"].as_array().unwrap();
    assert_eq!(entries.len(), 4);
    let t: Vec<f64> = entries.iter().map(|e| e["transmission_at_reference"].as_f64().unwrap()).collect();
    assert!(t.windows(2).all(|w| w[1] > w[0]), "{t:?}");
    for e in entries {
        assert!(out.join(e["file"].as_str().unwrap()).exists());
    }
    assert!(out.join("sweep_00_200nW.csv").exists());
    assert!(out.join("sweep.svg").exists());
}

#[test]
fn rotate_finds_crossed_peak_near_control_detuning() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "rotate.json",
        r#"{"command": "rotate", "control_power": "20 uW", "delta_c": "700 MHz",
            "grid": {"start": "-500 MHz", "stop": "1500 MHz", "points": 801}}"#,
    );
    let out = dir.path().join("o");
    assert!(run("rotate", &cfg, &out, &[]).status.success());
    let summary = read_json(out.join("rotate.json"));
    let peak = summary["configured"]["t_crossed_peak_hz"].as_f64().unwrap();
    assert!((peak - 700e6).abs() <= 150e6, "{peak}");
    let csv = std::fs::read_to_string(out.join("rotate.csv")).unwrap();
    assert!(csv.starts_with("delta_s_hz,t_parallel,t_crossed,rotation_deg\n"));
    assert!(out.join("rotate_thermal.csv").exists());
}

#[test]
fn atoms_dump_needs_no_config() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o");
    let output = eitsim(&["atoms-dump".as_ref(), "--out".as_ref(), out.as_os_str()]);
    assert!(output.status.success());
    let atoms = read_json(out.join("atoms.json"));
    assert!(atoms.is_object());
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o");

    let unknown = write_config(dir.path(), "bad.json", r#"{"command": "spectrum", "colour": "red"}"#);
    let o = run("spectrum", &unknown, &out, &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("colour"));

    let mismatch = write_config(dir.path(), "rot.json", r#"{"command": "rotate"}"#);
    assert_eq!(run("spectrum", &mismatch, &out, &[]).status.code(), Some(2));

    let cfg = write_config(dir.path(), "s.json", SPECTRUM);
    assert_eq!(run("spectrum", &cfg, &out, &["--quadrature-order", "4"]).status.code(), Some(2));

    let missing = dir.path().join("absent.json");
    assert_eq!(run("spectrum", &missing, &out, &[]).status.code(), Some(4));

    let obs = write_config(dir.path(), "obs.csv", "delta_s_hz,transmission\n0,0.5\n");
    let fit = write_config(
        dir.path(),
        "fit.json",
        &format!(
            r#"{{"command": "fit", "fit": {{"observations": "{}", "free": {{"optical_depth": {{"initial": 2, "lower": 0.1, "upper": 5}}, "rabi": {{"initial": "100 MHz", "lower": "1 MHz", "upper": "500 MHz"}}}}}}}}"#,
            obs.display()
        ),
    );
    assert_eq!(run("fit", &fit, &out, &[]).status.code(), Some(2));
}

#[test]
fn quadrature_override_changes_method_only_slightly() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "s.json", SPECTRUM);
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    assert!(run("spectrum", &cfg, &a, &[]).status.success());
    assert!(run("spectrum", &cfg, &b, &["--quadrature-order", "1000"]).status.success());
    let col = |p: PathBuf| -> Vec<f64> {
        std::fs::read_to_string(p)
            .unwrap()
            .lines()
            .skip(1)
            .map(|l| l.split(',').nth(3).unwrap().parse().unwrap())
            .collect()
    };
    let (x, y) = (col(a.join("spectrum.csv")), col(b.join("spectrum.csv")));
    let worst = x.iter().zip(&y).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max);
    assert!(worst < 1e-9, "{worst}");
}
