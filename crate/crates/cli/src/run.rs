//! Command execution and artifact writing.

use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use serde_json::{json, Value};

use eitsim_core::atoms::{atoms_dump, pathway_set, PathwaySet};
use eitsim_core::calibrate::{fit_spectrum, FitParameter, FitProblem, FreeParameter, Observation};
use eitsim_core::polarization::{analyzer_spectrum, AnalyzerResult, JonesVector};
use eitsim_core::spectra::{
    compute_spectrum, detect_splitting, dip_fwhm, sweep, window_metrics, ControlSpec, Scenario,
    Spectrum,
};
use eitsim_core::TWO_PI;

use crate::config::{line_label, Command, FitOptions, Population, RunConfig};
use crate::svg::{line_plot, Series};
use crate::CliError;

#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub command: String,
    pub wall_time_s: f64,
    pub artifacts: Vec<PathBuf>,
    pub metrics: Value,
}

struct Writer {
    dir: PathBuf,
    artifacts: Vec<PathBuf>,
}

impl Writer {
    fn new(dir: &Path) -> Result<Self, CliError> {
        std::fs::create_dir_all(dir).map_err(|e| CliError::Io {
            path: dir.to_path_buf(),
            source: e,
        })?;
        Ok(Writer {
            dir: dir.to_path_buf(),
            artifacts: Vec::new(),
        })
    }

    fn write(&mut self, name: &str, contents: &str) -> Result<(), CliError> {
        let path = self.dir.join(name);
        std::fs::write(&path, contents).map_err(|e| CliError::Io {
            path: path.clone(),
            source: e,
        })?;
        self.artifacts.push(path);
        Ok(())
    }

    fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), CliError> {
        let text = serde_json::to_string_pretty(value).map_err(|e| CliError::Io {
            path: self.dir.join(name),
            source: e.into(),
        })?;
        self.write(name, &(text + "\n"))
    }
}

fn mhz(grid: &[f64]) -> Vec<f64> {
    grid.iter().map(|x| x / 1e6).collect()
}

/// Runs the configured command and writes its artifacts plus `report.json`.
pub fn run(config: &RunConfig) -> Result<RunReport, CliError> {
    let start = Instant::now();
    let mut w = Writer::new(&config.out_dir)?;
    let outcome = match config.command {
        Command::Spectrum => run_spectrum(config, &mut w),
        Command::Sweep => run_sweep(config, &mut w),
        Command::Rotate => run_rotate(config, &mut w),
        Command::Fit => run_fit(config, &mut w),
        Command::AtomsDump => w.write_json("atoms.json", &atoms_dump()).map(|_| Value::Null).map_err(RunFailure::from),
    };
    let (metrics, failure) = match outcome {
        Ok(m) => (m, None),
        Err(RunFailure { metrics, error }) => (metrics, Some(error)),
    };
    let mut report = RunReport {
        command: config.command.name().to_string(),
        wall_time_s: 0.0,
        artifacts: w.artifacts.clone(),
        metrics,
    };
    report.artifacts.push(w.dir.join("report.json"));
    report.wall_time_s = start.elapsed().as_secs_f64();
    w.write_json("report.json", &report)?;
    match failure {
        Some(e) => Err(e),
        None => Ok(report),
    }
}

/// An error raised after some artifacts and metrics were already produced.
struct RunFailure {
    metrics: Value,
    error: CliError,
}

impl<E: Into<CliError>> From<E> for RunFailure {
    fn from(e: E) -> Self {
        RunFailure {
            metrics: Value::Null,
            error: e.into(),
        }
    }
}

fn line_metrics(with: &Spectrum, without: &Spectrum) -> Vec<Value> {
    with.scenario
        .lines
        .iter()
        .map(|line| {
            let c = line.signal_center_offset;
            let window = match window_metrics(with, without, c) {
                Ok(m) => serde_json::to_value(m).unwrap_or(Value::Null),
                Err(e) => json!({ "error": e.to_string() }),
            };
            let shape = match detect_splitting(with, c) {
                Ok(s) => serde_json::to_value(s).unwrap_or(Value::Null),
                Err(e) => json!({ "error": e.to_string() }),
            };
            json!({
                "line": line_label(line),
                "center_hz": c,
                "transmission_at_center": with.transmission_at(c),
                "window": window,
                "dip_fwhm_hz": dip_fwhm(with, c).ok(),
                "shape": shape,
            })
        })
        .collect()
}

fn run_spectrum(config: &RunConfig, w: &mut Writer) -> Result<Value, RunFailure> {
    let with = compute_spectrum(&config.scenario)?;
    let without = compute_spectrum(&config.scenario.with_control(ControlSpec::Rabi(0.0)))?;
    w.write("spectrum.csv", &with.to_csv())?;
    w.write("spectrum_no_control.csv", &without.to_csv())?;
    w.write_json("spectrum.json", &with)?;
    if config.plot {
        let x = mhz(&with.grid);
        let svg = line_plot(
            "Signal transmission",
            "signal detuning (MHz)",
            "transmission",
            &[
                Series { label: "no control".into(), x: &x, y: &without.transmission },
                Series {
                    label: format!("Ωc/2π = {:.0} MHz", with.rabi_c / TWO_PI / 1e6),
                    x: &x,
                    y: &with.transmission,
                },
            ],
        );
        w.write("spectrum.svg", &svg)?;
    }
    Ok(json!({
        "rabi_c_over_2pi_hz": with.rabi_c / TWO_PI,
        "optical_depth": with.optical_depth,
        "normalization": with.normalization,
        "lines": line_metrics(&with, &without),
    }))
}

fn run_sweep(config: &RunConfig, w: &mut Writer) -> Result<Value, RunFailure> {
    if config.powers.is_empty() {
        return Err(CliError::Config("powers list is empty".into()).into());
    }
    let mut scenarios: Vec<Scenario> = config
        .powers
        .iter()
        .map(|&p| config.scenario.with_control(ControlSpec::Power(p)))
        .collect();
    scenarios.push(config.scenario.with_control(ControlSpec::Rabi(0.0)));
    let mut spectra = sweep(&scenarios)?;
    let without = spectra.pop().expect("baseline spectrum");
    let reference = config.scenario.nearest_line(0.0)?.signal_center_offset;

    let mut entries = Vec::new();
    for (i, (s, p)) in spectra.iter().zip(&config.powers).enumerate() {
        let name = format!("sweep_{i:02}_{:.0}nW.csv", p * 1e9);
        w.write(&name, &s.to_csv())?;
        let window = window_metrics(s, &without, reference).ok();
        entries.push(json!({
            "power_w": p,
            "rabi_c_over_2pi_hz": s.rabi_c / TWO_PI,
            "file": name,
            "transmission_at_reference": s.transmission_at(reference),
            "window": window,
            "dip_fwhm_hz": dip_fwhm(s, reference).ok(),
            "shape": detect_splitting(s, reference).ok(),
        }));
    }
    w.write("sweep_no_control.csv", &without.to_csv())?;
    let summary = json!({ "reference_center_hz": reference, "entries": entries });
    w.write_json("sweep_summary.json", &summary)?;
    if config.plot {
        let x = mhz(&without.grid);
        let mut series = vec![Series { label: "no control".into(), x: &x, y: &without.transmission }];
        for (s, p) in spectra.iter().zip(&config.powers) {
            series.push(Series { label: format!("{} μW", p * 1e6), x: &x, y: &s.transmission });
        }
        w.write("sweep.svg", &line_plot("Control power sweep", "signal detuning (MHz)", "transmission", &series))?;
    }
    Ok(summary)
}

fn analyzer_summary(a: &AnalyzerResult, delta_c: f64) -> Value {
    let local_max = |y: &[f64]| -> Option<usize> {
        (1..y.len().saturating_sub(1))
            .filter(|&i| y[i] > y[i - 1] && y[i] >= y[i + 1])
            .min_by(|&i, &j| (a.grid[i] - delta_c).abs().total_cmp(&(a.grid[j] - delta_c).abs()))
    };
    let peak = local_max(&a.t_crossed);
    let window = local_max(&a.t_parallel);
    let max_rot = a.rotation_angle.iter().cloned().fold(0.0, |m: f64, r| if r.abs() > m.abs() { r } else { m });
    json!({
        "kl": a.kl,
        "t_crossed_peak_hz": peak.map(|i| a.grid[i]),
        "t_crossed_peak": peak.map(|i| a.t_crossed[i]),
        "rotation_deg_at_peak": peak.map(|i| a.rotation_angle[i].to_degrees()),
        "t_parallel_window_hz": window.map(|i| a.grid[i]),
        "max_abs_rotation_deg": max_rot.to_degrees(),
    })
}

fn run_rotate(config: &RunConfig, w: &mut Writer) -> Result<Value, RunFailure> {
    let r = &config.rotate;
    let build = |pop: Population| {
        let weights = match pop {
            Population::MZero => PathwaySet::m_zero_population(),
            Population::Thermal => PathwaySet::thermal_population(r.f_ground),
        };
        pathway_set(r.f_ground, r.f_intermediate, r.f_upper, r.control_polarization, &weights)
    };
    let input = JonesVector::linear(r.input_angle);
    let (other, other_name) = match r.population {
        Population::MZero => (Population::Thermal, "thermal"),
        Population::Thermal => (Population::MZero, "m_zero"),
    };
    let primary = analyzer_spectrum(&config.scenario, &build(r.population)?, input)?;
    let secondary = analyzer_spectrum(&config.scenario, &build(other)?, input)?;
    w.write("rotate.csv", &primary.to_csv())?;
    let other_file = format!("rotate_{other_name}.csv");
    w.write(&other_file, &secondary.to_csv())?;
    let summary = json!({
        "delta_c_hz": config.scenario.delta_c,
        "rabi_c_over_2pi_hz": config.scenario.rabi()? / TWO_PI,
        "configured": analyzer_summary(&primary, config.scenario.delta_c),
        other_name: analyzer_summary(&secondary, config.scenario.delta_c),
    });
    w.write_json("rotate.json", &summary)?;
    if config.plot {
        let x = mhz(&primary.grid);
        w.write(
            "rotate.svg",
            &line_plot(
                "Crossed-analyzer transmission",
                "signal detuning (MHz)",
                "transmission",
                &[
                    Series { label: "crossed".into(), x: &x, y: &primary.t_crossed },
                    Series { label: format!("crossed ({other_name})"), x: &x, y: &secondary.t_crossed },
                ],
            ),
        )?;
        w.write(
            "rotate_parallel.svg",
            &line_plot(
                "Parallel-analyzer transmission",
                "signal detuning (MHz)",
                "transmission",
                &[Series { label: "parallel".into(), x: &x, y: &primary.t_parallel }],
            ),
        )?;
    }
    Ok(summary)
}

/// Reads `delta_s_hz,transmission[,weight]` rows.
pub fn read_observations(path: &Path) -> Result<Vec<Observation>, CliError> {
    let io = |e: std::io::Error| CliError::Io { path: path.to_path_buf(), source: e };
    let file = std::fs::File::open(path).map_err(io)?;
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file);
    let headers = reader
        .headers()
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?
        .clone();
    let col = |name: &str| headers.iter().position(|h| h == name);
    let (xi, ti) = match (col("delta_s_hz"), col("transmission")) {
        (Some(x), Some(t)) => (x, t),
        _ => {
            return Err(CliError::Config(format!(
                "{}: header must contain delta_s_hz and transmission",
                path.display()
            )))
        }
    };
    let wi = col("weight");
    let mut out = Vec::new();
    for (row, record) in reader.records().enumerate() {
        let record = record.map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let field = |i: usize| -> Result<f64, CliError> {
            record
                .get(i)
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| CliError::Config(format!("{} row {}: bad number", path.display(), row + 2)))
        };
        out.push(Observation {
            delta_s_hz: field(xi)?,
            transmission: field(ti)?,
            weight: match wi {
                Some(i) => field(i)?,
                None => 1.0,
            },
        });
    }
    Ok(out)
}

fn display_value(p: FitParameter, v: f64) -> (&'static str, f64) {
    match p {
        FitParameter::Rabi => ("rabi_over_2pi_hz", v / TWO_PI),
        FitParameter::OpticalDepth => ("optical_depth", v),
        FitParameter::TransitRate => ("transit_rate_over_2pi_hz", v / TWO_PI),
        FitParameter::DeltaC => ("delta_c_hz", v),
        FitParameter::TransmissionScale => ("transmission_scale", v),
    }
}

fn run_fit(config: &RunConfig, w: &mut Writer) -> Result<Value, RunFailure> {
    let FitOptions { observations, free } = config
        .fit
        .as_ref()
        .ok_or_else(|| CliError::Config("the fit command needs a \"fit\" block".into()))?;
    let problem = FitProblem {
        observations: read_observations(observations)?,
        free_parameters: free
            .iter()
            .map(|b| FreeParameter {
                parameter: b.parameter,
                initial: b.initial,
                lower: b.lower,
                upper: b.upper,
            })
            .collect(),
        scenario: config.scenario.clone(),
    };
    let result = fit_spectrum(&problem)?;
    let fitted: serde_json::Map<String, Value> = result
        .parameters
        .iter()
        .map(|(p, v)| {
            let (k, d) = display_value(*p, *v);
            (k.to_string(), json!(d))
        })
        .collect();
    let summary = json!({
        "fitted": fitted,
        "residual_sum_squares": result.residual_sum_squares,
        "initial_residual_sum_squares": result.initial_residual_sum_squares,
        "iterations": result.iterations,
        "converged": result.converged,
        "observations": problem.observations.len(),
    });
    w.write_json("fit.json", &summary)?;
    if !result.converged {
        return Err(RunFailure {
            metrics: summary,
            error: CliError::NotConverged { iterations: result.iterations },
        });
    }
    Ok(summary)
}
