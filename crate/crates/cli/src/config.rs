//! JSON run configuration with unit-bearing strings, converted to SI once at parse time.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde_json::{Map, Value};

use eitsim_core::atoms::CircularPolarization;
use eitsim_core::calibrate::{FitParameter, PowerMap};
use eitsim_core::lineshape::{GeometryParams, VelocityAverage, DEFAULT_QUADRATURE_ORDER};
use eitsim_core::spectra::{uniform_grid, ControlSpec, Regime, Scenario};
use eitsim_core::TWO_PI;

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Spectrum,
    Rotate,
    Fit,
    Sweep,
    AtomsDump,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Spectrum => "spectrum",
            Command::Rotate => "rotate",
            Command::Fit => "fit",
            Command::Sweep => "sweep",
            Command::AtomsDump => "atoms-dump",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        match s {
            "spectrum" => Some(Command::Spectrum),
            "rotate" => Some(Command::Rotate),
            "fit" => Some(Command::Fit),
            "sweep" => Some(Command::Sweep),
            "atoms-dump" | "atoms_dump" => Some(Command::AtomsDump),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Population {
    MZero,
    Thermal,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RotateOptions {
    pub f_ground: i32,
    pub f_intermediate: i32,
    pub f_upper: i32,
    pub control_polarization: CircularPolarization,
    pub population: Population,
    /// rad
    pub input_angle: f64,
}

impl Default for RotateOptions {
    fn default() -> Self {
        RotateOptions {
            f_ground: 2,
            f_intermediate: 3,
            f_upper: 4,
            control_polarization: CircularPolarization::SigmaPlus,
            population: Population::MZero,
            input_angle: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitBound {
    pub parameter: FitParameter,
    pub initial: f64,
    pub lower: f64,
    pub upper: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitOptions {
    pub observations: PathBuf,
    pub free: Vec<FitBound>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub command: Command,
    pub scenario: Scenario,
    pub out_dir: PathBuf,
    pub plot: bool,
    /// W, for `sweep`.
    pub powers: Vec<f64>,
    pub rotate: RotateOptions,
    pub fit: Option<FitOptions>,
}

const SCENARIO_KEYS: &[&str] = &[
    "regime",
    "temperature",
    "optical_depth",
    "control_power",
    "control_rabi",
    "delta_c",
    "lines",
    "grid",
    "mode_diameter",
    "interaction_length",
    "transit_rate",
    "power_anchor",
    "velocity_average",
    "quadrature_order",
    "counter_propagating",
];
const TOP_KEYS: &[&str] = &["command", "out", "plot", "powers", "rotate", "fit"];

fn config_err(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

/// Dimension of a unit-bearing quantity.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dimension {
    Frequency,
    Power,
    Temperature,
    Length,
    Angle,
}

/// Parses `"<number> <unit>"` into SI (Hz, W, K, m, rad). The unit is mandatory.
pub fn parse_quantity(text: &str, dim: Dimension) -> Result<f64, CliError> {
    let text = text.trim();
    // the number ends at its last digit or decimal point; everything after is the unit
    let split = text
        .char_indices()
        .rfind(|(_, c)| c.is_ascii_digit() || *c == '.')
        .map(|(i, c)| i + c.len_utf8())
        .unwrap_or(0);
    let (num, unit) = text.split_at(split);
    let unit = unit.trim();
    let value: f64 = num
        .parse()
        .map_err(|_| config_err(format!("cannot read a number from {text:?}")))?;
    if unit.is_empty() {
        return Err(config_err(format!("{text:?} is missing a unit")));
    }
    let si = match (dim, unit) {
        (Dimension::Frequency, "Hz") => value,
        (Dimension::Frequency, "kHz") => value * 1e3,
        (Dimension::Frequency, "MHz") => value * 1e6,
        (Dimension::Frequency, "GHz") => value * 1e9,
        (Dimension::Frequency, "THz") => value * 1e12,
        (Dimension::Power, "W") => value,
        (Dimension::Power, "mW") => value * 1e-3,
        (Dimension::Power, "uW" | "μW" | "µW") => value * 1e-6,
        (Dimension::Power, "nW") => value * 1e-9,
        (Dimension::Power, "pW") => value * 1e-12,
        (Dimension::Temperature, "K") => value,
        (Dimension::Temperature, "C" | "°C" | "degC") => value + 273.15,
        (Dimension::Length, "m") => value,
        (Dimension::Length, "mm") => value * 1e-3,
        (Dimension::Length, "um" | "μm" | "µm") => value * 1e-6,
        (Dimension::Length, "nm") => value * 1e-9,
        (Dimension::Angle, "rad") => value,
        (Dimension::Angle, "deg" | "°") => value.to_radians(),
        _ => return Err(config_err(format!("unit {unit:?} is not a {dim:?} unit"))),
    };
    if !si.is_finite() {
        return Err(config_err(format!("{text:?} is not finite")));
    }
    Ok(si)
}

fn check_keys(obj: &Map<String, Value>, allowed: &[&str], context: &str) -> Result<(), CliError> {
    let unknown: Vec<&String> = obj.keys().filter(|k| !allowed.contains(&k.as_str())).collect();
    if unknown.is_empty() {
        Ok(())
    } else {
        Err(config_err(format!(
            "unknown key(s) in {context}: {}",
            unknown.iter().map(|k| k.as_str()).collect::<Vec<_>>().join(", ")
        )))
    }
}

fn quantity(v: &Value, key: &str, dim: Dimension) -> Result<f64, CliError> {
    match v {
        Value::String(s) => parse_quantity(s, dim).map_err(|e| config_err(format!("{key}: {e}"))),
        Value::Number(_) => Err(config_err(format!("{key}: {v} is missing a unit"))),
        _ => Err(config_err(format!("{key}: expected a string like \"7 uW\""))),
    }
}

fn number(v: &Value, key: &str) -> Result<f64, CliError> {
    v.as_f64()
        .ok_or_else(|| config_err(format!("{key}: expected a number")))
}

fn boolean(v: &Value, key: &str) -> Result<bool, CliError> {
    v.as_bool().ok_or_else(|| config_err(format!("{key}: expected true or false")))
}

fn string<'a>(v: &'a Value, key: &str) -> Result<&'a str, CliError> {
    v.as_str().ok_or_else(|| config_err(format!("{key}: expected a string")))
}

fn object<'a>(v: &'a Value, key: &str) -> Result<&'a Map<String, Value>, CliError> {
    v.as_object().ok_or_else(|| config_err(format!("{key}: expected an object")))
}

fn count(v: &Value, key: &str) -> Result<usize, CliError> {
    v.as_u64()
        .map(|n| n as usize)
        .ok_or_else(|| config_err(format!("{key}: expected a non-negative integer")))
}

fn parse_scenario(obj: &Map<String, Value>) -> Result<Scenario, CliError> {
    let mut s = Scenario::default();
    if let Some(v) = obj.get("regime") {
        s.regime = match string(v, "regime")? {
            "cold" => Regime::Cold,
            "warm_free_space" => Regime::WarmFreeSpace,
            "warm_nanofiber" => Regime::WarmNanofiber,
            other => return Err(config_err(format!("regime: unknown value {other:?}"))),
        };
    }
    if let Some(v) = obj.get("temperature") {
        s.temperature = quantity(v, "temperature", Dimension::Temperature)?;
        if s.temperature < 0.0 {
            return Err(config_err(format!("temperature: {} K is below absolute zero", s.temperature)));
        }
    }
    if let Some(v) = obj.get("optical_depth") {
        s.optical_depth = number(v, "optical_depth")?;
    }
    match (obj.get("control_power"), obj.get("control_rabi")) {
        (Some(_), Some(_)) => {
            return Err(config_err("give either control_power or control_rabi, not both"))
        }
        (Some(v), None) => s.control = ControlSpec::Power(quantity(v, "control_power", Dimension::Power)?),
        (None, Some(v)) => {
            s.control = ControlSpec::Rabi(TWO_PI * quantity(v, "control_rabi", Dimension::Frequency)?)
        }
        (None, None) => {}
    }
    if let Some(v) = obj.get("delta_c") {
        s.delta_c = quantity(v, "delta_c", Dimension::Frequency)?;
    }
    if let Some(v) = obj.get("lines") {
        let wanted: Vec<&str> = v
            .as_array()
            .ok_or_else(|| config_err("lines: expected a list such as [\"rb85_f2\"]"))?
            .iter()
            .map(|x| string(x, "lines"))
            .collect::<Result<_, _>>()?;
        let mut picked = Vec::new();
        for name in wanted {
            let line = s
                .lines
                .iter()
                .find(|l| line_label(l) == name)
                .ok_or_else(|| config_err(format!("lines: unknown line {name:?}")))?;
            picked.push(line.clone());
        }
        s.lines = picked;
    }
    if let Some(v) = obj.get("grid") {
        let g = object(v, "grid")?;
        check_keys(g, &["start", "stop", "points"], "grid")?;
        let start = g.get("start").map(|x| quantity(x, "grid.start", Dimension::Frequency)).transpose()?.unwrap_or(-8e9);
        let stop = g.get("stop").map(|x| quantity(x, "grid.stop", Dimension::Frequency)).transpose()?.unwrap_or(8e9);
        let points = g.get("points").map(|x| count(x, "grid.points")).transpose()?.unwrap_or(2001);
        s.grid = uniform_grid(start, stop, points).map_err(|e| config_err(format!("grid: {e}")))?;
    }
    let mut geometry = s.geometry.unwrap_or_else(GeometryParams::nanofiber);
    if let Some(v) = obj.get("mode_diameter") {
        // C is calibrated at the default diameter; a different diameter changes Γt as 1/d
        geometry.mode_diameter = quantity(v, "mode_diameter", Dimension::Length)?;
    }
    if let Some(v) = obj.get("interaction_length") {
        geometry.interaction_length = quantity(v, "interaction_length", Dimension::Length)?;
    }
    s.geometry = Some(geometry);
    if let Some(v) = obj.get("transit_rate") {
        s.transit_rate = Some(TWO_PI * quantity(v, "transit_rate", Dimension::Frequency)?);
    }
    if let Some(v) = obj.get("power_anchor") {
        let a = object(v, "power_anchor")?;
        check_keys(a, &["power", "rabi"], "power_anchor")?;
        let power = a
            .get("power")
            .ok_or_else(|| config_err("power_anchor.power is required"))
            .and_then(|x| quantity(x, "power_anchor.power", Dimension::Power))?;
        let rabi = a
            .get("rabi")
            .ok_or_else(|| config_err("power_anchor.rabi is required"))
            .and_then(|x| quantity(x, "power_anchor.rabi", Dimension::Frequency))?;
        s.power_map = Some(PowerMap::new(power, TWO_PI * rabi).map_err(|e| config_err(e.to_string()))?);
    }
    let order = obj.get("quadrature_order").map(|v| count(v, "quadrature_order")).transpose()?;
    if let Some(v) = obj.get("velocity_average") {
        s.velocity_average = match string(v, "velocity_average")? {
            "exact" => VelocityAverage::Exact,
            "gauss_hermite" => VelocityAverage::GaussHermite {
                order: order.unwrap_or(DEFAULT_QUADRATURE_ORDER),
            },
            other => return Err(config_err(format!("velocity_average: unknown value {other:?}"))),
        };
    } else if let Some(order) = order {
        s.velocity_average = VelocityAverage::GaussHermite { order };
    }
    if let Some(v) = obj.get("counter_propagating") {
        s.counter_propagating = boolean(v, "counter_propagating")?;
    }
    s.validate().map_err(|e| config_err(e.to_string()))?;
    Ok(s)
}

/// Short identifier such as `rb85_f2` for a line.
pub fn line_label(line: &eitsim_core::atoms::LadderLine) -> String {
    let iso = match line.isotope.name {
        eitsim_core::atoms::IsotopeName::Rb85 => "rb85",
        eitsim_core::atoms::IsotopeName::Rb87 => "rb87",
    };
    format!("{iso}_f{}", line.f_ground)
}

fn parse_rotate(v: &Value) -> Result<RotateOptions, CliError> {
    let obj = object(v, "rotate")?;
    check_keys(
        obj,
        &["f_ground", "f_intermediate", "f_upper", "control_polarization", "population", "input_angle"],
        "rotate",
    )?;
    let mut r = RotateOptions::default();
    let int = |key: &str| -> Result<Option<i32>, CliError> {
        obj.get(key)
            .map(|x| x.as_i64().map(|n| n as i32).ok_or_else(|| config_err(format!("rotate.{key}: expected an integer"))))
            .transpose()
    };
    r.f_ground = int("f_ground")?.unwrap_or(r.f_ground);
    r.f_intermediate = int("f_intermediate")?.unwrap_or(r.f_intermediate);
    r.f_upper = int("f_upper")?.unwrap_or(r.f_upper);
    if let Some(p) = obj.get("control_polarization") {
        r.control_polarization = match string(p, "rotate.control_polarization")? {
            "sigma_plus" => CircularPolarization::SigmaPlus,
            "sigma_minus" => CircularPolarization::SigmaMinus,
            other => return Err(config_err(format!("rotate.control_polarization: unknown value {other:?}"))),
        };
    }
    if let Some(p) = obj.get("population") {
        r.population = match string(p, "rotate.population")? {
            "m_zero" => Population::MZero,
            "thermal" => Population::Thermal,
            other => return Err(config_err(format!("rotate.population: unknown value {other:?}"))),
        };
    }
    if let Some(a) = obj.get("input_angle") {
        r.input_angle = quantity(a, "rotate.input_angle", Dimension::Angle)?;
    }
    Ok(r)
}

fn fit_parameter(name: &str) -> Result<(FitParameter, Option<Dimension>, f64), CliError> {
    // (parameter, unit dimension, SI → internal factor)
    match name {
        "rabi" => Ok((FitParameter::Rabi, Some(Dimension::Frequency), TWO_PI)),
        "optical_depth" => Ok((FitParameter::OpticalDepth, None, 1.0)),
        "transit_rate" => Ok((FitParameter::TransitRate, Some(Dimension::Frequency), TWO_PI)),
        "delta_c" => Ok((FitParameter::DeltaC, Some(Dimension::Frequency), 1.0)),
        "transmission_scale" => Ok((FitParameter::TransmissionScale, None, 1.0)),
        other => Err(config_err(format!("fit.free: unknown parameter {other:?}"))),
    }
}

fn parse_fit(v: &Value, base: &Path) -> Result<FitOptions, CliError> {
    let obj = object(v, "fit")?;
    check_keys(obj, &["observations", "free"], "fit")?;
    let observations = obj
        .get("observations")
        .ok_or_else(|| config_err("fit.observations (CSV path) is required"))
        .and_then(|x| string(x, "fit.observations"))?;
    let observations = base.join(observations);
    let free_obj = obj
        .get("free")
        .ok_or_else(|| config_err("fit.free is required"))
        .and_then(|x| object(x, "fit.free"))?;
    let mut free = Vec::new();
    for (name, spec) in free_obj {
        let (parameter, dim, factor) = fit_parameter(name)?;
        let spec = object(spec, &format!("fit.free.{name}"))?;
        check_keys(spec, &["initial", "lower", "upper"], &format!("fit.free.{name}"))?;
        let get = |key: &str| -> Result<f64, CliError> {
            let x = spec
                .get(key)
                .ok_or_else(|| config_err(format!("fit.free.{name}.{key} is required")))?;
            let label = format!("fit.free.{name}.{key}");
            Ok(factor * match dim {
                Some(d) => quantity(x, &label, d)?,
                None => number(x, &label)?,
            })
        };
        free.push(FitBound {
            parameter,
            initial: get("initial")?,
            lower: get("lower")?,
            upper: get("upper")?,
        });
    }
    Ok(FitOptions { observations, free })
}

/// Parses a JSON configuration. Relative paths inside resolve against `base`.
pub fn parse_config_str(text: &str, base: &Path) -> Result<RunConfig, CliError> {
    let root: Value = serde_json::from_str(text).map_err(|e| config_err(format!("malformed JSON: {e}")))?;
    let obj = object(&root, "configuration")?;
    let allowed: Vec<&str> = TOP_KEYS.iter().chain(SCENARIO_KEYS).copied().collect();
    check_keys(obj, &allowed, "configuration")?;

    let command = obj
        .get("command")
        .map(|v| {
            let name = string(v, "command")?;
            Command::from_name(name).ok_or_else(|| config_err(format!("command: unknown value {name:?}")))
        })
        .transpose()?
        .unwrap_or(Command::Spectrum);

    let scenario = parse_scenario(obj)?;
    let out_dir = obj
        .get("out")
        .map(|v| string(v, "out").map(|s| base.join(s)))
        .transpose()?
        .unwrap_or_else(|| base.join("out"));
    let plot = obj.get("plot").map(|v| boolean(v, "plot")).transpose()?.unwrap_or(false);
    let powers = match obj.get("powers") {
        Some(v) => v
            .as_array()
            .ok_or_else(|| config_err("powers: expected a list such as [\"7 uW\"]"))?
            .iter()
            .map(|p| quantity(p, "powers", Dimension::Power))
            .collect::<Result<Vec<_>, _>>()?,
        None => vec![0.2e-6, 2e-6, 7e-6, 45e-6],
    };
    if powers.iter().any(|p| *p < 0.0) {
        return Err(config_err("powers must be non-negative"));
    }
    let rotate = obj.get("rotate").map(parse_rotate).transpose()?.unwrap_or_default();
    let fit = obj.get("fit").map(|v| parse_fit(v, base)).transpose()?;
    if command == Command::Fit && fit.is_none() {
        return Err(config_err("the fit command needs a \"fit\" block"));
    }
    Ok(RunConfig {
        command,
        scenario,
        out_dir,
        plot,
        powers,
        rotate,
        fit,
    })
}

pub fn parse_config(path: &Path) -> Result<RunConfig, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    parse_config_str(&text, base)
}

/// Keys that may appear at the top level of a configuration.
pub fn known_keys() -> BTreeSet<&'static str> {
    TOP_KEYS.iter().chain(SCENARIO_KEYS).copied().collect()
}
