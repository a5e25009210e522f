//! Multi-line transmission spectra, window metrics and splitting diagnostics.

use std::fmt::Write as _;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::atoms::{default_line_set, LadderLine};
use crate::calibrate::PowerMap;
use crate::error::invalid;
use crate::lineshape::{
    doppler_fwhm, transit_rate, DecoherenceRates, Detunings, GeometryParams, LineKernel,
    ThermalEnsemble, VelocityAverage, MAX_QUADRATURE_ORDER, MIN_QUADRATURE_ORDER,
    REFERENCE_TEMPERATURE,
};
use crate::{Error, Result, TWO_PI};

pub const DEFAULT_OPTICAL_DEPTH: f64 = 3.0;
pub const DEFAULT_GRID_POINTS: usize = 2001;
pub const DEFAULT_GRID_SPAN: f64 = 8.0e9;

/// Minimum samples across a dip region for [`detect_splitting`].
pub const MIN_DIP_SAMPLES: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    /// T → 0 and no transit broadening.
    Cold,
    /// Thermal Doppler broadening, no transit broadening.
    WarmFreeSpace,
    /// Thermal Doppler broadening plus transit broadening through the evanescent mode.
    #[default]
    WarmNanofiber,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ControlSpec {
    /// W
    Power(f64),
    /// Ωc, rad/s
    Rabi(f64),
}

impl Default for ControlSpec {
    fn default() -> Self {
        ControlSpec::Rabi(0.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub regime: Regime,
    /// K
    pub temperature: f64,
    /// Peak optical depth of the tallest no-control dip.
    pub optical_depth: f64,
    pub control: ControlSpec,
    /// Hz
    pub delta_c: f64,
    pub lines: Vec<LadderLine>,
    /// Signal detunings, Hz.
    pub grid: Vec<f64>,
    pub geometry: Option<GeometryParams>,
    pub power_map: Option<PowerMap>,
    /// Replaces the geometry-derived Γt in the nanofiber regime, rad/s.
    pub transit_rate: Option<f64>,
    pub velocity_average: VelocityAverage,
    pub counter_propagating: bool,
}

impl Default for Scenario {
    fn default() -> Self {
        Scenario {
            regime: Regime::WarmNanofiber,
            temperature: REFERENCE_TEMPERATURE,
            optical_depth: DEFAULT_OPTICAL_DEPTH,
            control: ControlSpec::default(),
            delta_c: 0.0,
            lines: default_line_set(),
            grid: uniform_grid(-DEFAULT_GRID_SPAN, DEFAULT_GRID_SPAN, DEFAULT_GRID_POINTS)
                .expect("default grid"),
            geometry: Some(GeometryParams::nanofiber()),
            power_map: Some(PowerMap::default()),
            transit_rate: None,
            velocity_average: VelocityAverage::default(),
            counter_propagating: true,
        }
    }
}

/// `n` evenly spaced points from `start` to `stop` inclusive.
pub fn uniform_grid(start: f64, stop: f64, n: usize) -> Result<Vec<f64>> {
    if n < 2 || !(stop > start) || !start.is_finite() || !stop.is_finite() {
        return Err(invalid(format!(
            "grid needs n ≥ 2 and start < stop (got n={n}, {start}..{stop})"
        )));
    }
    let step = (stop - start) / (n - 1) as f64;
    Ok((0..n).map(|i| start + step * i as f64).collect())
}

impl Scenario {
    pub fn with_control(&self, control: ControlSpec) -> Scenario {
        Scenario {
            control,
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.lines.is_empty() {
            return Err(invalid("scenario has no lines"));
        }
        for line in &self.lines {
            line.validate()?;
        }
        if self.grid.len() < 2 {
            return Err(invalid("grid needs at least two points"));
        }
        if self.grid.iter().any(|x| !x.is_finite())
            || self.grid.windows(2).any(|w| !(w[1] > w[0]))
        {
            return Err(invalid("grid must be finite and strictly increasing"));
        }
        if !(self.optical_depth >= 0.0 && self.optical_depth.is_finite()) {
            return Err(invalid(format!(
                "optical depth must be ≥ 0, got {}",
                self.optical_depth
            )));
        }
        if !(self.temperature >= 0.0 && self.temperature.is_finite()) {
            return Err(invalid(format!(
                "temperature must be ≥ 0 K, got {}",
                self.temperature
            )));
        }
        if !self.delta_c.is_finite() {
            return Err(invalid("control detuning must be finite"));
        }
        if self.regime == Regime::WarmNanofiber && self.transit_rate.is_none() {
            match &self.geometry {
                Some(g) => g.validate()?,
                None => {
                    return Err(Error::Configuration(
                        "nanofiber regime needs geometry or an explicit transit rate".into(),
                    ))
                }
            }
        }
        if let Some(t) = self.transit_rate {
            if !(t >= 0.0 && t.is_finite()) {
                return Err(invalid(format!("transit rate must be ≥ 0, got {t}")));
            }
        }
        if let VelocityAverage::GaussHermite { order } = self.velocity_average {
            if !(MIN_QUADRATURE_ORDER..=MAX_QUADRATURE_ORDER).contains(&order) {
                return Err(invalid(format!(
                    "quadrature order must lie in {MIN_QUADRATURE_ORDER}..={MAX_QUADRATURE_ORDER}, got {order}"
                )));
            }
        }
        self.rabi()?;
        Ok(())
    }

    /// Control Rabi frequency Ωc, rad/s.
    pub fn rabi(&self) -> Result<f64> {
        match self.control {
            ControlSpec::Rabi(r) if r >= 0.0 && r.is_finite() => Ok(r),
            ControlSpec::Rabi(r) => Err(invalid(format!("Rabi frequency must be ≥ 0, got {r}"))),
            ControlSpec::Power(p) => {
                let map = self.power_map.as_ref().ok_or_else(|| {
                    Error::Configuration("control given as power but no power map configured".into())
                })?;
                crate::calibrate::rabi_from_power(p, map)
            }
        }
    }

    fn effective_temperature(&self) -> f64 {
        match self.regime {
            Regime::Cold => 0.0,
            _ => self.temperature,
        }
    }

    pub fn ensemble(&self, line: &LadderLine) -> Result<ThermalEnsemble> {
        ThermalEnsemble::new(self.effective_temperature(), line.isotope.atomic_mass)
    }

    /// Γt for `line` in this regime, rad/s.
    pub fn transit(&self, line: &LadderLine) -> Result<f64> {
        match self.regime {
            Regime::Cold | Regime::WarmFreeSpace => Ok(0.0),
            Regime::WarmNanofiber => match (self.transit_rate, &self.geometry) {
                (Some(t), _) => Ok(t),
                (None, Some(g)) => transit_rate(&self.ensemble(line)?, g),
                (None, None) => Err(Error::Configuration(
                    "nanofiber regime needs geometry or an explicit transit rate".into(),
                )),
            },
        }
    }

    pub fn rates(&self, line: &LadderLine) -> Result<DecoherenceRates> {
        DecoherenceRates::from_linewidths(line.gamma2, line.gamma3, self.transit(line)?)
    }

    pub fn kernel(&self, line: &LadderLine) -> Result<LineKernel> {
        LineKernel::new(
            self.rates(line)?,
            self.ensemble(line)?,
            line.signal_wavevector(),
            line.control_wavevector(),
            self.counter_propagating,
            self.velocity_average,
        )
    }

    /// The line whose center offset is closest to `center` (Hz).
    pub fn nearest_line(&self, center: f64) -> Result<&LadderLine> {
        self.lines
            .iter()
            .min_by(|a, b| {
                (a.signal_center_offset - center)
                    .abs()
                    .total_cmp(&(b.signal_center_offset - center).abs())
            })
            .ok_or_else(|| invalid("scenario has no lines"))
    }

    /// Half-width of the region around `center` in which the dip of the nearest line is
    /// analyzed, Hz: Doppler FWHM + homogeneous FWHM + Ωc/2π.
    pub fn dip_region_halfwidth(&self, center: f64) -> Result<f64> {
        let line = self.nearest_line(center)?;
        let ensemble = self.ensemble(line)?;
        let doppler = if ensemble.temperature > 0.0 {
            doppler_fwhm(&ensemble, line.signal_wavelength)?
        } else {
            0.0
        };
        let rates = self.rates(line)?;
        Ok(doppler + rates.gamma21 / std::f64::consts::PI + self.rabi()? / TWO_PI)
    }
}

/// Weighted sum of per-line averaged susceptibilities, before normalization.
struct Composite {
    parts: Vec<(LineKernel, f64, f64)>,
    delta_c: f64,
}

impl Composite {
    fn new(scenario: &Scenario) -> Result<Self> {
        let parts = scenario
            .lines
            .iter()
            .map(|l| Ok((scenario.kernel(l)?, l.signal_center_offset, l.relative_strength)))
            .collect::<Result<Vec<_>>>()?;
        Ok(Composite {
            parts,
            delta_c: TWO_PI * scenario.delta_c,
        })
    }

    fn chi(&self, delta_s_hz: f64, rabi_c: f64) -> Complex64 {
        self.parts
            .iter()
            .map(|(kernel, offset, weight)| {
                let det = Detunings::new(TWO_PI * (delta_s_hz - offset), self.delta_c);
                *weight * kernel.chi(det, rabi_c)
            })
            .sum()
    }

    /// Largest Im χ of the no-control profile, located by golden-section search around
    /// each line center.
    fn tallest_dip(&self) -> f64 {
        let f = |x: f64| self.chi(x, 0.0).im;
        let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
        self.parts
            .iter()
            .map(|(_, center, _)| {
                let (mut a, mut b) = (center - 200e6, center + 200e6);
                let mut c = b - inv_phi * (b - a);
                let mut d = a + inv_phi * (b - a);
                let (mut fc, mut fd) = (f(c), f(d));
                for _ in 0..80 {
                    if fc > fd {
                        b = d;
                        d = c;
                        fd = fc;
                        c = b - inv_phi * (b - a);
                        fc = f(c);
                    } else {
                        a = c;
                        c = d;
                        fc = fd;
                        d = a + inv_phi * (b - a);
                        fd = f(d);
                    }
                }
                f(*center).max(fc).max(fd)
            })
            .fold(0.0, f64::max)
    }
}

/// Normalized susceptibility at arbitrary detunings (Hz) and the normalization divisor.
pub(crate) fn evaluate_normalized(
    scenario: &Scenario,
    detunings: &[f64],
) -> Result<(Vec<Complex64>, f64)> {
    let rabi = scenario.rabi()?;
    let composite = Composite::new(scenario)?;
    let norm = composite.tallest_dip();
    if !(norm > 0.0 && norm.is_finite()) {
        return Err(Error::Resolution(
            "no-control absorption vanishes; cannot normalize".into(),
        ));
    }
    let chi = detunings
        .par_iter()
        .map(|&x| composite.chi(x, rabi) / norm)
        .collect();
    Ok((chi, norm))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Spectrum {
    /// Hz
    pub grid: Vec<f64>,
    /// Normalized susceptibility.
    pub chi: Vec<Complex64>,
    pub transmission: Vec<f64>,
    pub optical_depth: f64,
    /// Raw Im χ of the tallest no-control dip, divided out of `chi`.
    pub normalization: f64,
    /// Resolved Ωc, rad/s.
    pub rabi_c: f64,
    pub scenario: Scenario,
}

impl Spectrum {
    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }

    pub fn grid_step(&self) -> f64 {
        (self.grid[self.len() - 1] - self.grid[0]) / (self.len() - 1) as f64
    }

    /// Linear interpolation of the transmission at `x` (Hz), clamped to the grid ends.
    pub fn transmission_at(&self, x: f64) -> f64 {
        interpolate(&self.grid, &self.transmission, x)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("delta_s_hz,chi_re,chi_im,transmission\n");
        for ((x, c), t) in self.grid.iter().zip(&self.chi).zip(&self.transmission) {
            let _ = writeln!(out, "{x},{},{},{t}", c.re, c.im);
        }
        out
    }
}

fn interpolate(xs: &[f64], ys: &[f64], x: f64) -> f64 {
    let i = xs.partition_point(|&g| g < x);
    if i == 0 {
        return ys[0];
    }
    if i >= xs.len() {
        return ys[xs.len() - 1];
    }
    let t = (x - xs[i - 1]) / (xs[i] - xs[i - 1]);
    ys[i - 1] + t * (ys[i] - ys[i - 1])
}

/// Transmission spectrum of the scenario, normalized so the tallest no-control dip has
/// Im χ = 1 and then T = exp(−OD·Im χ).
pub fn compute_spectrum(scenario: &Scenario) -> Result<Spectrum> {
    scenario.validate()?;
    let (chi, normalization) = evaluate_normalized(scenario, &scenario.grid)?;
    let od = scenario.optical_depth;
    let transmission = chi.iter().map(|c| (-od * c.im).exp()).collect();
    Ok(Spectrum {
        grid: scenario.grid.clone(),
        chi,
        transmission,
        optical_depth: od,
        normalization,
        rabi_c: scenario.rabi()?,
        scenario: scenario.clone(),
    })
}

/// The divisor that brings the largest Im of `chi` to 1.
pub fn profile_scale(chi: &[Complex64]) -> Result<f64> {
    let peak = chi.iter().map(|c| c.im).fold(f64::NEG_INFINITY, f64::max);
    if peak > 0.0 && peak.is_finite() {
        Ok(peak)
    } else {
        Err(invalid("profile has no positive absorption to normalize"))
    }
}

/// Rescales `chi` so its largest imaginary part is 1.
pub fn normalize_profile(chi: &[Complex64]) -> Result<Vec<Complex64>> {
    let s = profile_scale(chi)?;
    Ok(chi.iter().map(|c| c / s).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WindowMetrics {
    /// Hz
    pub window_center: f64,
    pub window_transmission: f64,
    /// T_with − T_without at the window center.
    pub window_depth: f64,
    /// Hz
    pub window_fwhm: f64,
    pub dip_transmission_without_control: f64,
}

fn check_same_grid(a: &Spectrum, b: &Spectrum) -> Result<()> {
    if a.grid != b.grid {
        return Err(invalid("spectra must share the same grid"));
    }
    if a.len() < 3 {
        return Err(Error::Resolution("need at least three grid points".into()));
    }
    Ok(())
}

/// Outer edges of the set where `y ≥ level` inside `[lo, hi]`, linearly interpolated.
fn outer_crossings(xs: &[f64], ys: &[f64], lo: usize, hi: usize, level: f64) -> Option<(f64, f64)> {
    let first = (lo..=hi).find(|&i| ys[i] >= level)?;
    let last = (lo..=hi).rev().find(|&i| ys[i] >= level)?;
    let cross = |i: usize, j: usize| {
        let t = (level - ys[i]) / (ys[j] - ys[i]);
        xs[i] + t * (xs[j] - xs[i])
    };
    let left = if first > 0 { cross(first - 1, first) } else { xs[first] };
    let right = if last + 1 < xs.len() { cross(last + 1, last) } else { xs[last] };
    Some((left, right))
}

fn region(grid: &[f64], center: f64, half: f64) -> (usize, usize) {
    let lo = grid.partition_point(|&x| x < center - half);
    let hi = grid.partition_point(|&x| x <= center + half).saturating_sub(1);
    (lo.min(grid.len() - 1), hi.max(lo.min(grid.len() - 1)))
}

/// Full width of a dip at half its peak absorbance −ln T, measured between the outermost
/// half-level crossings so a window or doublet inside the dip is spanned, Hz.
pub fn dip_fwhm(spectrum: &Spectrum, line_center: f64) -> Result<f64> {
    let half = spectrum.scenario.dip_region_halfwidth(line_center)?;
    let (lo, hi) = region(&spectrum.grid, line_center, half);
    let absorbance: Vec<f64> = spectrum.transmission.iter().map(|t| -t.ln()).collect();
    let peak = absorbance[lo..=hi].iter().cloned().fold(0.0, f64::max);
    if !(peak > 0.0) {
        return Err(Error::NoWindow(format!("no absorption near {line_center} Hz")));
    }
    let (l, r) = outer_crossings(&spectrum.grid, &absorbance, lo, hi, peak / 2.0)
        .ok_or_else(|| Error::Resolution("dip half-maximum not resolved".into()))?;
    Ok(r - l)
}

/// Transparency window inside the dip at `line_center` (Hz).
///
/// The window is the highest local transmission maximum within the dip. Its width is
/// measured on the excess transmission T_with − T_without, so the sloping dip floor is
/// removed before taking the half height.
pub fn window_metrics(
    with_control: &Spectrum,
    without_control: &Spectrum,
    line_center: f64,
) -> Result<WindowMetrics> {
    check_same_grid(with_control, without_control)?;
    let grid = &with_control.grid;
    let t_with = &with_control.transmission;
    let t_without = &without_control.transmission;

    let half = dip_fwhm(without_control, line_center)?
        .max(dip_fwhm(with_control, line_center).unwrap_or(0.0))
        / 2.0;
    let (lo, hi) = region(grid, line_center, half);
    let lo = lo.max(1);
    let hi = hi.min(grid.len() - 2);

    let peak = (lo..=hi)
        .filter(|&i| t_with[i] > t_with[i - 1] && t_with[i] >= t_with[i + 1])
        .filter(|&i| t_with[i] > t_without[i])
        .max_by(|&a, &b| t_with[a].total_cmp(&t_with[b]))
        .ok_or_else(|| {
            Error::NoWindow(format!("no transparency maximum inside the dip at {line_center} Hz"))
        })?;

    let excess: Vec<f64> = t_with.iter().zip(t_without).map(|(a, b)| a - b).collect();
    let level = excess[peak] / 2.0;
    let mut l = peak;
    while l > 0 && excess[l] >= level {
        l -= 1;
    }
    let mut r = peak;
    while r + 1 < grid.len() && excess[r] >= level {
        r += 1;
    }
    if excess[l] >= level || excess[r] >= level {
        return Err(Error::Resolution("window half-maximum not inside the grid".into()));
    }
    let cross = |i: usize, j: usize| {
        let t = (level - excess[i]) / (excess[j] - excess[i]);
        grid[i] + t * (grid[j] - grid[i])
    };
    let fwhm = cross(r, r - 1) - cross(l, l + 1);

    let dip_floor = t_without[lo..=hi].iter().cloned().fold(f64::INFINITY, f64::min);
    Ok(WindowMetrics {
        window_center: grid[peak],
        window_transmission: t_with[peak],
        window_depth: excess[peak],
        window_fwhm: fwhm,
        dip_transmission_without_control: dip_floor,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "shape")]
pub enum DipShape {
    SingleDip,
    SplitDip { separation_hz: f64 },
}

/// Counts the transmission minima in the dip at `line_center` (Hz).
///
/// Two minima further apart than three grid steps make a split dip; the separation is
/// taken between the two deepest.
pub fn detect_splitting(spectrum: &Spectrum, line_center: f64) -> Result<DipShape> {
    let half = spectrum.scenario.dip_region_halfwidth(line_center)?;
    let step = spectrum.grid_step();
    let samples = (half / step).floor() as usize;
    if samples < MIN_DIP_SAMPLES {
        return Err(Error::Resolution(format!(
            "{samples} grid points across the dip half-width, need at least {MIN_DIP_SAMPLES}"
        )));
    }
    let (lo, hi) = region(&spectrum.grid, line_center, half);
    let t = &spectrum.transmission;
    let mut minima: Vec<usize> = (lo.max(1)..=hi.min(t.len() - 2))
        .filter(|&i| t[i] < t[i - 1] && t[i] <= t[i + 1])
        .collect();
    minima.sort_by(|&a, &b| t[a].total_cmp(&t[b]));
    match minima.as_slice() {
        [a, b, ..] if (spectrum.grid[*a] - spectrum.grid[*b]).abs() > 3.0 * step => {
            Ok(DipShape::SplitDip {
                separation_hz: (spectrum.grid[*a] - spectrum.grid[*b]).abs(),
            })
        }
        _ => Ok(DipShape::SingleDip),
    }
}

/// Spectra for each scenario, in input order; errors carry the index of the failing entry.
pub fn sweep(scenarios: &[Scenario]) -> Result<Vec<Spectrum>> {
    if scenarios.is_empty() {
        return Err(invalid("sweep needs at least one scenario"));
    }
    scenarios
        .par_iter()
        .enumerate()
        .map(|(index, s)| {
            compute_spectrum(s).map_err(|e| Error::Sweep {
                index,
                source: Box::new(e),
            })
        })
        .collect::<Vec<_>>()
        .into_iter()
        .collect()
}
