//! Control-induced circular birefringence and crossed-analyzer transmission.
//!
//! Jones vectors are kept in the circular basis. A linear state at angle θ is
//! (e^{iθ}, e^{−iθ})/√2, so a relative phase φ between the helicities rotates the plane by φ/2.

use std::fmt::Write as _;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::atoms::{CircularPolarization, LadderLine, PathwaySet};
use crate::error::invalid;
use crate::lineshape::{Detunings, LineKernel};
use crate::spectra::Scenario;
use crate::{Error, Result, TWO_PI};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JonesVector {
    pub a_plus: Complex64,
    pub a_minus: Complex64,
}

impl JonesVector {
    pub fn new(a_plus: Complex64, a_minus: Complex64) -> Self {
        JonesVector { a_plus, a_minus }
    }

    /// Linear polarization at `angle` radians from x.
    pub fn linear(angle: f64) -> Self {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        JonesVector {
            a_plus: Complex64::from_polar(s, angle),
            a_minus: Complex64::from_polar(s, -angle),
        }
    }

    pub fn norm_sqr(&self) -> f64 {
        self.a_plus.norm_sqr() + self.a_minus.norm_sqr()
    }

    /// ⟨self|other⟩
    pub fn inner(&self, other: &JonesVector) -> Complex64 {
        self.a_plus.conj() * other.a_plus + self.a_minus.conj() * other.a_minus
    }

    /// The state orthogonal to `self` with the same norm.
    pub fn orthogonal(&self) -> JonesVector {
        JonesVector {
            a_plus: -self.a_minus.conj(),
            a_minus: self.a_plus.conj(),
        }
    }

    /// Orientation of the major axis, radians in (−π/2, π/2].
    pub fn orientation(&self) -> f64 {
        let phase = (self.a_plus * self.a_minus.conj()).arg() / 2.0;
        if phase <= -std::f64::consts::FRAC_PI_2 {
            phase + std::f64::consts::PI
        } else {
            phase
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BirefringentResponse {
    /// Hz
    pub grid: Vec<f64>,
    pub chi_plus: Vec<Complex64>,
    pub chi_minus: Vec<Complex64>,
    /// One signal helicity has no pathway at all.
    pub degenerate: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalyzerResult {
    /// Hz
    pub grid: Vec<f64>,
    pub t_parallel: Vec<f64>,
    pub t_crossed: Vec<f64>,
    /// rad
    pub rotation_angle: Vec<f64>,
    /// Phase scale kL used for propagation.
    pub kl: f64,
}

impl AnalyzerResult {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("delta_s_hz,t_parallel,t_crossed,rotation_deg\n");
        for i in 0..self.grid.len() {
            let _ = writeln!(
                out,
                "{},{},{},{}",
                self.grid[i],
                self.t_parallel[i],
                self.t_crossed[i],
                self.rotation_angle[i].to_degrees()
            );
        }
        out
    }
}

/// The line closest to the reference transition.
fn reference_line(scenario: &Scenario) -> Result<&LadderLine> {
    scenario.nearest_line(0.0)
}

fn helicity_sum(
    pathways: &PathwaySet,
    pol: CircularPolarization,
    kernel: &LineKernel,
    det: Detunings,
    rabi_c: f64,
) -> Complex64 {
    pathways
        .with_signal(pol)
        .map(|p| {
            p.population_weight
                * p.signal_coupling.powi(2)
                * kernel.chi(det, rabi_c * p.control_coupling.abs())
        })
        .sum()
}

/// σ⁺ and σ⁻ signal susceptibilities of the reference line.
///
/// Each pathway contributes its ladder susceptibility with Ωc scaled by the control
/// coupling and weight (population × signal coupling²). Both are divided by the
/// helicity-averaged no-control Im χ at line center.
pub fn birefringent_response(
    scenario: &Scenario,
    pathways: &PathwaySet,
) -> Result<BirefringentResponse> {
    scenario.validate()?;
    if pathways.is_empty() {
        return Err(invalid("pathway set is empty"));
    }
    for p in &pathways.pathways {
        if !(p.population_weight >= 0.0
            && p.signal_coupling.is_finite()
            && p.control_coupling.is_finite())
        {
            return Err(invalid("pathway weights and couplings must be finite and non-negative"));
        }
    }
    let has = |pol| pathways.with_signal(pol).next().is_some();
    let degenerate = !has(CircularPolarization::SigmaPlus) || !has(CircularPolarization::SigmaMinus);
    if degenerate {
        log::warn!("pathway set covers only one signal helicity; birefringence is degenerate");
    }

    let line = reference_line(scenario)?;
    let kernel = scenario.kernel(line)?;
    let rabi = scenario.rabi()?;
    let delta_c = TWO_PI * scenario.delta_c;
    let det_at = |x: f64| Detunings::new(TWO_PI * (x - line.signal_center_offset), delta_c);

    let center = det_at(line.signal_center_offset);
    let norm = 0.5
        * (helicity_sum(pathways, CircularPolarization::SigmaPlus, &kernel, center, 0.0)
            + helicity_sum(pathways, CircularPolarization::SigmaMinus, &kernel, center, 0.0))
        .im;
    if !(norm > 0.0) {
        return Err(Error::Resolution("pathways carry no signal absorption".into()));
    }

    let (chi_plus, chi_minus) = scenario
        .grid
        .par_iter()
        .map(|&x| {
            let d = det_at(x);
            (
                helicity_sum(pathways, CircularPolarization::SigmaPlus, &kernel, d, rabi) / norm,
                helicity_sum(pathways, CircularPolarization::SigmaMinus, &kernel, d, rabi) / norm,
            )
        })
        .unzip();

    Ok(BirefringentResponse {
        grid: scenario.grid.clone(),
        chi_plus,
        chi_minus,
        degenerate,
    })
}

/// a± → a±·exp(i(kL/2)χ±).
pub fn propagate(
    j_in: JonesVector,
    chi_plus: Complex64,
    chi_minus: Complex64,
    kl: f64,
) -> Result<JonesVector> {
    if !(kl > 0.0 && kl.is_finite()) {
        return Err(invalid(format!("kL must be positive, got {kl}")));
    }
    let i_half = Complex64::new(0.0, kl / 2.0);
    Ok(JonesVector {
        a_plus: j_in.a_plus * (i_half * chi_plus).exp(),
        a_minus: j_in.a_minus * (i_half * chi_minus).exp(),
    })
}

/// Parallel and crossed analyzer transmission for a precomputed response.
pub fn analyze(
    response: &BirefringentResponse,
    input: JonesVector,
    kl: f64,
) -> Result<AnalyzerResult> {
    let n = input.norm_sqr();
    if !((n - 1.0).abs() < 1e-9) {
        return Err(invalid(format!("input Jones vector must be normalized, |j|² = {n}")));
    }
    let crossed_axis = input.orthogonal();
    let mut out = AnalyzerResult {
        grid: response.grid.clone(),
        t_parallel: Vec::with_capacity(response.grid.len()),
        t_crossed: Vec::with_capacity(response.grid.len()),
        rotation_angle: Vec::with_capacity(response.grid.len()),
        kl,
    };
    for (cp, cm) in response.chi_plus.iter().zip(&response.chi_minus) {
        let j = propagate(input, *cp, *cm, kl)?;
        out.t_parallel.push(input.inner(&j).norm_sqr());
        out.t_crossed.push(crossed_axis.inner(&j).norm_sqr());
        out.rotation_angle.push(kl / 4.0 * (cp - cm).re);
    }
    Ok(out)
}

/// Analyzer spectra with kL set to the scenario OD, which makes the no-control parallel
/// transmission exp(−OD) at line center.
pub fn analyzer_spectrum(
    scenario: &Scenario,
    pathways: &PathwaySet,
    input_polarization: JonesVector,
) -> Result<AnalyzerResult> {
    let response = birefringent_response(scenario, pathways)?;
    analyze(&response, input_polarization, scenario.optical_depth)
}
