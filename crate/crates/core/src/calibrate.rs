//! Control power to Rabi frequency, transit calibration, and bounded least-squares fits of
//! the spectrum model to sampled transmission data.

use serde::{Deserialize, Serialize};

use crate::error::invalid;
use crate::lineshape::ThermalEnsemble;
use crate::spectra::{evaluate_normalized, ControlSpec, Scenario};
use crate::{Error, Result, TWO_PI};

/// 7 μW of control power.
pub const ANCHOR_POWER: f64 = 7.0e-6;
/// Ωc produced by [`ANCHOR_POWER`], rad/s (2π·214 MHz).
pub const ANCHOR_RABI: f64 = TWO_PI * 214.0e6;

pub const MAX_FIT_ITERATIONS: usize = 200;

/// Ω(P) = anchor_rabi·√(P/anchor_power).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerMap {
    /// W
    pub anchor_power: f64,
    /// rad/s
    pub anchor_rabi: f64,
}

impl PowerMap {
    pub fn new(anchor_power: f64, anchor_rabi: f64) -> Result<Self> {
        let m = PowerMap {
            anchor_power,
            anchor_rabi,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        if self.anchor_power > 0.0
            && self.anchor_rabi > 0.0
            && self.anchor_power.is_finite()
            && self.anchor_rabi.is_finite()
        {
            Ok(())
        } else {
            Err(invalid("power map anchors must be positive"))
        }
    }

    /// Ωc²/P, (rad/s)²/W.
    pub fn intensity_scale(&self) -> f64 {
        self.anchor_rabi * self.anchor_rabi / self.anchor_power
    }
}

impl Default for PowerMap {
    fn default() -> Self {
        PowerMap {
            anchor_power: ANCHOR_POWER,
            anchor_rabi: ANCHOR_RABI,
        }
    }
}

pub fn rabi_from_power(power: f64, map: &PowerMap) -> Result<f64> {
    map.validate()?;
    if !(power >= 0.0 && power.is_finite()) {
        return Err(invalid(format!("control power must be ≥ 0, got {power} W")));
    }
    Ok(map.anchor_rabi * (power / map.anchor_power).sqrt())
}

/// C = Γt·d/u, so that Γt = C·u/d at the given conditions.
pub fn calibrate_transit_constant(
    target_rate: f64,
    ensemble: &ThermalEnsemble,
    mode_diameter: f64,
) -> Result<f64> {
    if !(target_rate > 0.0 && target_rate.is_finite()) {
        return Err(invalid("target transit rate must be positive"));
    }
    if !(mode_diameter > 0.0 && mode_diameter.is_finite()) {
        return Err(invalid("mode diameter must be positive"));
    }
    if !(ensemble.most_probable_speed > 0.0) {
        return Err(invalid("transit calibration needs a moving ensemble"));
    }
    Ok(target_rate * mode_diameter / ensemble.most_probable_speed)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitParameter {
    /// Ωc, rad/s
    Rabi,
    OpticalDepth,
    /// Γt, rad/s
    TransitRate,
    /// Hz
    DeltaC,
    /// Multiplies the model transmission, absorbing an unknown baseline.
    TransmissionScale,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub delta_s_hz: f64,
    pub transmission: f64,
    pub weight: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FreeParameter {
    pub parameter: FitParameter,
    pub initial: f64,
    pub lower: f64,
    pub upper: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitProblem {
    pub observations: Vec<Observation>,
    pub free_parameters: Vec<FreeParameter>,
    /// Everything that is not fitted. Its control, OD, Δc and transit entries are overridden
    /// by any free parameter of the same kind.
    pub scenario: Scenario,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub parameters: Vec<(FitParameter, f64)>,
    pub residual_sum_squares: f64,
    pub initial_residual_sum_squares: f64,
    pub iterations: usize,
    pub converged: bool,
}

impl FitResult {
    pub fn value(&self, parameter: FitParameter) -> Option<f64> {
        self.parameters
            .iter()
            .find(|(p, _)| *p == parameter)
            .map(|(_, v)| *v)
    }
}

impl FitProblem {
    pub fn validate(&self) -> Result<()> {
        let n = self.free_parameters.len();
        if self.observations.is_empty() {
            return Err(invalid("fit needs observations"));
        }
        if n == 0 {
            return Err(invalid("fit needs at least one free parameter"));
        }
        if self.observations.len() < 2 * n {
            return Err(invalid(format!(
                "{} observations cannot determine {n} parameters (need ≥ {})",
                self.observations.len(),
                2 * n
            )));
        }
        for (i, p) in self.free_parameters.iter().enumerate() {
            if self.free_parameters[..i].iter().any(|q| q.parameter == p.parameter) {
                return Err(invalid(format!("{:?} listed twice", p.parameter)));
            }
            if !(p.lower.is_finite() && p.upper.is_finite() && p.lower < p.upper) {
                return Err(invalid(format!("bounds for {:?} must be finite with lower < upper", p.parameter)));
            }
            if !(p.initial >= p.lower && p.initial <= p.upper) {
                return Err(invalid(format!("initial {:?} outside its bounds", p.parameter)));
            }
        }
        for o in &self.observations {
            if !(o.delta_s_hz.is_finite() && o.transmission.is_finite() && o.weight >= 0.0 && o.weight.is_finite()) {
                return Err(invalid("observations must be finite with non-negative weights"));
            }
        }
        if self.observations.iter().all(|o| o.weight == 0.0) {
            return Err(invalid("all observation weights are zero"));
        }
        Ok(())
    }

    fn unscale(&self, s: &[f64]) -> Vec<f64> {
        self.free_parameters
            .iter()
            .zip(s)
            .map(|(p, &x)| p.lower + x * (p.upper - p.lower))
            .collect()
    }

    /// Weighted residuals √w·(T_model − T_obs) at physical parameter values.
    fn residuals(&self, values: &[f64], detunings: &[f64]) -> Result<Vec<f64>> {
        let mut scenario = self.scenario.clone();
        let mut scale = 1.0;
        for (p, &v) in self.free_parameters.iter().zip(values) {
            match p.parameter {
                FitParameter::Rabi => scenario.control = ControlSpec::Rabi(v),
                FitParameter::OpticalDepth => scenario.optical_depth = v,
                FitParameter::TransitRate => scenario.transit_rate = Some(v),
                FitParameter::DeltaC => scenario.delta_c = v,
                FitParameter::TransmissionScale => scale = v,
            }
        }
        let (chi, _) = evaluate_normalized(&scenario, detunings)?;
        Ok(chi
            .iter()
            .zip(&self.observations)
            .map(|(c, o)| o.weight.sqrt() * (scale * (-scenario.optical_depth * c.im).exp() - o.transmission))
            .collect())
    }
}

fn sum_squares(r: &[f64]) -> f64 {
    r.iter().map(|x| x * x).sum()
}

/// Solves the small dense system `a·x = b` by Gaussian elimination with partial pivoting.
fn solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let pivot = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[pivot][col].abs() < 1e-300 {
            return None;
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            let (upper, lower) = a.split_at_mut(row);
            for (x, p) in lower[0][col..].iter_mut().zip(&upper[col][col..]) {
                *x -= f * p;
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let s: f64 = (row + 1..n).map(|k| a[row][k] * x[k]).sum();
        x[row] = (b[row] - s) / a[row][row];
    }
    Some(x)
}

/// Bounded Levenberg–Marquardt over parameters scaled to [0, 1] by their bounds.
///
/// The Jacobian uses central differences (one-sided at a bound); steps are projected back
/// into the box. Converges when the relative cost improvement of an accepted step drops
/// below 1e-10 or the scaled step below 1e-8.
pub fn fit_spectrum(problem: &FitProblem) -> Result<FitResult> {
    problem.validate()?;
    let detunings: Vec<f64> = problem.observations.iter().map(|o| o.delta_s_hz).collect();
    let n = problem.free_parameters.len();
    let cost_at = |s: &[f64]| -> Result<(Vec<f64>, f64)> {
        let r = problem.residuals(&problem.unscale(s), &detunings)?;
        let c = sum_squares(&r);
        if c.is_finite() {
            Ok((r, c))
        } else {
            Err(Error::Resolution("model produced a non-finite residual".into()))
        }
    };

    let mut s: Vec<f64> = problem
        .free_parameters
        .iter()
        .map(|p| (p.initial - p.lower) / (p.upper - p.lower))
        .collect();
    let (mut r, mut cost) = cost_at(&s)?;
    let initial_cost = cost;
    let mut lambda = 1e-3;
    let mut converged = cost == 0.0;
    let mut iterations = 0;
    let h = 1e-6;

    while !converged && iterations < MAX_FIT_ITERATIONS {
        iterations += 1;
        let mut jac = vec![vec![0.0; r.len()]; n];
        for k in 0..n {
            let up = (s[k] + h).min(1.0);
            let down = (s[k] - h).max(0.0);
            let mut sp = s.clone();
            sp[k] = up;
            let mut sm = s.clone();
            sm[k] = down;
            let (rp, _) = cost_at(&sp)?;
            let (rm, _) = cost_at(&sm)?;
            for (j, (a, b)) in rp.iter().zip(&rm).enumerate() {
                jac[k][j] = (a - b) / (up - down);
            }
        }
        let jtj: Vec<Vec<f64>> = (0..n)
            .map(|a| (0..n).map(|b| jac[a].iter().zip(&jac[b]).map(|(x, y)| x * y).sum()).collect())
            .collect();
        let jtr: Vec<f64> = (0..n).map(|a| jac[a].iter().zip(&r).map(|(x, y)| x * y).sum()).collect();

        loop {
            let mut damped = jtj.clone();
            for k in 0..n {
                damped[k][k] += lambda * jtj[k][k].max(1e-12);
            }
            let step = solve(damped, jtr.iter().map(|g| -g).collect());
            let trial: Vec<f64> = match step {
                Some(d) => s.iter().zip(&d).map(|(x, dx)| (x + dx).clamp(0.0, 1.0)).collect(),
                None => s.clone(),
            };
            let moved = trial.iter().zip(&s).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            if moved < 1e-8 {
                converged = true;
                break;
            }
            let (r_trial, c_trial) = cost_at(&trial)?;
            if c_trial < cost {
                let improvement = (cost - c_trial) / cost;
                s = trial;
                r = r_trial;
                cost = c_trial;
                lambda = (lambda / 3.0).max(1e-12);
                converged = improvement < 1e-10 || cost == 0.0;
                break;
            }
            lambda *= 4.0;
            if lambda > 1e12 {
                converged = true;
                break;
            }
        }
    }

    if !converged {
        log::warn!("fit stopped after {iterations} iterations without converging");
    }
    Ok(FitResult {
        parameters: problem
            .free_parameters
            .iter()
            .map(|p| p.parameter)
            .zip(problem.unscale(&s))
            .collect(),
        residual_sum_squares: cost,
        initial_residual_sum_squares: initial_cost,
        iterations,
        converged,
    })
}
