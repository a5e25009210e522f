//! Weak-probe susceptibility of a three-level ladder and its thermal average.
//!
//! The single-velocity kernel is the steady-state coherence of the lower transition,
//!
//! ```text
//! χ(Δs, Δc) = i γ21 / [ γ21 − iΔs + (Ωc²/4) / (γ31 − i(Δs − Δc)) ]
//! ```
//!
//! scaled so that χ = i on the bare line center. The control detuning Δc is counted so
//! that two-photon resonance sits at Δs = Δc.
//!
//! Velocity averaging over a 1-D Maxwell–Boltzmann distribution is available two ways:
//! Gauss–Hermite quadrature of a chosen order, and an exact closed form. The integrand is
//! a rational function of velocity with two poles, so after partial fractions each pole
//! integrates to a Faddeeva function value. Gauss–Hermite needs several hundred nodes once
//! the homogeneous width drops below the Doppler width; the closed form does not.

use errorfunctions::ComplexErrorFunctions;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::atoms::{Isotope, BOLTZMANN};
use crate::{Error, Result, TWO_PI};

/// Vapor temperature used for the default transit calibration, K (85 °C).
pub const REFERENCE_TEMPERATURE: f64 = 358.15;
/// Evanescent mode diameter, m.
pub const DEFAULT_MODE_DIAMETER: f64 = 1.0e-6;
/// Length of the sub-500 nm waist, m.
pub const DEFAULT_INTERACTION_LENGTH: f64 = 8.0e-3;
/// Transit broadening Γt at the reference conditions, rad/s (2π·100 MHz).
pub const REFERENCE_TRANSIT_RATE: f64 = TWO_PI * 100.0e6;
/// Default Gauss–Hermite order.
pub const DEFAULT_QUADRATURE_ORDER: usize = 64;
/// Smallest accepted Gauss–Hermite order.
pub const MIN_QUADRATURE_ORDER: usize = 8;
/// Largest accepted Gauss–Hermite order.
pub const MAX_QUADRATURE_ORDER: usize = 2000;

const SQRT_PI: f64 = 1.772_453_850_905_516;

/// Signal and control detunings, rad/s.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Detunings {
    pub delta_s: f64,
    pub delta_c: f64,
}

impl Detunings {
    pub fn new(delta_s: f64, delta_c: f64) -> Self {
        Detunings { delta_s, delta_c }
    }

    /// Δs − Δc; zero on two-photon resonance.
    pub fn two_photon(&self) -> f64 {
        self.delta_s - self.delta_c
    }

    /// Detunings seen by an atom moving at `v` along the signal direction.
    ///
    /// The signal is Doppler shifted by −k_s·v. A counter-propagating control is shifted the
    /// other way in the lab frame, which with this sign convention reads Δc → Δc − k_c·v,
    /// leaving a residual two-photon shift of −(k_s − k_c)·v.
    pub fn shifted(&self, v: f64, k_s: f64, k_c: f64, counter_propagating: bool) -> Self {
        let control_shift = if counter_propagating { -k_c * v } else { k_c * v };
        Detunings {
            delta_s: self.delta_s - k_s * v,
            delta_c: self.delta_c + control_shift,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.delta_s.is_finite() && self.delta_c.is_finite() {
            Ok(())
        } else {
            Err(Error::invalid("detunings must be finite"))
        }
    }
}

/// Coherence decay rates, rad/s.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecoherenceRates {
    /// Ground–intermediate coherence.
    pub gamma21: f64,
    /// Ground–upper coherence.
    pub gamma31: f64,
}

impl DecoherenceRates {
    pub fn new(gamma21: f64, gamma31: f64) -> Result<Self> {
        let r = DecoherenceRates { gamma21, gamma31 };
        r.validate()?;
        Ok(r)
    }

    /// γ21 = Γ2/2 + Γt and γ31 = Γ3/2 + Γt.
    pub fn from_linewidths(gamma2: f64, gamma3: f64, transit: f64) -> Result<Self> {
        if !(transit >= 0.0) {
            return Err(Error::invalid("transit rate must be non-negative"));
        }
        Self::new(gamma2 / 2.0 + transit, gamma3 / 2.0 + transit)
    }

    pub fn validate(&self) -> Result<()> {
        if self.gamma21 > 0.0 && self.gamma31 > 0.0 && self.gamma21.is_finite() && self.gamma31.is_finite() {
            Ok(())
        } else {
            Err(Error::invalid(format!(
                "decoherence rates must be positive (γ21 = {}, γ31 = {})",
                self.gamma21, self.gamma31
            )))
        }
    }
}

/// A 1-D Maxwell–Boltzmann velocity distribution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThermalEnsemble {
    /// K
    pub temperature: f64,
    /// kg
    pub atomic_mass: f64,
    /// √(2kT/m), m/s
    pub most_probable_speed: f64,
}

impl ThermalEnsemble {
    pub fn new(temperature: f64, atomic_mass: f64) -> Result<Self> {
        if !(temperature >= 0.0 && temperature.is_finite()) {
            return Err(Error::invalid(format!(
                "temperature must be non-negative, got {temperature} K"
            )));
        }
        if !(atomic_mass > 0.0) {
            return Err(Error::invalid("atomic mass must be positive"));
        }
        Ok(ThermalEnsemble {
            temperature,
            atomic_mass,
            most_probable_speed: (2.0 * BOLTZMANN * temperature / atomic_mass).sqrt(),
        })
    }

    pub fn for_isotope(temperature: f64, isotope: &Isotope) -> Result<Self> {
        Self::new(temperature, isotope.atomic_mass)
    }
}

/// Evanescent-mode geometry and the transit calibration constant C in Γt = C·u/d.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeometryParams {
    /// m
    pub mode_diameter: f64,
    /// m
    pub interaction_length: f64,
    pub transit_calibration: f64,
}

impl GeometryParams {
    pub fn new(mode_diameter: f64, interaction_length: f64, transit_calibration: f64) -> Result<Self> {
        let g = GeometryParams {
            mode_diameter,
            interaction_length,
            transit_calibration,
        };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if self.mode_diameter > 0.0 && self.interaction_length > 0.0 && self.transit_calibration > 0.0 {
            Ok(())
        } else {
            Err(Error::invalid(
                "mode diameter, interaction length and transit calibration must be positive",
            ))
        }
    }

    /// 1 μm mode, 8 mm waist, C fixed so that Γt/2π = 100 MHz for ⁸⁵Rb at 85 °C.
    pub fn nanofiber() -> Self {
        let ensemble = ThermalEnsemble::for_isotope(REFERENCE_TEMPERATURE, &Isotope::rb85())
            .expect("reference ensemble");
        let c = crate::calibrate::calibrate_transit_constant(
            REFERENCE_TRANSIT_RATE,
            &ensemble,
            DEFAULT_MODE_DIAMETER,
        )
        .expect("reference calibration");
        GeometryParams {
            mode_diameter: DEFAULT_MODE_DIAMETER,
            interaction_length: DEFAULT_INTERACTION_LENGTH,
            transit_calibration: c,
        }
    }
}

impl Default for GeometryParams {
    fn default() -> Self {
        Self::nanofiber()
    }
}

fn check_rabi(rabi_c: f64) -> Result<()> {
    if rabi_c >= 0.0 && rabi_c.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(format!("control Rabi frequency must be ≥ 0, got {rabi_c}")))
    }
}

#[inline]
fn ladder_kernel(delta_s: f64, two_photon: f64, rabi_c: f64, rates: &DecoherenceRates) -> Complex64 {
    let one_photon = Complex64::new(rates.gamma21, -delta_s);
    let dressing = 0.25 * rabi_c * rabi_c / Complex64::new(rates.gamma31, -two_photon);
    Complex64::new(0.0, rates.gamma21) / (one_photon + dressing)
}

/// Single-velocity ladder susceptibility, normalized to χ = i on the bare line center.
pub fn chi_ladder(det: Detunings, rabi_c: f64, rates: &DecoherenceRates) -> Result<Complex64> {
    det.validate()?;
    check_rabi(rabi_c)?;
    rates.validate()?;
    Ok(ladder_kernel(det.delta_s, det.two_photon(), rabi_c, rates))
}

/// [`chi_ladder`] for an atom moving at `v` (m/s) along the signal propagation axis.
pub fn chi_velocity(
    det: Detunings,
    rabi_c: f64,
    rates: &DecoherenceRates,
    v: f64,
    k_s: f64,
    k_c: f64,
    counter_propagating: bool,
) -> Result<Complex64> {
    check_wavevectors(k_s, k_c)?;
    if !v.is_finite() {
        return Err(Error::invalid("velocity must be finite"));
    }
    chi_ladder(det.shifted(v, k_s, k_c, counter_propagating), rabi_c, rates)
}

fn check_wavevectors(k_s: f64, k_c: f64) -> Result<()> {
    if k_s > 0.0 && k_c > 0.0 && k_s.is_finite() && k_c.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid("wavevectors must be positive"))
    }
}

/// FWHM of the one-photon Gaussian Doppler profile, Hz: 2√(ln 2)·u/λ.
pub fn doppler_fwhm(ensemble: &ThermalEnsemble, wavelength: f64) -> Result<f64> {
    if !(ensemble.temperature > 0.0) {
        return Err(Error::invalid("Doppler width needs a positive temperature"));
    }
    if !(wavelength > 0.0) {
        return Err(Error::invalid("wavelength must be positive"));
    }
    Ok(2.0 * std::f64::consts::LN_2.sqrt() * ensemble.most_probable_speed / wavelength)
}

/// Transit broadening Γt = C·u/d, rad/s.
pub fn transit_rate(ensemble: &ThermalEnsemble, geometry: &GeometryParams) -> Result<f64> {
    geometry.validate()?;
    Ok(geometry.transit_calibration * ensemble.most_probable_speed / geometry.mode_diameter)
}

/// Gauss–Hermite rule for ∫ e^{−x²} g(x) dx.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussHermite {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussHermite {
    /// Nodes are the eigenvalues of the Hermite Jacobi matrix, isolated by Sturm-sequence
    /// bisection and polished by Newton steps on the orthonormal recurrence, which also
    /// yields the weights.
    pub fn new(order: usize) -> Result<Self> {
        if order < MIN_QUADRATURE_ORDER {
            return Err(Error::invalid(format!(
                "quadrature order must be at least {MIN_QUADRATURE_ORDER}, got {order}"
            )));
        }
        if order > MAX_QUADRATURE_ORDER {
            return Err(Error::invalid(format!(
                "quadrature order must be at most {MAX_QUADRATURE_ORDER}, got {order}"
            )));
        }
        let n = order;
        let offdiag_sq: Vec<f64> = (1..n).map(|k| k as f64 / 2.0).collect();
        let count_below = |t: f64| {
            let mut d = -t;
            let mut count = usize::from(d < 0.0);
            for b2 in &offdiag_sq {
                if d.abs() < 1e-300 {
                    d = -1e-300;
                }
                d = -t - b2 / d;
                count += usize::from(d < 0.0);
            }
            count
        };

        let bound = (2.0 * n as f64 + 2.0).sqrt() + 1.0;
        let mut x = vec![0.0; n];
        let mut w = vec![0.0; n];
        for i in 0..n.div_ceil(2) {
            // i-th largest root has ascending index n − 1 − i
            let idx = n - 1 - i;
            let (mut lo, mut hi) = (0.0, bound);
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if count_below(mid) > idx {
                    hi = mid;
                } else {
                    lo = mid;
                }
                if hi - lo <= 1e-15 * hi.max(1.0) {
                    break;
                }
            }
            let mut z = 0.5 * (lo + hi);
            let (mut pn, mut pp, mut log_scale) = hermite_orthonormal(z, n);
            for _ in 0..3 {
                z -= pn / pp;
                (pn, pp, log_scale) = hermite_orthonormal(z, n);
            }
            if i == n / 2 {
                z = 0.0;
            }
            x[i] = z;
            x[n - 1 - i] = -z;
            w[i] = 2.0 * (-2.0 * (pp.abs().ln() + log_scale)).exp();
            w[n - 1 - i] = w[i];
        }
        Ok(GaussHermite { nodes: x, weights: w })
    }

    pub fn order(&self) -> usize {
        self.nodes.len()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }
}

/// Orthonormal Hermite value p_n(z) and derivative p_n'(z), both divided by e^{log_scale}.
fn hermite_orthonormal(z: f64, n: usize) -> (f64, f64, f64) {
    let mut p1 = std::f64::consts::PI.powf(-0.25);
    let mut p2 = 0.0;
    let mut log_scale = 0.0;
    for j in 1..=n {
        let p3 = p2;
        p2 = p1;
        let jf = j as f64;
        p1 = z * (2.0 / jf).sqrt() * p2 - ((jf - 1.0) / jf).sqrt() * p3;
        if p1.abs() > 1e100 {
            p1 *= 1e-100;
            p2 *= 1e-100;
            log_scale += 100.0 * std::f64::consts::LN_10;
        }
    }
    (p1, (2.0 * n as f64).sqrt() * p2, log_scale)
}

/// Thermal average of [`chi_velocity`] by Gauss–Hermite quadrature.
#[allow(clippy::too_many_arguments)]
pub fn chi_doppler_averaged(
    det: Detunings,
    rabi_c: f64,
    rates: &DecoherenceRates,
    ensemble: &ThermalEnsemble,
    k_s: f64,
    k_c: f64,
    counter_propagating: bool,
    quadrature: &GaussHermite,
) -> Result<Complex64> {
    det.validate()?;
    check_rabi(rabi_c)?;
    rates.validate()?;
    check_wavevectors(k_s, k_c)?;
    let u = ensemble.most_probable_speed;
    let sum = quadrature
        .nodes
        .iter()
        .zip(&quadrature.weights)
        .map(|(&x, &w)| {
            let d = det.shifted(u * x, k_s, k_c, counter_propagating);
            w * ladder_kernel(d.delta_s, d.two_photon(), rabi_c, rates)
        })
        .sum::<Complex64>();
    Ok(sum / SQRT_PI)
}

/// (1/√π) ∫ e^{−x²} / (x − z) dx.
fn pole_integral(z: Complex64) -> Complex64 {
    let i_sqrt_pi = Complex64::new(0.0, SQRT_PI);
    if z.im >= 0.0 {
        i_sqrt_pi * z.w()
    } else {
        -i_sqrt_pi * z.conj().w().conj()
    }
}

/// (1/√π) ∫ e^{−x²} / (x − z)² dx, the z-derivative of [`pole_integral`].
fn double_pole_integral(z: Complex64) -> Complex64 {
    let i_sqrt_pi = Complex64::new(0.0, SQRT_PI);
    let w_prime = |z: Complex64| -2.0 * z * z.w() + Complex64::new(0.0, 2.0 / SQRT_PI);
    if z.im >= 0.0 {
        i_sqrt_pi * w_prime(z)
    } else {
        -i_sqrt_pi * w_prime(z.conj()).conj()
    }
}

/// Thermal average of [`chi_velocity`] in closed form.
///
/// With x = v/u the kernel is iγ21(b0 + b1x) / [(a0 + a1x)(b0 + b1x) + Ωc²/4], which is
/// split into simple poles and integrated against e^{−x²} with the Faddeeva function.
#[allow(clippy::too_many_arguments)]
pub fn chi_doppler_exact(
    det: Detunings,
    rabi_c: f64,
    rates: &DecoherenceRates,
    ensemble: &ThermalEnsemble,
    k_s: f64,
    k_c: f64,
    counter_propagating: bool,
) -> Result<Complex64> {
    det.validate()?;
    check_rabi(rabi_c)?;
    rates.validate()?;
    check_wavevectors(k_s, k_c)?;
    Ok(exact_average(det, rabi_c, rates, ensemble.most_probable_speed, k_s, k_c, counter_propagating))
}

fn exact_average(
    det: Detunings,
    rabi_c: f64,
    rates: &DecoherenceRates,
    u: f64,
    k_s: f64,
    k_c: f64,
    counter_propagating: bool,
) -> Complex64 {
    if u == 0.0 {
        return ladder_kernel(det.delta_s, det.two_photon(), rabi_c, rates);
    }
    let k_two_photon = if counter_propagating { k_s - k_c } else { k_s + k_c };
    let g21 = Complex64::new(0.0, rates.gamma21);
    let a0 = Complex64::new(rates.gamma21, -det.delta_s);
    let a1 = Complex64::new(0.0, k_s * u);
    let b0 = Complex64::new(rates.gamma31, -det.two_photon());
    let b1 = Complex64::new(0.0, k_two_photon * u);
    let dressing = 0.25 * rabi_c * rabi_c;

    if b1.im == 0.0 || dressing == 0.0 {
        // one pole: the two-photon factor cancels or does not depend on velocity
        let c0 = a0 + dressing / b0;
        let root = -c0 / a1;
        return g21 / a1 * pole_integral(root);
    }

    let qa = a1 * b1;
    let qb = a0 * b1 + a1 * b0;
    let qc = a0 * b0 + dressing;
    let disc = (qb * qb - 4.0 * qa * qc).sqrt();
    // pick the sign that avoids cancellation
    let q = if (qb.conj() * disc).re >= 0.0 {
        -0.5 * (qb + disc)
    } else {
        -0.5 * (qb - disc)
    };
    let r1 = q / qa;
    let r2 = qc / q;
    let numerator = |x: Complex64| g21 * (b0 + b1 * x);

    if (r1 - r2).norm() <= 1e-7 * (1.0 + r1.norm()) {
        let r = 0.5 * (r1 + r2);
        return numerator(r) / qa * double_pole_integral(r) + g21 * b1 / qa * pole_integral(r);
    }
    let res1 = numerator(r1) / (qa * (r1 - r2));
    let res2 = numerator(r2) / (qa * (r2 - r1));
    res1 * pole_integral(r1) + res2 * pole_integral(r2)
}

/// How the velocity average is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case", tag = "method")]
pub enum VelocityAverage {
    /// Closed form via the Faddeeva function.
    #[default]
    Exact,
    GaussHermite { order: usize },
}

/// Everything needed to evaluate the averaged susceptibility of one ladder line.
#[derive(Debug, Clone)]
pub struct LineKernel {
    pub rates: DecoherenceRates,
    pub ensemble: ThermalEnsemble,
    pub k_s: f64,
    pub k_c: f64,
    pub counter_propagating: bool,
    quadrature: Option<GaussHermite>,
}

impl LineKernel {
    pub fn new(
        rates: DecoherenceRates,
        ensemble: ThermalEnsemble,
        k_s: f64,
        k_c: f64,
        counter_propagating: bool,
        method: VelocityAverage,
    ) -> Result<Self> {
        rates.validate()?;
        check_wavevectors(k_s, k_c)?;
        let quadrature = match method {
            VelocityAverage::Exact => None,
            VelocityAverage::GaussHermite { order } => Some(GaussHermite::new(order)?),
        };
        Ok(LineKernel {
            rates,
            ensemble,
            k_s,
            k_c,
            counter_propagating,
            quadrature,
        })
    }

    /// Averaged susceptibility; arguments are assumed already validated.
    pub fn chi(&self, det: Detunings, rabi_c: f64) -> Complex64 {
        let u = self.ensemble.most_probable_speed;
        match &self.quadrature {
            Some(gh) if u > 0.0 => {
                let sum = gh
                    .nodes
                    .iter()
                    .zip(&gh.weights)
                    .map(|(&x, &w)| {
                        let d = det.shifted(u * x, self.k_s, self.k_c, self.counter_propagating);
                        w * ladder_kernel(d.delta_s, d.two_photon(), rabi_c, &self.rates)
                    })
                    .sum::<Complex64>();
                sum / SQRT_PI
            }
            _ => exact_average(det, rabi_c, &self.rates, u, self.k_s, self.k_c, self.counter_propagating),
        }
    }
}
