//! Reference computations that share no numerics with `eitsim-core`, used by the
//! acceptance suite to check the library from the outside.

use eitsim_core::lineshape::{DecoherenceRates, Detunings};
use eitsim_core::Complex64;

/// Collects one PASS/FAIL line per criterion.
#[derive(Debug, Default)]
pub struct Report {
    pub failures: Vec<String>,
    pub lines: Vec<String>,
}

impl Report {
    pub fn check(&mut self, id: &str, ok: bool, detail: impl Into<String>) {
        let line = format!("{} criterion {id}: {}", if ok { "PASS" } else { "FAIL" }, detail.into());
        println!("{line}");
        if !ok {
            self.failures.push(id.to_string());
        }
        self.lines.push(line);
    }

    /// Context printed next to a criterion without affecting the verdict.
    pub fn info(&mut self, id: &str, detail: impl Into<String>) {
        let line = format!("INFO criterion {id}: {}", detail.into());
        println!("{line}");
        self.lines.push(line);
    }
}

/// Thermal average of the counter-propagating ladder susceptibility by the trapezoid rule
/// on x = v/u over [−`x_max`, `x_max`] with `n` intervals.
///
/// The integrand is written out from the weak-probe steady state here rather than calling
/// into the library kernel.
#[allow(clippy::too_many_arguments)]
pub fn trapezoid_average(
    det: Detunings,
    rabi_c: f64,
    rates: &DecoherenceRates,
    most_probable_speed: f64,
    k_s: f64,
    k_c: f64,
    x_max: f64,
    n: usize,
) -> Complex64 {
    let h = 2.0 * x_max / n as f64;
    let mut sum = Complex64::new(0.0, 0.0);
    for i in 0..=n {
        let x = -x_max + h * i as f64;
        let v = most_probable_speed * x;
        let ds = det.delta_s - k_s * v;
        let dc = det.delta_c - k_c * v;
        let rho21 = Complex64::new(rates.gamma21, -ds)
            + 0.25 * rabi_c * rabi_c / Complex64::new(rates.gamma31, -(ds - dc));
        let chi = Complex64::new(0.0, rates.gamma21) / rho21;
        let end = if i == 0 || i == n { 0.5 } else { 1.0 };
        sum += end * (-x * x).exp() * chi;
    }
    sum * h / std::f64::consts::PI.sqrt()
}

/// Largest |Σ⟨j1 m1; j2 m2|J M⟩⟨j1 m1; j2 m2|J′ M⟩ − δ_JJ′| over all couplings with
/// j1, j2 ≤ `j_max`, together with the number of inner products checked.
pub fn cg_orthonormality_deviation<F>(j_max: f64, cg: F) -> (f64, usize)
where
    F: Fn(f64, f64, f64, f64, f64, f64) -> f64,
{
    let projections = |j: f64| (0..=(2.0 * j).round() as i32).map(move |k| -j + k as f64);
    let twice_max = (2.0 * j_max).round() as i32;
    let mut worst: f64 = 0.0;
    let mut count = 0;
    for tj1 in 0..=twice_max {
        for tj2 in 0..=twice_max {
            let (j1, j2) = (tj1 as f64 / 2.0, tj2 as f64 / 2.0);
            let totals: Vec<f64> = (0..=tj1.min(tj2)).map(|k| (j1 - j2).abs() + k as f64).collect();
            for &j in &totals {
                for &jp in &totals {
                    for m in projections(j.min(jp)) {
                        let dot: f64 = projections(j1)
                            .filter(|m1| (m - m1).abs() <= j2)
                            .map(|m1| cg(j1, m1, j2, m - m1, j, m) * cg(j1, m1, j2, m - m1, jp, m))
                            .sum();
                        let target = if j == jp { 1.0 } else { 0.0 };
                        worst = worst.max((dot - target).abs());
                        count += 1;
                    }
                }
            }
        }
    }
    (worst, count)
}
