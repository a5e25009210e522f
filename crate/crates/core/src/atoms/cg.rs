//! Clebsch–Gordan coefficients for integer and half-integer angular momenta.
//!
//! Quantum numbers are carried internally as doubled integers so half-integers are exact.

use crate::{Error, Result};

/// An angular-momentum quantum number stored as twice its value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct HalfInt(i32);

impl HalfInt {
    pub const fn from_twice(twice: i32) -> Self {
        HalfInt(twice)
    }

    pub const fn from_int(value: i32) -> Self {
        HalfInt(2 * value)
    }

    /// Converts a float that must be an integer or half-integer.
    pub fn from_f64(value: f64) -> Result<Self> {
        let twice = 2.0 * value;
        if !twice.is_finite() || (twice - twice.round()).abs() > 1e-9 || twice.abs() > 1e6 {
            return Err(Error::invalid(format!(
                "{value} is not an integer or half-integer"
            )));
        }
        Ok(HalfInt(twice.round() as i32))
    }

    pub const fn twice(self) -> i32 {
        self.0
    }

    pub fn value(self) -> f64 {
        f64::from(self.0) / 2.0
    }
}

fn factorial(n: i32) -> f64 {
    debug_assert!(n >= 0);
    (1..=n).fold(1.0, |acc, k| acc * f64::from(k))
}

fn check_pair(j: HalfInt, m: HalfInt, label: &str) -> Result<()> {
    if j.twice() < 0 {
        return Err(Error::invalid(format!("{label}: negative j = {}", j.value())));
    }
    if m.twice().abs() > j.twice() {
        return Err(Error::invalid(format!(
            "{label}: |m| = {} exceeds j = {}",
            m.value().abs(),
            j.value()
        )));
    }
    if (j.twice() - m.twice()) % 2 != 0 {
        return Err(Error::invalid(format!(
            "{label}: j = {} and m = {} differ by a non-integer",
            j.value(),
            m.value()
        )));
    }
    Ok(())
}

/// ⟨j1 m1; j2 m2 | J M⟩ in the Condon–Shortley phase convention (Racah closed form).
///
/// Returns 0 when `M ≠ m1 + m2` or the triangle rule fails; malformed quantum numbers
/// (negative `j`, `|m| > j`, mixed parity) are rejected.
pub fn clebsch_gordan(
    j1: HalfInt,
    m1: HalfInt,
    j2: HalfInt,
    m2: HalfInt,
    j: HalfInt,
    m: HalfInt,
) -> Result<f64> {
    check_pair(j1, m1, "j1")?;
    check_pair(j2, m2, "j2")?;
    check_pair(j, m, "J")?;

    let (tj1, tm1, tj2, tm2, tj, tm) = (
        j1.twice(),
        m1.twice(),
        j2.twice(),
        m2.twice(),
        j.twice(),
        m.twice(),
    );
    if tm != tm1 + tm2 {
        return Ok(0.0);
    }
    if tj < (tj1 - tj2).abs() || tj > tj1 + tj2 || (tj1 + tj2 + tj) % 2 != 0 {
        return Ok(0.0);
    }

    // All of these are integers once the checks above hold.
    let a = (tj1 + tj2 - tj) / 2;
    let b = (tj1 - tm1) / 2;
    let c = (tj2 + tm2) / 2;
    let d = (tj - tj2 + tm1) / 2;
    let e = (tj - tj1 - tm2) / 2;

    let prefactor = (f64::from(tj + 1)
        * factorial((tj + tj1 - tj2) / 2)
        * factorial((tj - tj1 + tj2) / 2)
        * factorial(a)
        / factorial((tj1 + tj2 + tj) / 2 + 1))
        .sqrt();
    let norm = (factorial((tj + tm) / 2)
        * factorial((tj - tm) / 2)
        * factorial((tj1 - tm1) / 2)
        * factorial((tj1 + tm1) / 2)
        * factorial((tj2 - tm2) / 2)
        * factorial((tj2 + tm2) / 2))
        .sqrt();

    let k_min = 0.max(-d).max(-e);
    let k_max = a.min(b).min(c);
    let sum: f64 = (k_min..=k_max)
        .map(|k| {
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            sign / (factorial(k)
                * factorial(a - k)
                * factorial(b - k)
                * factorial(c - k)
                * factorial(d + k)
                * factorial(e + k))
        })
        .sum();

    Ok(prefactor * norm * sum)
}

/// Float front end for [`clebsch_gordan`]; arguments must be integers or half-integers.
pub fn cg_coefficient(j1: f64, m1: f64, j2: f64, m2: f64, j: f64, m: f64) -> Result<f64> {
    clebsch_gordan(
        HalfInt::from_f64(j1)?,
        HalfInt::from_f64(m1)?,
        HalfInt::from_f64(j2)?,
        HalfInt::from_f64(m2)?,
        HalfInt::from_f64(j)?,
        HalfInt::from_f64(m)?,
    )
}
