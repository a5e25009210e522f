//! Rubidium atomic data for the 5S₁/₂ → 5P₃/₂ → 5D₅/₂ ladder.
//!
//! Numerical values come from D. A. Steck, "Rubidium 85 D Line Data" and
//! "Rubidium 87 D Line Data" (revisions 2.2.x and 2.3.x), except the 5D₅/₂ lifetime
//! (Sheng, Pérez Galván and Orozco, J. Phys. B 41, 175002 (2008)).

mod cg;
mod pathways;

pub use cg::{cg_coefficient, clebsch_gordan, HalfInt};
pub use pathways::{pathway_set, CircularPolarization, PathwaySet, SublevelPathway};

use serde::{Deserialize, Serialize};

use crate::{Error, Result, TWO_PI};

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;
/// Boltzmann constant, J/K.
pub const BOLTZMANN: f64 = 1.380_649e-23;
/// Unified atomic mass unit, kg.
pub const ATOMIC_MASS_UNIT: f64 = 1.660_539_066_60e-27;

/// ⁸⁵Rb atomic mass, u (Steck ⁸⁵Rb table 1).
pub const RB85_MASS_U: f64 = 84.911_789_738;
/// ⁸⁷Rb atomic mass, u (Steck ⁸⁷Rb table 1).
pub const RB87_MASS_U: f64 = 86.909_180_527;
/// ⁸⁵Rb natural abundance (Steck ⁸⁵Rb table 1).
pub const RB85_ABUNDANCE: f64 = 0.7217;
/// ⁸⁷Rb natural abundance (Steck ⁸⁷Rb table 1).
pub const RB87_ABUNDANCE: f64 = 0.2783;

/// D2 fine-structure transition frequency of ⁸⁵Rb, Hz (Steck ⁸⁵Rb table 3).
pub const RB85_D2_FREQUENCY: f64 = 384.230_406_373e12;
/// D2 fine-structure transition frequency of ⁸⁷Rb, Hz (Steck ⁸⁷Rb table 3).
pub const RB87_D2_FREQUENCY: f64 = 384.230_484_468_5e12;

/// 5S₁/₂ hyperfine splitting of ⁸⁵Rb, Hz (Steck ⁸⁵Rb table 5).
pub const RB85_GROUND_SPLITTING: f64 = 3.035_732_439_0e9;
/// 5S₁/₂ hyperfine splitting of ⁸⁷Rb, Hz (Steck ⁸⁷Rb table 6).
pub const RB87_GROUND_SPLITTING: f64 = 6.834_682_610_904_29e9;

/// Energy of 5S₁/₂ F=3 above the fine-structure centroid, ⁸⁵Rb, Hz.
const RB85_F3_SHIFT: f64 = 1.264_888_516_3e9;
/// Energy of 5S₁/₂ F=2 above the fine-structure centroid, ⁸⁷Rb, Hz.
const RB87_F2_SHIFT: f64 = 2.563_005_979_089_11e9;

/// 5P₃/₂ natural linewidth Γ₂, rad/s (Steck: 2π·6.0666 MHz).
pub const GAMMA_5P32: f64 = TWO_PI * 6.0666e6;
/// 5D₅/₂ natural linewidth Γ₃, rad/s, from the 238.5 ns lifetime.
pub const GAMMA_5D52: f64 = 1.0 / 238.5e-9;

/// 5P₃/₂ → 5D₅/₂ control transition frequency, Hz (hyperfine manifolds collapsed).
pub const CONTROL_FREQUENCY: f64 = 386.340e12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum IsotopeName {
    Rb85,
    Rb87,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Isotope {
    pub name: IsotopeName,
    /// kg
    pub atomic_mass: f64,
    pub natural_abundance: f64,
    /// Hz
    pub ground_hyperfine_splitting: f64,
    /// Nuclear spin I, as twice its value.
    pub twice_nuclear_spin: i32,
}

impl Isotope {
    pub fn rb85() -> Self {
        Isotope {
            name: IsotopeName::Rb85,
            atomic_mass: RB85_MASS_U * ATOMIC_MASS_UNIT,
            natural_abundance: RB85_ABUNDANCE,
            ground_hyperfine_splitting: RB85_GROUND_SPLITTING,
            twice_nuclear_spin: 5,
        }
    }

    pub fn rb87() -> Self {
        Isotope {
            name: IsotopeName::Rb87,
            atomic_mass: RB87_MASS_U * ATOMIC_MASS_UNIT,
            natural_abundance: RB87_ABUNDANCE,
            ground_hyperfine_splitting: RB87_GROUND_SPLITTING,
            twice_nuclear_spin: 3,
        }
    }

    pub fn by_name(name: IsotopeName) -> Self {
        match name {
            IsotopeName::Rb85 => Self::rb85(),
            IsotopeName::Rb87 => Self::rb87(),
        }
    }

    /// Ground-state F values, lower then upper (I ± 1/2).
    pub fn ground_f_values(&self) -> [i32; 2] {
        [(self.twice_nuclear_spin - 1) / 2, (self.twice_nuclear_spin + 1) / 2]
    }

    /// Total number of 5S₁/₂ sublevels, 2(2I+1).
    pub fn ground_degeneracy(&self) -> i32 {
        2 * (self.twice_nuclear_spin + 1)
    }

    fn d2_frequency(&self) -> f64 {
        match self.name {
            IsotopeName::Rb85 => RB85_D2_FREQUENCY,
            IsotopeName::Rb87 => RB87_D2_FREQUENCY,
        }
    }

    /// Shift of a ground hyperfine level from the fine-structure centroid, Hz.
    fn ground_shift(&self, f: i32) -> f64 {
        let upper_shift = match self.name {
            IsotopeName::Rb85 => RB85_F3_SHIFT,
            IsotopeName::Rb87 => RB87_F2_SHIFT,
        };
        let [_, f_upper] = self.ground_f_values();
        if f == f_upper {
            upper_shift
        } else {
            upper_shift - self.ground_hyperfine_splitting
        }
    }

    /// Signal transition frequency from ground level `f` to the collapsed 5P₃/₂ manifold, Hz.
    pub fn signal_frequency(&self, f: i32) -> f64 {
        self.d2_frequency() - self.ground_shift(f)
    }
}

/// One hyperfine-resolved two-photon ladder with collapsed F′ and F″ manifolds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LadderLine {
    pub isotope: Isotope,
    pub f_ground: i32,
    pub f_intermediate_set: Vec<i32>,
    pub f_upper_set: Vec<i32>,
    /// Offset of the signal resonance from the Δs = 0 reference, Hz.
    pub signal_center_offset: f64,
    /// m
    pub signal_wavelength: f64,
    /// m
    pub control_wavelength: f64,
    /// 5P₃/₂ linewidth, rad/s.
    pub gamma2: f64,
    /// 5D₅/₂ linewidth, rad/s.
    pub gamma3: f64,
    pub relative_strength: f64,
}

impl LadderLine {
    pub fn signal_wavevector(&self) -> f64 {
        TWO_PI / self.signal_wavelength
    }

    pub fn control_wavevector(&self) -> f64 {
        TWO_PI / self.control_wavelength
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gamma2 > self.gamma3 && self.gamma3 > 0.0) {
            return Err(Error::invalid("line linewidths must satisfy Γ₂ > Γ₃ > 0"));
        }
        if !(self.signal_wavelength > self.control_wavelength && self.control_wavelength > 0.0) {
            return Err(Error::invalid(
                "signal wavelength must exceed control wavelength",
            ));
        }
        if !(self.relative_strength >= 0.0) || !self.signal_center_offset.is_finite() {
            return Err(Error::invalid("line strength must be ≥ 0 and offset finite"));
        }
        Ok(())
    }
}

fn f_range(lo: i32, hi: i32) -> Vec<i32> {
    (lo.max(0)..=hi).collect()
}

/// The four Doppler dips of natural rubidium: one line per (isotope, ground F).
///
/// Offsets are measured from the ⁸⁵Rb F=2 line. Strengths are
/// abundance × (2F+1)/(total ground degeneracy) and sum to one.
pub fn default_line_set() -> Vec<LadderLine> {
    let reference = Isotope::rb85().signal_frequency(2);
    let control_wavelength = SPEED_OF_LIGHT / CONTROL_FREQUENCY;
    let mut lines = Vec::with_capacity(4);
    for isotope in [Isotope::rb85(), Isotope::rb87()] {
        // J' = 3/2 and J'' = 5/2 couple to F' ∈ I±3/2 and F'' ∈ I±5/2
        let twice_i = isotope.twice_nuclear_spin;
        let intermediate = f_range((twice_i - 3).abs() / 2, (twice_i + 3) / 2);
        let upper = f_range((twice_i - 5).abs() / 2, (twice_i + 5) / 2);
        for f in isotope.ground_f_values() {
            let nu = isotope.signal_frequency(f);
            let degeneracy = f64::from(2 * f + 1) / f64::from(isotope.ground_degeneracy());
            let f_intermediate_set: Vec<i32> = intermediate
                .iter()
                .copied()
                .filter(|fp| (fp - f).abs() <= 1)
                .collect();
            let f_upper_set: Vec<i32> = upper
                .iter()
                .copied()
                .filter(|fu| f_intermediate_set.iter().any(|fp| (fu - fp).abs() <= 1))
                .collect();
            lines.push(LadderLine {
                isotope,
                f_ground: f,
                f_intermediate_set,
                f_upper_set,
                signal_center_offset: nu - reference,
                signal_wavelength: SPEED_OF_LIGHT / nu,
                control_wavelength,
                gamma2: GAMMA_5P32,
                gamma3: GAMMA_5D52,
                relative_strength: isotope.natural_abundance * degeneracy,
            });
        }
    }
    lines
}

/// Atomic constants as a JSON-serialisable document.
#[derive(Debug, Clone, Serialize)]
pub struct AtomsDump {
    pub isotopes: Vec<Isotope>,
    pub lines: Vec<LadderLine>,
    pub gamma_5p32_rad_per_s: f64,
    pub gamma_5d52_rad_per_s: f64,
    pub control_frequency_hz: f64,
    pub reference_signal_frequency_hz: f64,
}

pub fn atoms_dump() -> AtomsDump {
    AtomsDump {
        isotopes: vec![Isotope::rb85(), Isotope::rb87()],
        lines: default_line_set(),
        gamma_5p32_rad_per_s: GAMMA_5P32,
        gamma_5d52_rad_per_s: GAMMA_5D52,
        control_frequency_hz: CONTROL_FREQUENCY,
        reference_signal_frequency_hz: Isotope::rb85().signal_frequency(2),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(lines: &[LadderLine], name: IsotopeName, f: i32) -> &LadderLine {
        lines
            .iter()
            .find(|l| l.isotope.name == name && l.f_ground == f)
            .unwrap()
    }

    #[test]
    fn abundances_sum_to_one() {
        let s = Isotope::rb85().natural_abundance + Isotope::rb87().natural_abundance;
        assert!((s - 1.0).abs() < 1e-6);
    }

    #[test]
    fn reference_line_is_zero_offset() {
        let lines = default_line_set();
        assert_eq!(lines.len(), 4);
        assert_eq!(line(&lines, IsotopeName::Rb85, 2).signal_center_offset, 0.0);
    }

    #[test]
    fn reference_frequency_matches_quoted_value() {
        // 384.232 THz for the 85Rb F=2 line, 386.340 THz for the control
        let nu = Isotope::rb85().signal_frequency(2);
        assert!((nu - 384.232e12).abs() < 0.5e9, "{nu}");
    }

    #[test]
    fn rb85_ground_splitting_between_lines() {
        let lines = default_line_set();
        let d = line(&lines, IsotopeName::Rb85, 3).signal_center_offset
            - line(&lines, IsotopeName::Rb85, 2).signal_center_offset;
        assert!((d.abs() - 3.035_732_439e9).abs() < 1.0, "{d}");
        let d87 = line(&lines, IsotopeName::Rb87, 2).signal_center_offset
            - line(&lines, IsotopeName::Rb87, 1).signal_center_offset;
        assert!((d87.abs() - 6.834_682_611e9).abs() < 1.0, "{d87}");
    }

    #[test]
    fn offsets_are_ordered_like_the_d2_spectrum() {
        // Rb87 F=2 < Rb85 F=3 < Rb85 F=2 < Rb87 F=1
        let lines = default_line_set();
        let o = |n, f| line(&lines, n, f).signal_center_offset;
        assert!(o(IsotopeName::Rb87, 2) < o(IsotopeName::Rb85, 3));
        assert!(o(IsotopeName::Rb85, 3) < 0.0);
        assert!(o(IsotopeName::Rb87, 1) > 0.0);
        assert!((o(IsotopeName::Rb87, 1) - 2.578_929e9).abs() < 1e6);
        assert!((o(IsotopeName::Rb87, 2) + 4.255_754e9).abs() < 1e6);
    }

    #[test]
    fn strengths_normalized() {
        let s: f64 = default_line_set().iter().map(|l| l.relative_strength).sum();
        assert!((s - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rereferencing_keeps_pairwise_differences() {
        let lines = default_line_set();
        let shift = lines[1].signal_center_offset;
        let moved: Vec<f64> = lines.iter().map(|l| l.signal_center_offset - shift).collect();
        for i in 0..4 {
            for j in 0..4 {
                let a = lines[i].signal_center_offset - lines[j].signal_center_offset;
                let b = moved[i] - moved[j];
                assert!((a - b).abs() < 1e-3);
            }
        }
    }

    #[test]
    fn lines_satisfy_invariants() {
        for l in default_line_set() {
            l.validate().unwrap();
            assert!((l.signal_wavelength - 780.24e-9).abs() < 0.01e-9);
            assert!((l.control_wavelength - 775.98e-9).abs() < 0.01e-9);
        }
        let l = line(&default_line_set(), IsotopeName::Rb85, 2).clone();
        assert_eq!(l.f_intermediate_set, vec![1, 2, 3]);
        assert_eq!(l.f_upper_set, vec![0, 1, 2, 3, 4]);
    }

    #[test]
    fn dump_serializes() {
        let v = serde_json::to_value(atoms_dump()).unwrap();
        assert_eq!(v["lines"].as_array().unwrap().len(), 4);
    }
}
