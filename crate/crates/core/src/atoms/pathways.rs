use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::cg::{clebsch_gordan, HalfInt};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CircularPolarization {
    SigmaPlus,
    SigmaMinus,
}

impl CircularPolarization {
    /// Change in m carried by the photon.
    pub fn q(self) -> i32 {
        match self {
            CircularPolarization::SigmaPlus => 1,
            CircularPolarization::SigmaMinus => -1,
        }
    }

    pub fn flipped(self) -> Self {
        match self {
            CircularPolarization::SigmaPlus => CircularPolarization::SigmaMinus,
            CircularPolarization::SigmaMinus => CircularPolarization::SigmaPlus,
        }
    }
}

/// One two-photon route ground → intermediate → upper through magnetic sublevels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SublevelPathway {
    pub mf_ground: i32,
    pub mf_intermediate: i32,
    pub mf_upper: i32,
    pub signal_polarization: CircularPolarization,
    pub control_polarization: CircularPolarization,
    /// ⟨F m; 1 q_s | F′ m′⟩
    pub signal_coupling: f64,
    /// ⟨F′ m′; 1 q_c | F″ m″⟩
    pub control_coupling: f64,
    /// Product of the two couplings.
    pub amplitude: f64,
    pub population_weight: f64,
}

impl SublevelPathway {
    pub fn obeys_selection_rules(&self) -> bool {
        self.mf_intermediate == self.mf_ground + self.signal_polarization.q()
            && self.mf_upper == self.mf_intermediate + self.control_polarization.q()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathwaySet {
    pub f_ground: i32,
    pub f_intermediate: i32,
    pub f_upper: i32,
    pub control_polarization: CircularPolarization,
    pub pathways: Vec<SublevelPathway>,
}

impl PathwaySet {
    pub fn len(&self) -> usize {
        self.pathways.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pathways.is_empty()
    }

    pub fn with_signal(&self, pol: CircularPolarization) -> impl Iterator<Item = &SublevelPathway> {
        self.pathways
            .iter()
            .filter(move |p| p.signal_polarization == pol)
    }

    /// Reflection m → −m: swaps every helicity and negates every projection.
    ///
    /// Couplings pick up (−1)^(j1+j2−J) under reflection; only their squares and the
    /// control-coupling magnitude enter the susceptibility, so magnitudes are kept.
    pub fn mirrored(&self) -> PathwaySet {
        PathwaySet {
            f_ground: self.f_ground,
            f_intermediate: self.f_intermediate,
            f_upper: self.f_upper,
            control_polarization: self.control_polarization.flipped(),
            pathways: self
                .pathways
                .iter()
                .map(|p| SublevelPathway {
                    mf_ground: -p.mf_ground,
                    mf_intermediate: -p.mf_intermediate,
                    mf_upper: -p.mf_upper,
                    signal_polarization: p.signal_polarization.flipped(),
                    control_polarization: p.control_polarization.flipped(),
                    ..p.clone()
                })
                .collect(),
        }
    }

    /// Population in the ground state spread uniformly over all sublevels.
    pub fn thermal_population(f_ground: i32) -> BTreeMap<i32, f64> {
        let w = 1.0 / f64::from(2 * f_ground + 1);
        (-f_ground..=f_ground).map(|m| (m, w)).collect()
    }

    /// All population in m_F = 0.
    pub fn m_zero_population() -> BTreeMap<i32, f64> {
        BTreeMap::from([(0, 1.0)])
    }
}

fn cg_int(j1: i32, m1: i32, j2: i32, m2: i32, j: i32, m: i32) -> Result<f64> {
    clebsch_gordan(
        HalfInt::from_int(j1),
        HalfInt::from_int(m1),
        HalfInt::from_int(j2),
        HalfInt::from_int(m2),
        HalfInt::from_int(j),
        HalfInt::from_int(m),
    )
}

/// Enumerates σ⁺ and σ⁻ signal pathways for a fixed control helicity.
///
/// Sublevels with zero population are skipped, as are routes that would leave
/// the |m| ≤ F range of the intermediate or upper level.
pub fn pathway_set(
    f_ground: i32,
    f_intermediate: i32,
    f_upper: i32,
    control_pol: CircularPolarization,
    initial_population: &BTreeMap<i32, f64>,
) -> Result<PathwaySet> {
    if f_ground < 0 || f_intermediate < 0 || f_upper < 0 {
        return Err(Error::invalid("hyperfine F must be non-negative"));
    }
    if (f_intermediate - f_ground).abs() > 1 || (f_upper - f_intermediate).abs() > 1 {
        return Err(Error::invalid(format!(
            "F={f_ground} → F′={f_intermediate} → F″={f_upper} violates ΔF ∈ {{−1, 0, +1}}"
        )));
    }
    for (&m, &w) in initial_population {
        if m.abs() > f_ground {
            return Err(Error::invalid(format!(
                "population references m_F = {m} outside F = {f_ground}"
            )));
        }
        if !(w >= 0.0 && w.is_finite()) {
            return Err(Error::invalid(format!("population weight {w} for m_F = {m}")));
        }
    }

    let mut pathways = Vec::new();
    for (&mg, &weight) in initial_population {
        if weight == 0.0 {
            continue;
        }
        for signal_pol in [CircularPolarization::SigmaPlus, CircularPolarization::SigmaMinus] {
            let mi = mg + signal_pol.q();
            let mu = mi + control_pol.q();
            if mi.abs() > f_intermediate || mu.abs() > f_upper {
                continue;
            }
            let signal_coupling = cg_int(f_ground, mg, 1, signal_pol.q(), f_intermediate, mi)?;
            let control_coupling = cg_int(f_intermediate, mi, 1, control_pol.q(), f_upper, mu)?;
            pathways.push(SublevelPathway {
                mf_ground: mg,
                mf_intermediate: mi,
                mf_upper: mu,
                signal_polarization: signal_pol,
                control_polarization: control_pol,
                signal_coupling,
                control_coupling,
                amplitude: signal_coupling * control_coupling,
                population_weight: weight,
            });
        }
    }

    Ok(PathwaySet {
        f_ground,
        f_intermediate,
        f_upper,
        control_polarization: control_pol,
        pathways,
    })
}
