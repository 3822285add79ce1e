//! Energy bookkeeping for a λ/4 resonator against a lumped Xmon cross.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::kv::KvDocument;

/// Voltage along a λ/4 resonator, `v0 cos(π x / 2L)`, from the open end
/// (`x = 0`) to the shorted end (`x = L`).
pub fn resonator_voltage_profile(v0: f64, x: f64, length: f64) -> Result<f64> {
    if !(length > 0.0) {
        return Err(Error::domain(format!("length must be positive, got {length}")));
    }
    if !(0.0..=length).contains(&x) {
        return Err(Error::domain(format!("x = {x} outside [0, {length}]")));
    }
    Ok(v0 * (PI * x / (2.0 * length)).cos())
}

fn check_positive(values: &[(&str, f64)]) -> Result<()> {
    for (name, v) in values {
        if !(*v > 0.0 && v.is_finite()) {
            return Err(Error::domain(format!("{name} must be positive, got {v}")));
        }
    }
    Ok(())
}

/// Capacitive energy of the cosine profile, `C_L L V0² / 4`.
pub fn resonator_energy(c_per_length: f64, length: f64, v0: f64) -> Result<f64> {
    check_positive(&[("c_per_length", c_per_length), ("length", length), ("v0", v0)])?;
    Ok(c_per_length * length * v0 * v0 / 4.0)
}

/// Capacitive energy of a uniformly charged line, `C_L L V² / 2`.
pub fn qubit_energy(c_per_length: f64, length: f64, v0: f64) -> Result<f64> {
    check_positive(&[("c_per_length", c_per_length), ("length", length), ("v0", v0)])?;
    Ok(c_per_length * length * v0 * v0 / 2.0)
}

/// `(V_R / V_Q)² = 2 L_Q / L_R` at equal stored energy. Its reciprocal is
/// how much more sensitive the qubit is to a loss element at its antinode.
pub fn voltage_ratio_squared(l_qubit: f64, l_resonator: f64) -> Result<f64> {
    check_positive(&[("l_qubit", l_qubit), ("l_resonator", l_resonator)])?;
    Ok(2.0 * l_qubit / l_resonator)
}

pub fn qubit_sensitivity_factor(l_qubit: f64, l_resonator: f64) -> Result<f64> {
    Ok(1.0 / voltage_ratio_squared(l_qubit, l_resonator)?)
}

/// Lumped capacitances per circuit element, in farads.
#[derive(Debug, Clone, PartialEq)]
pub struct CircuitCapacitances(BTreeMap<String, f64>);

pub const RESONATOR: &str = "resonator";
pub const XMON_CROSS: &str = "xmon_cross";

impl Default for CircuitCapacitances {
    /// 6 GHz λ/4 CPW resonator, Xmon cross, junction, stub, lift-off metal and hooks.
    fn default() -> Self {
        let femto = 1e-15;
        Self(
            [
                (RESONATOR, 338.0 * femto),
                (XMON_CROSS, 86.0 * femto),
                ("junction", 4.0 * femto),
                ("cpw_stub", 2.27 * femto),
                ("liftoff_metal", 0.75 * femto),
                ("hooks", 0.05 * femto),
            ]
            .into_iter()
            .map(|(k, v)| (k.to_string(), v))
            .collect(),
        )
    }
}

impl CircuitCapacitances {
    pub fn new(map: BTreeMap<String, f64>) -> Result<Self> {
        for (k, v) in &map {
            if !(*v > 0.0 && v.is_finite()) {
                return Err(Error::domain(format!("capacitance `{k}` must be positive, got {v}")));
            }
        }
        Ok(Self(map))
    }

    pub fn get(&self, label: &str) -> Option<f64> {
        self.0.get(label).copied()
    }

    pub fn insert(&mut self, label: impl Into<String>, farads: f64) -> Result<()> {
        if !(farads > 0.0 && farads.is_finite()) {
            return Err(Error::domain(format!("capacitance must be positive, got {farads}")));
        }
        self.0.insert(label.into(), farads);
        Ok(())
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, f64)> {
        self.0.iter().map(|(k, v)| (k.as_str(), *v))
    }

    /// Overrides defaults from a `[capacitances]` section whose keys are
    /// `<label>_f`, values in farads.
    pub fn from_kv(doc: &KvDocument) -> Result<Self> {
        let mut caps = Self::default();
        let keys: Vec<String> = doc.keys("capacitances").map(str::to_string).collect();
        for key in keys {
            let label = key.strip_suffix("_f").ok_or_else(|| {
                Error::Config(format!("capacitance key `{key}` must end in `_f` (farads)"))
            })?;
            let v: f64 = doc.parse_req("capacitances", &key)?;
            caps.insert(label, v)?;
        }
        Ok(caps)
    }

    fn require(&self, label: &str) -> Result<f64> {
        self.get(label)
            .ok_or_else(|| Error::Config(format!("missing capacitance `{label}`")))
    }
}

/// Lift-off site participation of an `n_sites` resonator relative to the
/// electrode participation of a qubit with `n_qubit_electrodes` electrodes.
///
/// Sites sit at the resonator antinode, so each stores `½ c V0²` against
/// the resonator total `C_R V0² / 4`; on the qubit each electrode stores
/// `½ c V²` against `C_Q V² / 2`. The site capacitance cancels.
pub fn participation_equivalence(
    n_sites: u32,
    caps: &CircuitCapacitances,
    n_qubit_electrodes: u32,
) -> Result<f64> {
    if n_sites == 0 || n_qubit_electrodes == 0 {
        return Err(Error::domain("site and electrode counts must be >= 1"));
    }
    let c_res = caps.require(RESONATOR)?;
    let c_qubit = caps.require(XMON_CROSS)?;
    let site_energy = 0.5;
    let res_fraction = site_energy / resonator_energy(c_res, 1.0, 1.0)?;
    let qubit_fraction = site_energy / qubit_energy(c_qubit, 1.0, 1.0)?;
    Ok((n_sites as f64 * res_fraction) / (n_qubit_electrodes as f64 * qubit_fraction))
}
