//! Drive power to intra-resonator photon number, and qubit T1 to an
//! equivalent internal quality factor.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::kv::KvDocument;
use crate::resonance::ResonanceFit;

/// Planck constant in J·s (exact SI value).
pub const PLANCK: f64 = 6.626_070_15e-34;

/// Default CPW capacitance per unit length on silicon, F/m.
pub const DEFAULT_C_PER_LENGTH: f64 = 1.6e-10;
pub const DEFAULT_Z0: f64 = 50.0;

/// Feedline and resonator constants needed for photon-number calibration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineCalibration {
    /// CPW characteristic impedance, Ω.
    pub z0: f64,
    /// Capacitance per unit length, F/m.
    pub c_per_length: f64,
    /// Physical resonator length, m.
    pub resonator_length: f64,
    /// Total attenuation between instrument and device, dB.
    pub line_attenuation_db: f64,
}

impl LineCalibration {
    pub fn new(z0: f64, c_per_length: f64, resonator_length: f64, line_attenuation_db: f64) -> Result<Self> {
        let cal = Self {
            z0,
            c_per_length,
            resonator_length,
            line_attenuation_db,
        };
        cal.validate()?;
        Ok(cal)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("z0", self.z0),
            ("c_per_length", self.c_per_length),
            ("resonator_length", self.resonator_length),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::domain(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.line_attenuation_db >= 0.0 && self.line_attenuation_db.is_finite()) {
            return Err(Error::domain(format!(
                "line attenuation must be >= 0 dB, got {}",
                self.line_attenuation_db
            )));
        }
        Ok(())
    }

    /// Reads the `[calibration]` section. Missing keys fall back to
    /// `defaults`; `resonator_length_m` has no built-in default.
    pub fn from_kv(doc: &KvDocument, defaults: Option<&LineCalibration>) -> Result<Self> {
        const S: &str = "calibration";
        let pick = |key: &str, fallback: Option<f64>| -> Result<f64> {
            match doc.parse_opt::<f64>(S, key)? {
                Some(v) => Ok(v),
                None => fallback.ok_or_else(|| {
                    Error::Config(format!("missing key `{key}` in section [{S}]"))
                }),
            }
        };
        let cal = Self {
            z0: pick("z0_ohm", Some(defaults.map_or(DEFAULT_Z0, |d| d.z0)))?,
            c_per_length: pick(
                "c_per_length_f_per_m",
                Some(defaults.map_or(DEFAULT_C_PER_LENGTH, |d| d.c_per_length)),
            )?,
            resonator_length: pick("resonator_length_m", defaults.map(|d| d.resonator_length))?,
            line_attenuation_db: pick(
                "line_attenuation_db",
                Some(defaults.map_or(0.0, |d| d.line_attenuation_db)),
            )?,
        };
        cal.validate()?;
        Ok(cal)
    }
}

/// Loaded quality factor, `(1/Qi + 1/Qc*)^-1`.
pub fn loaded_q(qi: f64, qc_star: f64) -> Result<f64> {
    if !(qi > 0.0) || !(qc_star > 0.0) {
        return Err(Error::domain(format!(
            "quality factors must be positive, got Qi={qi}, Qc*={qc_star}"
        )));
    }
    Ok(1.0 / (1.0 / qi + 1.0 / qc_star))
}

/// Power reaching the device, W. `-inf` dBm maps to 0 W.
pub fn drive_power_watts(drive_power_dbm: f64, line_attenuation_db: f64) -> f64 {
    10f64.powf((drive_power_dbm - line_attenuation_db - 30.0) / 10.0)
}

/// Mean photon number from stored energy `(4 Z0/π)(Ql²/Qc*) C_L L_R P`
/// divided by `h f0`.
pub fn mean_photon_number(fit: &ResonanceFit, cal: &LineCalibration, drive_power_dbm: f64) -> Result<f64> {
    cal.validate()?;
    let p = drive_power_watts(drive_power_dbm, cal.line_attenuation_db);
    photon_number_at_watts(fit.f0, fit.qi, fit.qc_star, cal, p)
}

pub fn photon_number_at_watts(f0: f64, qi: f64, qc_star: f64, cal: &LineCalibration, p_watts: f64) -> Result<f64> {
    if !(f0 > 0.0) {
        return Err(Error::domain(format!("f0 must be positive, got {f0}")));
    }
    if !(p_watts >= 0.0) {
        return Err(Error::domain(format!("drive power must be >= 0 W, got {p_watts}")));
    }
    let ql = loaded_q(qi, qc_star)?;
    let energy = (4.0 * cal.z0 / PI) * (ql * ql / qc_star) * cal.c_per_length * cal.resonator_length * p_watts;
    Ok(energy / (PLANCK * f0))
}

/// `Qi = 2π f T1`.
pub fn qi_from_t1(t1: f64, f: f64) -> Result<f64> {
    if !(t1 >= 0.0) {
        return Err(Error::domain(format!("T1 must be >= 0, got {t1}")));
    }
    if !(f > 0.0) {
        return Err(Error::domain(format!("frequency must be positive, got {f}")));
    }
    Ok(2.0 * PI * f * t1)
}

/// `T1 = Qi / (2π f)`.
pub fn t1_from_qi(qi: f64, f: f64) -> Result<f64> {
    if !(qi >= 0.0) {
        return Err(Error::domain(format!("Qi must be >= 0, got {qi}")));
    }
    if !(f > 0.0) {
        return Err(Error::domain(format!("frequency must be positive, got {f}")));
    }
    Ok(qi / (2.0 * PI * f))
}
