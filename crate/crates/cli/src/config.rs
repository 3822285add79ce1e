//! Run configuration.
//!
//! Precedence for every setting: command-line flag, then this file, then
//! the built-in default.
//!
//! ```text
//! [calibration]        # photon-number conversion
//! resonator_length_m = 5e-3
//! z0_ohm = 50
//! c_per_length_f_per_m = 1.6e-10
//! line_attenuation_db = 70
//!
//! [fit]
//! max_iterations = 200
//! relative_cost_tolerance = 1e-12
//!
//! [participation]
//! tolerance = 0.01
//!
//! [ratio]
//! l_qubit_m = 640e-6
//! l_resonator_m = 5000e-6
//! n_sites = 4
//! n_qubit_electrodes = 2
//!
//! [capacitances]       # farads, `<label>_f`
//! resonator_f = 338e-15
//! xmon_cross_f = 86e-15
//! ```

use std::path::Path;
use std::str::FromStr;

use tlsloss::calibration::LineCalibration;
use tlsloss::kv::KvDocument;
use tlsloss::lossmodel::CircuitCapacitances;
use tlsloss::resonance::FitOptions;

use crate::error::CliError;

const SECTIONS: [&str; 5] = ["calibration", "fit", "participation", "ratio", "capacitances"];

#[derive(Default)]
pub struct Config {
    doc: Option<KvDocument>,
}

impl Config {
    pub fn read(path: &Path) -> Result<Self, CliError> {
        let doc = KvDocument::read(path)?;
        for s in doc.sections() {
            if !SECTIONS.contains(&s) {
                return Err(CliError::Input(format!(
                    "{}: unknown section [{s}]",
                    path.display()
                )));
            }
        }
        Ok(Self { doc: Some(doc) })
    }

    pub fn has_section(&self, section: &str) -> bool {
        self.doc.as_ref().is_some_and(|d| d.has_section(section))
    }

    /// Flag value, else config value, else default.
    pub fn pick<T: FromStr>(&self, flag: Option<T>, section: &str, key: &str, default: T) -> Result<T, CliError> {
        if let Some(v) = flag {
            return Ok(v);
        }
        match &self.doc {
            Some(d) => Ok(d.parse_opt(section, key)?.unwrap_or(default)),
            None => Ok(default),
        }
    }

    pub fn calibration(&self) -> Result<Option<LineCalibration>, CliError> {
        match &self.doc {
            Some(d) if d.has_section("calibration") => Ok(Some(LineCalibration::from_kv(d, None)?)),
            _ => Ok(None),
        }
    }

    pub fn fit_options(&self, max_iterations: Option<usize>) -> Result<FitOptions, CliError> {
        let base = FitOptions::default();
        Ok(FitOptions {
            max_iterations: self.pick(max_iterations, "fit", "max_iterations", base.max_iterations)?,
            relative_cost_tolerance: self.pick(
                None,
                "fit",
                "relative_cost_tolerance",
                base.relative_cost_tolerance,
            )?,
            ..base
        })
    }

    pub fn capacitances(&self) -> Result<CircuitCapacitances, CliError> {
        match &self.doc {
            Some(d) => Ok(CircuitCapacitances::from_kv(d)?),
            None => Ok(CircuitCapacitances::default()),
        }
    }
}
