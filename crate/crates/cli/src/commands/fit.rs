use std::path::PathBuf;

use serde_json::json;
use tlsloss::calibration::{mean_photon_number, LineCalibration};
use tlsloss::resonance::io::{load_trace, sidecar_path};
use tlsloss::resonance::{fit_trace_with, ComplexTrace, ResonanceFit};
use tlsloss::Error;

use super::{fit_fields, merge};
use crate::error::CliError;
use crate::report::Report;
use crate::Context;

#[derive(clap::Args, Debug)]
pub struct Args {
    /// Trace CSV: `frequency_hz,s21_real,s21_imag` or `frequency_hz,s21_db,s21_phase_deg`.
    pub trace: PathBuf,

    /// Drive power at the instrument output, dBm (overrides the sidecar).
    #[arg(long, allow_negative_numbers = true)]
    pub power_dbm: Option<f64>,

    /// Iteration cap for the least-squares fit.
    #[arg(long)]
    pub max_iterations: Option<usize>,
}

/// Photon number when both a calibration and a drive power are known. The
/// trace's own line attenuation, when set, replaces the configured one.
pub fn photon_number(fit: &ResonanceFit, trace: &ComplexTrace, cal: Option<&LineCalibration>) -> Result<Option<f64>, CliError> {
    let (Some(cal), Some(dbm)) = (cal, trace.drive_power_dbm()) else {
        return Ok(None);
    };
    let mut cal = *cal;
    if trace.line_attenuation_db() > 0.0 {
        cal.line_attenuation_db = trace.line_attenuation_db();
    }
    Ok(Some(mean_photon_number(fit, &cal, dbm)?))
}

pub fn run(args: &Args, ctx: &Context, report: &mut Report) -> Result<(), CliError> {
    report.add_input(&args.trace)?;
    let sidecar = sidecar_path(&args.trace);
    if sidecar.exists() {
        report.add_input(&sidecar)?;
    }
    let mut trace = load_trace(&args.trace)?;
    if let Some(p) = args.power_dbm {
        trace = trace.with_drive_power(p);
    }
    let opts = ctx.config.fit_options(args.max_iterations)?;
    let fit = match fit_trace_with(&trace, &opts) {
        Ok(f) => f,
        Err(Error::FitDiverged { iterations, last }) => {
            report.push("fit_diverged", merge(json!({ "label": trace.label }), fit_fields(&last)));
            return Err(CliError::Fit(format!("fit diverged after {iterations} iterations")));
        }
        Err(e) => return Err(e.into()),
    };
    let cal = ctx.config.calibration()?;
    let mut fields = merge(
        json!({
            "label": trace.label,
            "points_count": trace.len(),
            "drive_power_dbm": trace.drive_power_dbm(),
        }),
        fit_fields(&fit),
    );
    if let Some(n) = photon_number(&fit, &trace, cal.as_ref())? {
        fields = merge(fields, json!({ "mean_photon_number_dimensionless": n }));
    }
    report.push("fit", fields);
    Ok(())
}
