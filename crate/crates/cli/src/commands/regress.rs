use std::fs::File;
use std::path::PathBuf;

use serde_json::json;
use tlsloss::lossmodel::{fit_loss_per_site, read_site_points};

use crate::error::CliError;
use crate::report::Report;
use crate::Context;

#[derive(clap::Args, Debug)]
pub struct Args {
    /// CSV with header `n_sites,inverse_qi[,sigma]`.
    pub csv: PathBuf,
}

pub fn run(args: &Args, _ctx: &Context, report: &mut Report) -> Result<(), CliError> {
    report.add_input(&args.csv)?;
    let file = File::open(&args.csv).map_err(|e| CliError::Input(format!("{}: {e}", args.csv.display())))?;
    let points = read_site_points(file)?;
    let fit = fit_loss_per_site(&points)?;
    report.push(
        "site_regression",
        json!({
            "slope_per_site_dimensionless": fit.slope,
            "slope_stderr_per_site_dimensionless": fit.slope_stderr,
            "intercept_dimensionless": fit.intercept,
            "intercept_stderr_dimensionless": fit.intercept_stderr,
            "r_squared_dimensionless": fit.r_squared,
            "points_count": fit.n_points,
            "weighted": fit.weighted,
        }),
    );
    Ok(())
}
