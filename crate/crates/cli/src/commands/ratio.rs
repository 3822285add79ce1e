use serde_json::json;
use tlsloss::lossmodel::{participation_equivalence, qubit_sensitivity_factor, voltage_ratio_squared};

use crate::error::CliError;
use crate::report::Report;
use crate::Context;

#[derive(clap::Args, Debug)]
pub struct Args {
    /// Qubit electrode length, m.
    #[arg(long)]
    pub l_qubit_m: Option<f64>,

    /// Resonator length, m.
    #[arg(long)]
    pub l_resonator_m: Option<f64>,

    /// Lift-off sites on the resonator.
    #[arg(long)]
    pub sites: Option<u32>,

    /// Electrodes on the qubit.
    #[arg(long)]
    pub electrodes: Option<u32>,
}

pub fn run(args: &Args, ctx: &Context, report: &mut Report) -> Result<(), CliError> {
    let c = &ctx.config;
    let l_q = c.pick(args.l_qubit_m, "ratio", "l_qubit_m", 640e-6)?;
    let l_r = c.pick(args.l_resonator_m, "ratio", "l_resonator_m", 5000e-6)?;
    let sites = c.pick(args.sites, "ratio", "n_sites", 4)?;
    let electrodes = c.pick(args.electrodes, "ratio", "n_qubit_electrodes", 2)?;
    let caps = c.capacitances()?;
    let capacitances: serde_json::Map<String, serde_json::Value> =
        caps.iter().map(|(k, v)| (format!("{k}_f"), json!(v))).collect();
    report.push(
        "ratio",
        json!({
            "l_qubit_m": l_q,
            "l_resonator_m": l_r,
            "voltage_ratio_squared_dimensionless": voltage_ratio_squared(l_q, l_r)?,
            "qubit_sensitivity_factor_dimensionless": qubit_sensitivity_factor(l_q, l_r)?,
            "sites_count": sites,
            "qubit_electrodes_count": electrodes,
            "participation_equivalence_dimensionless": participation_equivalence(sites, &caps, electrodes)?,
            "capacitances": capacitances,
        }),
    );
    Ok(())
}
