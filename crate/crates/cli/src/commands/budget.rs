use std::path::PathBuf;

use serde_json::json;
use tlsloss::lossmodel::{read_budget, total_quality};

use crate::error::CliError;
use crate::report::Report;
use crate::Context;

#[derive(clap::Args, Debug)]
pub struct Args {
    /// Budget file: `[background] q0` plus `[channel.<label>]` sections with
    /// `participation` and `loss_tangent`.
    pub budget: PathBuf,
}

pub fn run(args: &Args, _ctx: &Context, report: &mut Report) -> Result<(), CliError> {
    report.add_input(&args.budget)?;
    let budget = read_budget(&args.budget)?;
    report.push(
        "budget",
        json!({
            "q0_dimensionless": budget.q0,
            "total_quality_dimensionless": total_quality(&budget),
            "channel_loss_dimensionless": budget.channel_loss(),
            "channels_count": budget.channels.len(),
        }),
    );
    for c in budget.contributions() {
        let ch = budget
            .channels
            .iter()
            .find(|ch| ch.label == c.label)
            .expect("contribution labels come from the budget");
        report.push(
            "contribution",
            json!({
                "label": c.label,
                "participation_dimensionless": ch.participation,
                "loss_tangent_dimensionless": ch.loss_tangent,
                "inverse_q_dimensionless": c.inverse_q,
                "fraction_of_channel_loss_dimensionless": c.fraction_of_channel_loss,
            }),
        );
    }
    Ok(())
}
