use std::fs::{self, File};
use std::io::BufWriter;
use std::path::PathBuf;

use serde_json::{json, Value};
use tlsloss::error::RefinementStep;
use tlsloss::fieldsolver::io::{format_report, read_geometry, write_field_dump};
use tlsloss::fieldsolver::{refine_with, RefineOptions};
use tlsloss::Error;

use crate::error::CliError;
use crate::report::Report;
use crate::Context;

#[derive(clap::Args, Debug)]
pub struct Args {
    /// Geometry file with a `[cpw]` or `[parallel_plate]` section.
    pub geometry: PathBuf,

    /// Stop refining once no participation changes by this fraction.
    #[arg(long)]
    pub tolerance: Option<f64>,

    /// Write potential and field at every node of the finest grid as CSV.
    #[arg(long)]
    pub field_dump: Option<PathBuf>,

    /// Give up rather than build a grid with more unknowns than this.
    #[arg(long, default_value_t = RefineOptions::default().max_unknowns)]
    pub max_unknowns: usize,

    /// Also write the participations as a `key = value` text report.
    #[arg(long)]
    pub report: Option<PathBuf>,
}

fn step_fields(s: &RefinementStep) -> Value {
    json!({
        "cells_per_gap_count": s.cells_per_gap,
        "unknowns_count": s.unknowns,
        "p_sm_dimensionless": s.p_sm,
        "p_sv_dimensionless": s.p_sv,
        "p_mv_dimensionless": s.p_mv,
        "max_relative_change_dimensionless": s.max_relative_change,
    })
}

pub fn run(args: &Args, ctx: &Context, report: &mut Report) -> Result<(), CliError> {
    report.add_input(&args.geometry)?;
    let tolerance = ctx.config.pick(args.tolerance, "participation", "tolerance", 0.01)?;
    let geom = read_geometry(&args.geometry)?;
    let refined = match refine_with(&geom, tolerance, &RefineOptions { max_unknowns: args.max_unknowns }) {
        Ok(r) => r,
        Err(Error::ConvergenceNotReached { trajectory }) => {
            for s in &trajectory.0 {
                report.push("refinement_step", step_fields(s));
            }
            return Err(CliError::Solver(format!(
                "mesh refinement did not reach tolerance {tolerance}"
            )));
        }
        Err(e) => return Err(e.into()),
    };
    for s in &refined.trajectory {
        report.push("refinement_step", step_fields(s));
    }
    let set = &refined.result;
    report.push(
        "participation",
        json!({
            "p_sm_dimensionless": set.p_sm,
            "p_sv_dimensionless": set.p_sv,
            "p_mv_dimensionless": set.p_mv,
            "p_total_dimensionless": set.total(),
            "cells_per_gap_count": set.cells_per_gap,
            "unknowns_count": set.unknowns,
            "error_estimate_dimensionless": set.error_estimate,
            "tolerance_dimensionless": tolerance,
            "capacitance_energy_f_per_m": set.capacitance_energy,
            "capacitance_charge_f_per_m": set.capacitance_charge,
        }),
    );
    for c in &set.by_conductor {
        report.push(
            "conductor_participation",
            json!({
                "label": c.label,
                "role": format!("{:?}", c.role).to_lowercase(),
                "p_sm_dimensionless": c.p_sm,
                "p_sv_dimensionless": c.p_sv,
                "p_mv_dimensionless": c.p_mv,
            }),
        );
    }
    if let Some(path) = &args.report {
        fs::write(path, format_report(set))?;
    }
    if let Some(path) = &args.field_dump {
        let file = File::create(path)?;
        write_field_dump(&refined.solution, BufWriter::new(file))?;
    }
    Ok(())
}
