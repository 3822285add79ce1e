use std::fs::{self, File};
use std::io::BufWriter;
use std::path::PathBuf;

use serde_json::json;
use tlsloss::resonance::io::{sidecar_path, write_metadata, write_trace_csv};
use tlsloss::resonance::{linewidth_grid, synthesize_trace, ResonanceFit};

use crate::error::CliError;
use crate::report::Report;
use crate::Context;

#[derive(clap::Args, Debug)]
pub struct Args {
    /// Directory to write `<label>_pNN.csv` traces and their sidecars into.
    pub dir: PathBuf,

    #[arg(long, default_value_t = 6e9)]
    pub f0_hz: f64,

    #[arg(long, default_value_t = 1e6)]
    pub qi: f64,

    #[arg(long, default_value_t = 5e5)]
    pub qc_star: f64,

    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub phi_rad: f64,

    /// Drive powers at the instrument, dBm.
    #[arg(
        long,
        value_delimiter = ',',
        allow_negative_numbers = true,
        default_value = "-100,-90,-80,-70,-60,-50"
    )]
    pub powers_dbm: Vec<f64>,

    /// Attenuation recorded in each sidecar, dB.
    #[arg(long, default_value_t = 0.0)]
    pub line_attenuation_db: f64,

    /// Complex noise standard deviation per quadrature.
    #[arg(long, default_value_t = 1e-3)]
    pub noise: f64,

    #[arg(long, default_value_t = 401)]
    pub points: usize,

    /// Half-span of the frequency grid in linewidths.
    #[arg(long, default_value_t = 5.0)]
    pub span_linewidths: f64,

    #[arg(long, default_value_t = 1.0)]
    pub env_amplitude: f64,

    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub env_phase_rad: f64,

    #[arg(long, default_value_t = 0.0)]
    pub env_delay_s: f64,

    #[arg(long, default_value = "resonator")]
    pub label: String,
}

pub fn run(args: &Args, ctx: &Context, report: &mut Report) -> Result<(), CliError> {
    if args.points < 8 {
        return Err(CliError::Input(format!("at least 8 points are required, got {}", args.points)));
    }
    let params = ResonanceFit::ideal(args.f0_hz, args.qi, args.qc_star, args.phi_rad).with_environment(
        args.env_amplitude,
        args.env_phase_rad,
        args.env_delay_s,
    );
    params.validate()?;
    fs::create_dir_all(&args.dir)?;
    let freqs = linewidth_grid(&params, args.span_linewidths, args.points);
    for (k, &dbm) in args.powers_dbm.iter().enumerate() {
        let seed = ctx.seed.wrapping_add(k as u64);
        let trace = synthesize_trace(&params, &freqs, args.noise, seed)?
            .with_drive_power(dbm)
            .with_line_attenuation(args.line_attenuation_db)?
            .with_label(args.label.clone());
        let path = args.dir.join(format!("{}_p{k:02}.csv", args.label));
        write_trace_csv(&trace, BufWriter::new(File::create(&path)?))?;
        write_metadata(&trace, BufWriter::new(File::create(sidecar_path(&path))?))?;
        report.push(
            "synthetic_trace",
            json!({
                "file": path.display().to_string(),
                "drive_power_dbm": dbm,
                "seed": seed,
                "points_count": trace.len(),
            }),
        );
    }
    report.meta("parameters", json!({
        "f0_hz": args.f0_hz,
        "qi_dimensionless": args.qi,
        "qc_star_dimensionless": args.qc_star,
        "phi_rad": args.phi_rad,
        "noise_dimensionless": args.noise,
    }));
    Ok(())
}
