use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde_json::json;
use tlsloss::kv::KvDocument;
use tlsloss::resonance::io::{apply_metadata, read_trace_csv, sidecar_path};
use tlsloss::resonance::{fit_trace_with, ComplexTrace, ResonanceFit};

use super::fit::photon_number;
use super::{fit_fields, merge};
use crate::error::CliError;
use crate::plot::{log_log_scatter, Point};
use crate::report::Report;
use crate::Context;

/// Points below this mean photon number form the single-photon plateau.
pub const SINGLE_PHOTON_CUTOFF: f64 = 10.0;

#[derive(clap::Args, Debug)]
pub struct Args {
    /// Directory of `*.csv` traces, each with a `<stem>.meta` sidecar giving `drive_power_dbm`.
    pub dir: PathBuf,

    /// Qi-versus-photon-number CSV (default: next to `--out`, else `qi_vs_photon_number.csv`).
    #[arg(long)]
    pub curve: Option<PathBuf>,

    /// Iteration cap for each fit.
    #[arg(long)]
    pub max_iterations: Option<usize>,
}

struct Loaded {
    file: String,
    trace: ComplexTrace,
    declared_label: Option<String>,
}

struct Row {
    file: String,
    label: String,
    power_dbm: Option<f64>,
    outcome: Result<(ResonanceFit, Option<f64>), String>,
}

fn load(path: &Path) -> Result<Loaded, String> {
    let file = fs::File::open(path).map_err(|e| e.to_string())?;
    let mut trace = read_trace_csv(file).map_err(|e| e.to_string())?;
    let meta = sidecar_path(path);
    if !meta.exists() {
        return Err(format!("missing metadata sidecar {}", meta.display()));
    }
    let doc = KvDocument::read(&meta).map_err(|e| format!("{}: {e}", meta.display()))?;
    let declared_label = doc.get("", "label").map(|e| e.value.clone());
    trace = apply_metadata(trace, &doc).map_err(|e| format!("{}: {e}", meta.display()))?;
    if trace.drive_power_dbm().is_none() {
        return Err(format!("{}: no drive_power_dbm", meta.display()));
    }
    Ok(Loaded {
        file: file_name(path),
        trace,
        declared_label,
    })
}

fn file_name(path: &Path) -> String {
    path.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
}

fn curve_path(args: &Args, ctx: &Context) -> PathBuf {
    match (&args.curve, &ctx.out) {
        (Some(p), _) => p.clone(),
        (None, Some(out)) => out.with_extension("curve.csv"),
        (None, None) => PathBuf::from("qi_vs_photon_number.csv"),
    }
}

pub fn run(args: &Args, ctx: &Context, report: &mut Report) -> Result<(), CliError> {
    let mut paths: Vec<PathBuf> = fs::read_dir(&args.dir)
        .map_err(|e| CliError::Input(format!("{}: {e}", args.dir.display())))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "csv"))
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(CliError::Input(format!("no *.csv traces in {}", args.dir.display())));
    }
    for p in &paths {
        report.add_input(p)?;
        let meta = sidecar_path(p);
        if meta.exists() {
            report.add_input(&meta)?;
        }
    }
    let cal = ctx.config.calibration()?;
    if cal.is_none() {
        report.warn("no [calibration] section in the configuration; photon numbers are not computed");
    }
    let opts = ctx.config.fit_options(args.max_iterations)?;

    let mut loaded = Vec::new();
    let mut rows = Vec::new();
    for p in &paths {
        match load(p) {
            Ok(l) => loaded.push(l),
            Err(msg) => rows.push(Row {
                file: file_name(p),
                label: String::new(),
                power_dbm: None,
                outcome: Err(msg),
            }),
        }
    }
    let labels: BTreeSet<&str> = loaded.iter().filter_map(|l| l.declared_label.as_deref()).collect();
    if labels.len() > 1 {
        return Err(CliError::Input(format!(
            "sweep mixes resonators: labels {labels:?}"
        )));
    }
    let mut powers: Vec<f64> = loaded.iter().filter_map(|l| l.trace.drive_power_dbm()).collect();
    powers.sort_by(f64::total_cmp);
    if let Some(w) = powers.windows(2).find(|w| w[0] == w[1]) {
        return Err(CliError::Input(format!("drive power {} dBm appears twice", w[0])));
    }

    let fitted: Vec<Row> = loaded
        .par_iter()
        .map(|l| {
            let outcome = fit_trace_with(&l.trace, &opts)
                .map_err(|e| e.to_string())
                .and_then(|fit| {
                    let n = photon_number(&fit, &l.trace, cal.as_ref()).map_err(|e| e.to_string())?;
                    Ok((fit, n))
                });
            Row {
                file: l.file.clone(),
                label: l.trace.label.clone(),
                power_dbm: l.trace.drive_power_dbm(),
                outcome,
            }
        })
        .collect();
    rows.extend(fitted);
    rows.sort_by(|a, b| match (a.power_dbm, b.power_dbm) {
        (Some(x), Some(y)) => x.total_cmp(&y),
        (Some(_), None) => std::cmp::Ordering::Less,
        (None, Some(_)) => std::cmp::Ordering::Greater,
        (None, None) => a.file.cmp(&b.file),
    });

    let mut curve: Vec<(f64, Option<f64>, &ResonanceFit)> = Vec::new();
    let mut failed = 0;
    for row in &rows {
        let base = json!({ "file": row.file, "label": row.label, "drive_power_dbm": row.power_dbm });
        match &row.outcome {
            Ok((fit, n)) => {
                let mut fields = merge(merge(base, json!({ "status": "ok" })), fit_fields(fit));
                if let Some(n) = n {
                    fields = merge(fields, json!({ "mean_photon_number_dimensionless": n }));
                }
                report.push("sweep_point", fields);
                curve.push((row.power_dbm.expect("loaded traces carry a power"), *n, fit));
            }
            Err(msg) => {
                failed += 1;
                report.warn(format!("{}: {msg}", row.file));
                report.push("sweep_point", merge(base, json!({ "status": "failed", "error": msg })));
            }
        }
    }

    let curve_file = curve_path(args, ctx);
    write_curve(&curve_file, &curve)?;
    let plateau: Vec<f64> = curve
        .iter()
        .filter(|(_, n, _)| n.is_some_and(|n| n < SINGLE_PHOTON_CUTOFF))
        .map(|(_, _, f)| f.qi)
        .collect();
    let qi_single_photon = (!plateau.is_empty()).then(|| plateau.iter().sum::<f64>() / plateau.len() as f64);
    if qi_single_photon.is_none() && cal.is_some() {
        report.warn(format!("no point below {SINGLE_PHOTON_CUTOFF} photons; qi_single_photon not reported"));
    }
    let mut plot_file = None;
    if ctx.plot {
        let points: Vec<Point> = curve
            .iter()
            .filter_map(|(_, n, f)| n.map(|n| Point { x: n, y: f.qi, y_err: f.qi_stderr() }))
            .collect();
        if points.is_empty() {
            report.warn("nothing to plot without photon numbers");
        } else {
            let path = curve_file.with_extension("svg");
            fs::write(&path, log_log_scatter(&points, "mean photon number", "internal quality factor Qi"))?;
            plot_file = Some(path.display().to_string());
        }
    }
    report.push(
        "sweep_summary",
        json!({
            "traces_count": rows.len(),
            "failed_count": failed,
            "qi_single_photon_dimensionless": qi_single_photon,
            "plateau_points_count": plateau.len(),
            "single_photon_cutoff_dimensionless": SINGLE_PHOTON_CUTOFF,
            "curve_csv": curve_file.display().to_string(),
            "plot_svg": plot_file,
        }),
    );
    Ok(())
}

fn write_curve(path: &Path, curve: &[(f64, Option<f64>, &ResonanceFit)]) -> Result<(), CliError> {
    let mut text = String::from(
        "drive_power_dbm,mean_photon_number_dimensionless,qi_dimensionless,qi_stderr_dimensionless,qc_star_dimensionless,f0_hz\n",
    );
    for (p, n, f) in curve {
        let n = n.map(|n| n.to_string()).unwrap_or_default();
        text.push_str(&format!("{p},{n},{},{},{},{}\n", f.qi, f.qi_stderr(), f.qc_star, f.f0));
    }
    fs::write(path, text).map_err(|e| CliError::Input(format!("cannot write {}: {e}", path.display())))
}
