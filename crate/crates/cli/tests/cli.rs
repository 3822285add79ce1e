use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use serde_json::Value;

struct Run {
    code: i32,
    stdout: String,
    stderr: String,
}

impl Run {
    fn records(&self) -> Vec<Value> {
        parse_records(&self.stdout)
    }
}

fn parse_records(text: &str) -> Vec<Value> {
    text.lines().map(|l| serde_json::from_str(l).expect("JSON record")).collect()
}

fn tlsloss(args: &[&str]) -> Run {
    let out = Command::new(env!("CARGO_BIN_EXE_tlsloss"))
        .args(args)
        .output()
        .expect("binary runs");
    Run {
        code: out.status.code().unwrap_or(-1),
        stdout: String::from_utf8(out.stdout).unwrap(),
        stderr: String::from_utf8(out.stderr).unwrap(),
    }
}

fn data(name: &str) -> String {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../data")
        .join(name)
        .display()
        .to_string()
}

fn of_kind<'a>(records: &'a [Value], kind: &str) -> Vec<&'a Value> {
    records.iter().filter(|r| r["record"] == kind).collect()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn synth(dir: &Path, extra: &[&str]) {
    let mut args = vec!["synth", s(dir), "--noise", "1e-4", "--qi", "8e5", "--qc-star", "4e5"];
    args.extend_from_slice(extra);
    let r = tlsloss(&args);
    assert_eq!(r.code, 0, "{}", r.stderr);
}

#[test]
fn fit_synthetic_trace() {
    let dir = tempfile::tempdir().unwrap();
    let traces = dir.path().join("t");
    synth(&traces, &["--powers-dbm=-120"]);
    let trace = traces.join("resonator_p00.csv");
    let r = tlsloss(&["fit", s(&trace), "--config", &data("config.ini")]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let recs = r.records();
    assert_eq!(recs[0]["record"], "meta");
    assert_eq!(recs[0]["inputs"].as_array().unwrap().len(), 3);
    let fit = of_kind(&recs, "fit")[0];
    let qi = fit["qi_dimensionless"].as_f64().unwrap();
    assert!((qi / 8e5 - 1.0).abs() < 0.01, "qi {qi}");
    assert_eq!(fit["drive_power_dbm"], -120.0);
    assert!(fit["mean_photon_number_dimensionless"].as_f64().unwrap() > 0.0);
}

#[test]
fn out_flag_writes_file_and_keeps_stdout_empty() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("r.jsonl");
    let r = tlsloss(&["budget", &data("xmon_budget.ini"), "--out", s(&out)]);
    assert_eq!(r.code, 0);
    assert!(r.stdout.is_empty());
    let recs = parse_records(&fs::read_to_string(&out).unwrap());
    assert_eq!(of_kind(&recs, "budget").len(), 1);
}

#[test]
fn fit_error_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let empty = dir.path().join("empty.csv");
    fs::write(&empty, "").unwrap();
    assert_eq!(tlsloss(&["fit", s(&empty)]).code, 2);

    let flat = dir.path().join("flat.csv");
    let mut text = String::from("frequency_hz,s21_real,s21_imag\n");
    for k in 0..64 {
        text.push_str(&format!("{},1,0\n", 6e9 + k as f64 * 1e3));
    }
    fs::write(&flat, text).unwrap();
    assert_eq!(tlsloss(&["fit", s(&flat)]).code, 3);

    assert_eq!(tlsloss(&["fit", "/nonexistent/trace.csv"]).code, 2);
}

#[test]
fn sweep_recovers_flat_curve_in_power_order() {
    let dir = tempfile::tempdir().unwrap();
    let traces = dir.path().join("t");
    synth(&traces, &[]);
    let out = dir.path().join("r.jsonl");
    let r = tlsloss(&["sweep", s(&traces), "--config", &data("config.ini"), "--out", s(&out), "--plot"]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let recs = parse_records(&fs::read_to_string(&out).unwrap());
    let points = of_kind(&recs, "sweep_point");
    assert_eq!(points.len(), 6);
    let powers: Vec<f64> = points.iter().map(|p| p["drive_power_dbm"].as_f64().unwrap()).collect();
    assert!(powers.windows(2).all(|w| w[0] < w[1]));
    for p in &points {
        let qi = p["qi_dimensionless"].as_f64().unwrap();
        assert!((qi / 8e5 - 1.0).abs() < 0.01, "qi {qi}");
    }
    let summary = of_kind(&recs, "sweep_summary")[0];
    let plateau = summary["qi_single_photon_dimensionless"].as_f64().unwrap();
    assert!((plateau / 8e5 - 1.0).abs() < 0.01);
    assert!(summary["plateau_points_count"].as_u64().unwrap() >= 1);
    let svg = fs::read_to_string(dir.path().join("r.curve.svg")).unwrap();
    assert_eq!(svg.matches("<circle").count(), 6);

    // Re-reading the curve gives back the reported numbers exactly.
    let curve = fs::read_to_string(dir.path().join("r.curve.csv")).unwrap();
    let mut lines = curve.lines();
    assert_eq!(
        lines.next().unwrap(),
        "drive_power_dbm,mean_photon_number_dimensionless,qi_dimensionless,qi_stderr_dimensionless,qc_star_dimensionless,f0_hz"
    );
    for (line, p) in lines.zip(&points) {
        let v: Vec<f64> = line.split(',').map(|x| x.parse().unwrap()).collect();
        assert_eq!(v[0], p["drive_power_dbm"].as_f64().unwrap());
        assert_eq!(v[1], p["mean_photon_number_dimensionless"].as_f64().unwrap());
        assert_eq!(v[2], p["qi_dimensionless"].as_f64().unwrap());
        assert_eq!(v[3], p["qi_stderr_dimensionless"].as_f64().unwrap());
        assert_eq!(v[4], p["qc_star_dimensionless"].as_f64().unwrap());
        assert_eq!(v[5], p["f0_hz"].as_f64().unwrap());
    }
}

#[test]
fn sweep_output_independent_of_thread_count() {
    let dir = tempfile::tempdir().unwrap();
    let traces = dir.path().join("t");
    synth(&traces, &["--seed", "11"]);
    let run = |threads: &str, name: &str| {
        let curve = dir.path().join(format!("{name}.csv"));
        let r = tlsloss(&["sweep", s(&traces), "--threads", threads, "--curve", s(&curve)]);
        assert_eq!(r.code, 0, "{}", r.stderr);
        let text = r.stdout.replace(s(&curve), "CURVE");
        (text, fs::read_to_string(&curve).unwrap())
    };
    assert_eq!(run("1", "a"), run("4", "b"));
}

#[test]
fn sweep_flags_corrupt_trace_and_continues() {
    let dir = tempfile::tempdir().unwrap();
    let traces = dir.path().join("t");
    synth(&traces, &[]);
    fs::write(traces.join("resonator_p02.csv"), "frequency_hz,s21_real,s21_imag\n1,banana,0\n").unwrap();
    let curve = dir.path().join("c.csv");
    let r = tlsloss(&["sweep", s(&traces), "--curve", s(&curve)]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let recs = r.records();
    let points = of_kind(&recs, "sweep_point");
    let ok = points.iter().filter(|p| p["status"] == "ok").count();
    let failed: Vec<_> = points.iter().filter(|p| p["status"] == "failed").collect();
    assert_eq!((ok, failed.len()), (5, 1));
    assert_eq!(failed[0]["file"], "resonator_p02.csv");
    assert!(of_kind(&recs, "warning").iter().any(|w| w["message"].as_str().unwrap().contains("p02")));
    assert!(r.stderr.contains("warning"));
    assert_eq!(fs::read_to_string(&curve).unwrap().lines().count(), 6);
}

#[test]
fn sweep_rejects_duplicate_powers_and_mixed_resonators() {
    let dir = tempfile::tempdir().unwrap();
    let traces = dir.path().join("t");
    synth(&traces, &["--powers-dbm=-100,-90,-80"]);
    let meta = traces.join("resonator_p01.meta");
    let original = fs::read_to_string(&meta).unwrap();
    fs::write(&meta, original.replace("-90", "-100")).unwrap();
    let curve = dir.path().join("c.csv");
    assert_eq!(tlsloss(&["sweep", s(&traces), "--curve", s(&curve)]).code, 2);
    fs::write(&meta, original.replace("label = resonator", "label = other")).unwrap();
    assert_eq!(tlsloss(&["sweep", s(&traces), "--curve", s(&curve)]).code, 2);
}

#[test]
fn synth_is_seeded() {
    let dir = tempfile::tempdir().unwrap();
    let read = |sub: &str| fs::read_to_string(dir.path().join(sub).join("resonator_p00.csv")).unwrap();
    synth(&dir.path().join("a"), &["--seed", "5"]);
    synth(&dir.path().join("b"), &["--seed", "5"]);
    synth(&dir.path().join("c"), &["--seed", "6"]);
    assert_eq!(read("a"), read("b"));
    assert_ne!(read("a"), read("c"));
}

#[test]
fn regress_sites() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("sites.csv");
    let mut text = String::from("n_sites,inverse_qi\n");
    for n in [0u32, 1, 3, 7] {
        text.push_str(&format!("{n},{}\n", 4e-7 + 7.91e-7 * n as f64));
    }
    fs::write(&csv, text).unwrap();
    let r = tlsloss(&["regress-sites", s(&csv)]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let fit = &r.records()[1];
    assert!((fit["slope_per_site_dimensionless"].as_f64().unwrap() / 7.91e-7 - 1.0).abs() < 1e-9);
    assert_eq!(fit["r_squared_dimensionless"], 1.0);

    fs::write(&csv, "n_sites,inverse_qi\n3,1e-6\n3,2e-6\n3,3e-6\n").unwrap();
    assert_eq!(tlsloss(&["regress-sites", s(&csv)]).code, 2);
    fs::write(&csv, "n_sites,inverse_qi\n0,1e-6\n7,2e-6\n7,3e-6\n").unwrap();
    assert_eq!(tlsloss(&["regress-sites", s(&csv)]).code, 2);
}

#[test]
fn participation_default_cpw() {
    let dir = tempfile::tempdir().unwrap();
    let text = dir.path().join("p.txt");
    let dump = dir.path().join("f.csv");
    let r = tlsloss(&[
        "participation",
        &data("cpw_default.geom"),
        "--report",
        s(&text),
        "--field-dump",
        s(&dump),
    ]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let recs = r.records();
    let set = of_kind(&recs, "participation")[0];
    for key in ["p_sm_dimensionless", "p_sv_dimensionless", "p_mv_dimensionless"] {
        let p = set[key].as_f64().unwrap();
        assert!(p > 0.0 && p < 0.01, "{key} = {p}");
    }
    assert!(set["error_estimate_dimensionless"].as_f64().unwrap() < 0.01);
    assert!(of_kind(&recs, "refinement_step").len() >= 2);
    assert_eq!(of_kind(&recs, "conductor_participation").len(), 3);
    assert!(fs::read_to_string(&text).unwrap().starts_with("[participation]"));
    assert!(fs::read_to_string(&dump).unwrap().starts_with("x_m,y_m,potential_v"));
}

#[test]
fn participation_parallel_plate_file() {
    let r = tlsloss(&["participation", &data("parallel_plate.geom")]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let p = of_kind(&r.records(), "participation")[0]["p_sm_dimensionless"].as_f64().unwrap();
    let oracle = (30e-9 / 11.6) / (10e-6 / 11.6 + 10e-6);
    assert!((p / oracle - 1.0).abs() < 0.01, "{p} vs {oracle}");
}

#[test]
fn participation_exit_codes() {
    let geom = data("cpw_default.geom");
    assert_eq!(tlsloss(&["participation", &geom, "--tolerance", "0.5"]).code, 2);
    let r = tlsloss(&["participation", &geom, "--tolerance", "1e-6", "--max-unknowns", "100000"]);
    assert_eq!(r.code, 4);
    assert_eq!(of_kind(&r.records(), "refinement_step").len(), 1);
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.geom");
    fs::write(&bad, "[cpw]\nw_m = 1e-5\ncolour = red\n").unwrap();
    assert_eq!(tlsloss(&["participation", s(&bad)]).code, 2);
}

fn budget_file(dir: &Path, text: &str) -> PathBuf {
    let p = dir.join("b.ini");
    fs::write(&p, text).unwrap();
    p
}

#[test]
fn budget_cases() {
    let dir = tempfile::tempdir().unwrap();
    let empty = budget_file(dir.path(), "[background]\nq0 = 2.5e6\n");
    let r = tlsloss(&["budget", s(&empty)]);
    assert_eq!(r.records()[1]["total_quality_dimensionless"], 2.5e6);

    let twin = budget_file(
        dir.path(),
        "[background]\nq0 = 1e6\n[channel.a]\nparticipation = 1e-3\nloss_tangent = 1e-3\n\
         [channel.b]\nparticipation = 1e-3\nloss_tangent = 1e-3\n",
    );
    let recs = tlsloss(&["budget", s(&twin)]).records();
    for c in of_kind(&recs, "contribution") {
        assert_eq!(c["fraction_of_channel_loss_dimensionless"], 0.5);
    }

    let sorted = budget_file(
        dir.path(),
        "[background]\nq0 = 1e6\n[channel.small]\nparticipation = 1e-4\nloss_tangent = 1e-3\n\
         [channel.big]\nparticipation = 1e-3\nloss_tangent = 1e-3\n",
    );
    let recs = tlsloss(&["budget", s(&sorted)]).records();
    let labels: Vec<_> = of_kind(&recs, "contribution").iter().map(|c| c["label"].clone()).collect();
    assert_eq!(labels, ["big", "small"]);

    let malformed = budget_file(dir.path(), "[background]\nq0 = lots\n");
    assert_eq!(tlsloss(&["budget", s(&malformed)]).code, 2);
}

#[test]
fn ratio_defaults_and_precedence() {
    let r = tlsloss(&["ratio"]);
    let rec = &r.records()[1];
    assert_eq!(rec["voltage_ratio_squared_dimensionless"], 0.256);
    assert_eq!(rec["qubit_sensitivity_factor_dimensionless"], 3.90625);
    let eq = rec["participation_equivalence_dimensionless"].as_f64().unwrap();
    assert!((eq - 1.02).abs() < 0.01);

    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.ini");
    fs::write(&cfg, "[ratio]\nl_qubit_m = 1250e-6\nn_sites = 8\n").unwrap();
    let rec = &tlsloss(&["ratio", "--config", s(&cfg)]).records()[1];
    assert_eq!(rec["voltage_ratio_squared_dimensionless"], 0.5);
    assert_eq!(rec["sites_count"], 8);
    let rec = &tlsloss(&["ratio", "--config", s(&cfg), "--l-qubit-m", "2500e-6"]).records()[1];
    assert_eq!(rec["voltage_ratio_squared_dimensionless"], 1.0);
}

#[test]
fn bad_config_is_an_input_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.ini");
    fs::write(&cfg, "[mystery]\nx = 1\n").unwrap();
    assert_eq!(tlsloss(&["ratio", "--config", s(&cfg)]).code, 2);
    assert_eq!(tlsloss(&["ratio", "--threads", "0"]).code, 2);
}

#[test]
fn reports_are_deterministic() {
    let a = tlsloss(&["participation", &data("parallel_plate.geom")]);
    let b = tlsloss(&["participation", &data("parallel_plate.geom")]);
    assert_eq!(a.stdout, b.stdout);
}
