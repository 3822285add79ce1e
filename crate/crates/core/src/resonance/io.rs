//! Trace files.
//!
//! The primary format is a CSV with header `frequency_hz,s21_real,s21_imag`.
//! A magnitude/phase CSV with header `frequency_hz,s21_db,s21_phase_deg`
//! is converted on load. Optional sidecar metadata (`key = value` lines)
//! supplies `drive_power_dbm`, `line_attenuation_db` and `label`.

use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use num_complex::Complex64;

use super::ComplexTrace;
use crate::error::{Error, Result};
use crate::kv::KvDocument;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Columns {
    ReIm,
    DbDeg,
}

/// Reads a trace CSV. Line numbers in errors are 1-based file lines.
pub fn read_trace_csv<R: Read>(reader: R) -> Result<ComplexTrace> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(reader);
    let headers = rdr
        .headers()
        .map_err(|e| Error::parse(csv_line(&e).unwrap_or(1), e.to_string()))?
        .clone();
    let names: Vec<&str> = headers.iter().collect();
    let columns = match names.as_slice() {
        [] | [""] => return Err(Error::parse(1, "empty trace file")),
        ["frequency_hz", "s21_real", "s21_imag"] => Columns::ReIm,
        ["frequency_hz", "s21_db", "s21_phase_deg"] => Columns::DbDeg,
        other => {
            return Err(Error::parse(
                1,
                format!(
                    "unexpected header {other:?}; expected frequency_hz,s21_real,s21_imag \
                     or frequency_hz,s21_db,s21_phase_deg"
                ),
            ))
        }
    };
    let mut f = Vec::new();
    let mut s = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(|e| Error::parse(csv_line(&e).unwrap_or(0), e.to_string()))?;
        let line = record.position().map(|p| p.line() as usize).unwrap_or(0);
        if record.len() != 3 {
            return Err(Error::parse(line, format!("expected 3 fields, got {}", record.len())));
        }
        let mut vals = [0.0; 3];
        for (k, field) in record.iter().enumerate() {
            vals[k] = field
                .parse()
                .map_err(|_| Error::parse(line, format!("cannot parse number `{field}`")))?;
        }
        f.push(vals[0]);
        s.push(match columns {
            Columns::ReIm => Complex64::new(vals[1], vals[2]),
            Columns::DbDeg => {
                Complex64::from_polar(10f64.powf(vals[1] / 20.0), vals[2].to_radians())
            }
        });
    }
    if f.is_empty() {
        return Err(Error::parse(1, "trace file has no data rows"));
    }
    ComplexTrace::new(f, s)
}

fn csv_line(e: &csv::Error) -> Option<usize> {
    e.position().map(|p| p.line() as usize)
}

/// Sidecar metadata path for a trace: `<stem>.meta` beside the CSV.
pub fn sidecar_path(trace_path: &Path) -> PathBuf {
    trace_path.with_extension("meta")
}

/// Reads a trace and, if present, its sidecar metadata.
pub fn load_trace(path: impl AsRef<Path>) -> Result<ComplexTrace> {
    let path = path.as_ref();
    let mut trace = read_trace_csv(std::fs::File::open(path)?)?;
    if trace.label.is_empty() {
        trace.label = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
    }
    let meta = sidecar_path(path);
    if meta.exists() {
        trace = apply_metadata(trace, &KvDocument::read(&meta)?)?;
    }
    Ok(trace)
}

/// Applies `drive_power_dbm`, `line_attenuation_db` and `label` keys from
/// the unnamed section of a metadata document.
pub fn apply_metadata(mut trace: ComplexTrace, doc: &KvDocument) -> Result<ComplexTrace> {
    if let Some(p) = doc.parse_opt::<f64>("", "drive_power_dbm")? {
        trace = trace.with_drive_power(p);
    }
    if let Some(a) = doc.parse_opt::<f64>("", "line_attenuation_db")? {
        trace = trace.with_line_attenuation(a)?;
    }
    if let Some(e) = doc.get("", "label") {
        trace.label = e.value.clone();
    }
    Ok(trace)
}

pub fn write_trace_csv<W: Write>(trace: &ComplexTrace, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let io = |e: csv::Error| Error::Io(std::io::Error::other(e));
    w.write_record(["frequency_hz", "s21_real", "s21_imag"]).map_err(io)?;
    for (f, s) in trace.frequencies().iter().zip(trace.s21()) {
        w.write_record([f.to_string(), s.re.to_string(), s.im.to_string()])
            .map_err(io)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_metadata<W: Write>(trace: &ComplexTrace, mut writer: W) -> Result<()> {
    if let Some(p) = trace.drive_power_dbm() {
        writeln!(writer, "drive_power_dbm = {p}")?;
    }
    writeln!(writer, "line_attenuation_db = {}", trace.line_attenuation_db())?;
    if !trace.label.is_empty() {
        writeln!(writer, "label = {}", trace.label)?;
    }
    Ok(())
}
