//! Budget files and regression CSVs.
//!
//! Budget file:
//!
//! ```text
//! [background]
//! q0 = 2.5e6
//! [channel.junction_region]
//! participation = 9.5e-4
//! loss_tangent = 7e-3
//! ```
//!
//! Regression CSV: header `n_sites,inverse_qi,sigma`; the sigma column may
//! be omitted or left empty on every row.

use std::io::Read;
use std::path::Path;

use super::{LossBudget, LossChannel, SitePoint};
use crate::error::{Error, Result};
use crate::kv::KvDocument;

pub fn budget_from_kv(doc: &KvDocument) -> Result<LossBudget> {
    if !doc.has_section("background") {
        return Err(Error::Config("missing [background] section".into()));
    }
    let q0: f64 = doc.parse_req("background", "q0")?;
    let mut channels = Vec::new();
    for section in doc.sections() {
        match section.strip_prefix("channel.") {
            Some(label) if !label.is_empty() => {
                channels.push(LossChannel::new(
                    label,
                    doc.parse_req(section, "participation")?,
                    doc.parse_req(section, "loss_tangent")?,
                )?);
            }
            Some(_) => return Err(Error::Config("empty channel label".into())),
            None if section == "background" => {}
            None => return Err(Error::Config(format!("unknown section [{section}]"))),
        }
    }
    LossBudget::new(q0, channels)
}

pub fn read_budget(path: impl AsRef<Path>) -> Result<LossBudget> {
    budget_from_kv(&KvDocument::read(path)?)
}

pub fn read_site_points<R: Read>(reader: R) -> Result<Vec<SitePoint>> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .flexible(true)
        .from_reader(reader);
    let headers = rdr
        .headers()
        .map_err(|e| Error::parse(1, e.to_string()))?
        .clone();
    let names: Vec<&str> = headers.iter().collect();
    match names.as_slice() {
        ["n_sites", "inverse_qi"] | ["n_sites", "inverse_qi", "sigma"] => {}
        other => {
            return Err(Error::parse(
                1,
                format!("unexpected header {other:?}; expected n_sites,inverse_qi,sigma"),
            ))
        }
    }
    let mut out = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(|e| {
            Error::parse(e.position().map_or(0, |p| p.line() as usize), e.to_string())
        })?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        let field = |k: usize| record.get(k).unwrap_or("");
        let n_sites = field(0)
            .parse::<u32>()
            .map_err(|_| Error::parse(line, format!("n_sites `{}` is not a count", field(0))))?;
        let inverse_qi = field(1)
            .parse::<f64>()
            .map_err(|_| Error::parse(line, format!("cannot parse inverse_qi `{}`", field(1))))?;
        let sigma = match field(2) {
            "" => None,
            s => Some(
                s.parse::<f64>()
                    .map_err(|_| Error::parse(line, format!("cannot parse sigma `{s}`")))?,
            ),
        };
        out.push(SitePoint::new(n_sites, inverse_qi, sigma));
    }
    Ok(out)
}
