//! Geometry files, participation reports and field dumps.

use std::fmt::Write as _;
use std::io::Write;
use std::path::Path;

use serde::Serialize;

use super::geometry::{
    CpwGeometry, CrossSection, Geometry, InterfaceKind, InterfaceLayer, Layers, ParallelPlate,
};
use super::grid::CellKind;
use super::participation::ParticipationSet;
use super::solve::FieldSolution;
use crate::error::{Error, Result};
use crate::kv::KvDocument;

/// Any structure a geometry file can describe.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum GeometrySpec {
    Cpw(CpwGeometry),
    ParallelPlate(ParallelPlate),
}

impl Geometry for GeometrySpec {
    fn cells_per_gap(&self) -> usize {
        match self {
            GeometrySpec::Cpw(g) => g.cells_per_gap(),
            GeometrySpec::ParallelPlate(g) => g.cells_per_gap(),
        }
    }

    fn with_cells_per_gap(&self, n: usize) -> Self {
        match self {
            GeometrySpec::Cpw(g) => GeometrySpec::Cpw(g.with_cells_per_gap(n)),
            GeometrySpec::ParallelPlate(g) => GeometrySpec::ParallelPlate(g.with_cells_per_gap(n)),
        }
    }

    fn cross_section(&self) -> Result<CrossSection> {
        match self {
            GeometrySpec::Cpw(g) => g.cross_section(),
            GeometrySpec::ParallelPlate(g) => g.cross_section(),
        }
    }
}

const LAYER_SECTIONS: [(&str, InterfaceKind); 3] = [
    ("layers.sm", InterfaceKind::SubstrateMetal),
    ("layers.sv", InterfaceKind::SubstrateVacuum),
    ("layers.mv", InterfaceKind::MetalVacuum),
];

fn check_keys(doc: &KvDocument, section: &str, allowed: &[&str]) -> Result<()> {
    for k in doc.keys(section) {
        if !allowed.contains(&k) {
            let line = doc.get(section, k).map_or(0, |e| e.line);
            return Err(Error::parse(line, format!("unknown key `{k}` in [{section}]")));
        }
    }
    Ok(())
}

/// Layers from `[layers.*]`; all default films when no such section exists.
fn layers_from_kv(doc: &KvDocument) -> Result<Layers> {
    if !LAYER_SECTIONS.iter().any(|(s, _)| doc.has_section(s)) {
        return Ok(Layers::default());
    }
    let mut layers = Layers::none();
    for (section, kind) in LAYER_SECTIONS {
        if doc.has_section(section) {
            check_keys(doc, section, &["thickness_m", "epsilon"])?;
            let layer = InterfaceLayer::new(
                doc.parse_req(section, "thickness_m")?,
                doc.parse_req(section, "epsilon")?,
            )?;
            layers.set(kind, Some(layer));
        }
    }
    Ok(layers)
}

pub fn geometry_from_kv(doc: &KvDocument) -> Result<GeometrySpec> {
    let known = ["cpw", "parallel_plate", "domain", "layers.sm", "layers.sv", "layers.mv"];
    for s in doc.sections() {
        if !known.contains(&s) {
            return Err(Error::Config(format!("unknown section [{s}]")));
        }
    }
    let layers = layers_from_kv(doc)?;
    check_keys(doc, "domain", &["half_width_m", "height_m", "cells_per_gap"])?;
    let cells: Option<usize> = doc.parse_opt("domain", "cells_per_gap")?;
    match (doc.has_section("cpw"), doc.has_section("parallel_plate")) {
        (true, false) => {
            check_keys(doc, "cpw", &["w_m", "g_m", "metal_thickness_m", "substrate_epsilon"])?;
            let mut g = CpwGeometry::new(doc.parse_req("cpw", "w_m")?, doc.parse_req("cpw", "g_m")?);
            if let Some(t) = doc.parse_opt("cpw", "metal_thickness_m")? {
                g.metal_thickness = t;
            }
            if let Some(e) = doc.parse_opt("cpw", "substrate_epsilon")? {
                g.substrate_epsilon = e;
            }
            if let Some(h) = doc.parse_opt("domain", "half_width_m")? {
                g.half_width = h;
            }
            if let Some(h) = doc.parse_opt("domain", "height_m")? {
                g.height = h;
            }
            if let Some(n) = cells {
                g.cells_per_gap = n;
            }
            g.layers = layers;
            g.validate()?;
            Ok(GeometrySpec::Cpw(g))
        }
        (false, true) => {
            const S: &str = "parallel_plate";
            check_keys(
                doc,
                S,
                &["width_m", "substrate_gap_m", "vacuum_gap_m", "substrate_epsilon", "plate_thickness_m"],
            )?;
            let mut g = ParallelPlate::new(
                doc.parse_req(S, "width_m")?,
                doc.parse_opt(S, "substrate_gap_m")?.unwrap_or(0.0),
                doc.parse_opt(S, "vacuum_gap_m")?.unwrap_or(0.0),
                doc.parse_opt(S, "substrate_epsilon")?.unwrap_or(1.0),
            );
            if let Some(t) = doc.parse_opt(S, "plate_thickness_m")? {
                g.plate_thickness = t;
            }
            if let Some(n) = cells {
                g.cells_per_gap = n;
            }
            g.layers = layers;
            g.cross_section()?;
            Ok(GeometrySpec::ParallelPlate(g))
        }
        (true, true) => Err(Error::Config("geometry file has both [cpw] and [parallel_plate]".into())),
        (false, false) => Err(Error::Config("geometry file needs a [cpw] or [parallel_plate] section".into())),
    }
}

pub fn read_geometry(path: impl AsRef<Path>) -> Result<GeometrySpec> {
    geometry_from_kv(&KvDocument::read(path)?)
}

/// Key-value text block describing a participation set.
pub fn format_report(set: &ParticipationSet) -> String {
    let mut s = String::from("[participation]\n");
    for kind in InterfaceKind::ALL {
        if let Some(p) = set.get(kind) {
            let _ = writeln!(s, "p_{} = {p:.6e}", kind.short_name());
        }
    }
    let _ = writeln!(s, "cells_per_gap = {}", set.cells_per_gap);
    let _ = writeln!(s, "unknowns = {}", set.unknowns);
    if let Some(e) = set.error_estimate {
        let _ = writeln!(s, "error_estimate = {e:.3e}");
    }
    let _ = writeln!(s, "capacitance_energy_f_per_m = {:.6e}", set.capacitance_energy);
    let _ = writeln!(s, "capacitance_charge_f_per_m = {:.6e}", set.capacitance_charge);
    for c in &set.by_conductor {
        let _ = writeln!(s, "\n[participation.{}]", c.label);
        for kind in InterfaceKind::ALL {
            if let Some(p) = c.get(kind) {
                let _ = writeln!(s, "p_{} = {p:.6e}", kind.short_name());
            }
        }
    }
    s
}

/// One row per cell: centre, interpolated potential, field and region.
pub fn write_field_dump<W: Write>(sol: &FieldSolution, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let csv_err = |e: csv::Error| Error::Io(std::io::Error::other(e));
    w.write_record(["x_m", "y_m", "potential_v", "ex_v_per_m", "ey_v_per_m", "region"])
        .map_err(csv_err)?;
    let g = &sol.grid;
    for j in 0..g.ny() - 1 {
        for i in 0..g.nx() - 1 {
            let xc = 0.5 * (g.xs[i] + g.xs[i + 1]);
            let yc = 0.5 * (g.ys[j] + g.ys[j + 1]);
            let phi = 0.25
                * (sol.potential_at(i, j)
                    + sol.potential_at(i + 1, j)
                    + sol.potential_at(i, j + 1)
                    + sol.potential_at(i + 1, j + 1));
            let (ex, ey) = sol.cell_field(i, j);
            let region = match g.cell(i as isize, j as isize).unwrap() {
                CellKind::Conductor(c) => sol.cross_section.conductors[c].label.as_str(),
                CellKind::Dielectric(_) if sol.cross_section.is_substrate(yc) => "substrate",
                CellKind::Dielectric(_) => "vacuum",
            };
            w.write_record([
                format!("{xc:.9e}"),
                format!("{yc:.9e}"),
                format!("{phi:.9e}"),
                format!("{ex:.9e}"),
                format!("{ey:.9e}"),
                region.to_string(),
            ])
            .map_err(csv_err)?;
        }
    }
    w.flush()?;
    Ok(())
}
