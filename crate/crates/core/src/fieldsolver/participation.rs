//! Thin-film participation ratios from boundary samples.

use serde::Serialize;

use super::geometry::{ConductorRole, Geometry, InterfaceKind};
use super::solve::{solve, FieldSolution};
use crate::error::{Error, Result};

/// Participations attributed to one conductor.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConductorShare {
    pub label: String,
    pub role: ConductorRole,
    pub p_sm: Option<f64>,
    pub p_sv: Option<f64>,
    pub p_mv: Option<f64>,
}

impl ConductorShare {
    pub fn get(&self, kind: InterfaceKind) -> Option<f64> {
        match kind {
            InterfaceKind::SubstrateMetal => self.p_sm,
            InterfaceKind::SubstrateVacuum => self.p_sv,
            InterfaceKind::MetalVacuum => self.p_mv,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ParticipationSet {
    /// `None` when the interface was not requested.
    pub p_sm: Option<f64>,
    pub p_sv: Option<f64>,
    pub p_mv: Option<f64>,
    pub by_conductor: Vec<ConductorShare>,
    pub cells_per_gap: usize,
    pub unknowns: usize,
    /// Largest relative change against the previous refinement level.
    pub error_estimate: Option<f64>,
    pub capacitance_energy: f64,
    pub capacitance_charge: f64,
}

impl ParticipationSet {
    pub fn get(&self, kind: InterfaceKind) -> Option<f64> {
        match kind {
            InterfaceKind::SubstrateMetal => self.p_sm,
            InterfaceKind::SubstrateVacuum => self.p_sv,
            InterfaceKind::MetalVacuum => self.p_mv,
        }
    }

    pub fn total(&self) -> f64 {
        InterfaceKind::ALL.iter().filter_map(|k| self.get(*k)).sum()
    }

    pub fn conductor(&self, label: &str) -> Option<&ConductorShare> {
        self.by_conductor.iter().find(|c| c.label == label)
    }

    /// Sum over conductors of one role.
    pub fn by_role(&self, role: ConductorRole, kind: InterfaceKind) -> Option<f64> {
        self.get(kind)?;
        Some(
            self.by_conductor
                .iter()
                .filter(|c| c.role == role)
                .filter_map(|c| c.get(kind))
                .sum(),
        )
    }

    /// Every reported value, for convergence comparisons.
    pub(crate) fn values(&self) -> Vec<f64> {
        let mut v: Vec<f64> = InterfaceKind::ALL.iter().filter_map(|k| self.get(*k)).collect();
        for c in &self.by_conductor {
            v.extend(InterfaceKind::ALL.iter().filter_map(|k| c.get(*k)));
        }
        v
    }

    pub fn validate(&self) -> Result<()> {
        for kind in InterfaceKind::ALL {
            if let Some(p) = self.get(kind) {
                if !(p > 0.0 && p < 1.0) {
                    return Err(Error::domain(format!("{} participation {p} outside (0, 1)", kind.short_name())));
                }
            }
        }
        if self.total() >= 0.1 {
            return Err(Error::domain(format!("participations sum to {}, not thin-film scale", self.total())));
        }
        Ok(())
    }
}

/// Film energy divided by the film thickness, per sample, without `½ε0`.
fn film_density(kind: InterfaceKind, eps_film: f64, eps_substrate: f64, e_par: f64, e_perp: f64) -> f64 {
    match kind {
        InterfaceKind::SubstrateMetal => eps_substrate * eps_substrate / eps_film * e_perp * e_perp,
        InterfaceKind::MetalVacuum => e_perp * e_perp / eps_film,
        InterfaceKind::SubstrateVacuum => eps_film * e_par * e_par + e_perp * e_perp / eps_film,
    }
}

/// Participation of every requested film in `sol`.
pub fn compute_participations<G: Geometry>(sol: &FieldSolution, geom: &G) -> Result<ParticipationSet> {
    let cs = geom.cross_section()?;
    if cs != sol.cross_section {
        return Err(Error::Precondition("field solution was not produced from this geometry".into()));
    }
    let denom = sol.energy_integral();
    let n = cs.conductors.len();
    let mut totals = [None; 3];
    let mut shares = vec![[None; 3]; n];
    for (k, kind) in InterfaceKind::ALL.into_iter().enumerate() {
        let Some(layer) = cs.layers.get(kind) else {
            continue;
        };
        let mut sum = 0.0;
        let mut per = vec![0.0; n];
        let mut seen = false;
        for s in sol.samples.iter().filter(|s| s.kind == kind) {
            seen = true;
            let w = layer.thickness
                * s.length
                * film_density(kind, layer.epsilon, cs.substrate_epsilon, s.e_parallel, s.e_perpendicular);
            sum += w;
            per[s.conductor] += w;
        }
        if !seen {
            return Err(Error::InterfaceNotSampled(kind.short_name().into()));
        }
        totals[k] = Some(sum / denom);
        for (c, p) in per.into_iter().enumerate() {
            shares[c][k] = Some(p / denom);
        }
    }
    Ok(ParticipationSet {
        p_sm: totals[0],
        p_sv: totals[1],
        p_mv: totals[2],
        by_conductor: cs
            .conductors
            .iter()
            .zip(shares)
            .map(|(c, s)| ConductorShare {
                label: c.label.clone(),
                role: c.role,
                p_sm: s[0],
                p_sv: s[1],
                p_mv: s[2],
            })
            .collect(),
        cells_per_gap: cs.meshing.cells_per_gap,
        unknowns: sol.unknowns,
        error_estimate: None,
        capacitance_energy: sol.energy_capacitance(),
        capacitance_charge: sol.charge_capacitance(),
    })
}

/// Solve at unit excitation and evaluate participations.
pub fn participations_at<G: Geometry>(geom: &G) -> Result<(FieldSolution, ParticipationSet)> {
    let sol = solve(&geom.cross_section()?, 1.0)?;
    let set = compute_participations(&sol, geom)?;
    Ok((sol, set))
}
