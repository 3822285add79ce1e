//! Participation-weighted loss budgets.
//!
//! `1/Q_tot = 1/Q0 + Σ_j p_j δ_j`, where `p_j` is the fraction of the
//! capacitive energy stored in region `j` and `δ_j` its loss tangent.

pub mod circuit;
pub mod io;
pub mod regression;

use std::collections::HashSet;

use serde::Serialize;

use crate::error::{Error, Result};

pub use circuit::{
    participation_equivalence, qubit_energy, resonator_energy, resonator_voltage_profile,
    qubit_sensitivity_factor, voltage_ratio_squared, CircuitCapacitances,
};
pub use io::{budget_from_kv, read_budget, read_site_points};
pub use regression::{fit_loss_per_site, SiteLossFit, SitePoint};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LossChannel {
    pub label: String,
    pub participation: f64,
    pub loss_tangent: f64,
}

impl LossChannel {
    pub fn new(label: impl Into<String>, participation: f64, loss_tangent: f64) -> Result<Self> {
        let ch = Self {
            label: label.into(),
            participation,
            loss_tangent,
        };
        ch.validate()?;
        Ok(ch)
    }

    fn validate(&self) -> Result<()> {
        if !(self.participation > 0.0 && self.participation <= 1.0) {
            return Err(Error::domain(format!(
                "channel `{}`: participation must be in (0, 1], got {}",
                self.label, self.participation
            )));
        }
        if !(self.loss_tangent >= 0.0 && self.loss_tangent.is_finite()) {
            return Err(Error::domain(format!(
                "channel `{}`: loss tangent must be >= 0, got {}",
                self.label, self.loss_tangent
            )));
        }
        Ok(())
    }

    /// `p δ`, this channel's contribution to `1/Q`.
    pub fn loss(&self) -> f64 {
        self.participation * self.loss_tangent
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LossBudget {
    pub q0: f64,
    pub channels: Vec<LossChannel>,
}

/// One channel's share of the budget.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Contribution {
    pub label: String,
    pub inverse_q: f64,
    /// Share of the summed channel loss (background excluded).
    pub fraction_of_channel_loss: f64,
}

impl LossBudget {
    pub fn new(q0: f64, channels: Vec<LossChannel>) -> Result<Self> {
        if !(q0 > 0.0) {
            return Err(Error::domain(format!("q0 must be positive, got {q0}")));
        }
        let mut seen = HashSet::new();
        for ch in &channels {
            ch.validate()?;
            if !seen.insert(ch.label.as_str()) {
                return Err(Error::domain(format!("duplicate channel label `{}`", ch.label)));
            }
        }
        Ok(Self { q0, channels })
    }

    pub fn channel_loss(&self) -> f64 {
        self.channels.iter().map(LossChannel::loss).sum()
    }

    /// Channel contributions, largest first. Ties keep file order.
    pub fn contributions(&self) -> Vec<Contribution> {
        let total = self.channel_loss();
        let mut out: Vec<_> = self
            .channels
            .iter()
            .map(|c| Contribution {
                label: c.label.clone(),
                inverse_q: c.loss(),
                fraction_of_channel_loss: if total > 0.0 { c.loss() / total } else { 0.0 },
            })
            .collect();
        out.sort_by(|a, b| b.inverse_q.total_cmp(&a.inverse_q));
        out
    }
}

/// `(1/q0 + Σ p δ)^-1`.
pub fn total_quality(budget: &LossBudget) -> f64 {
    budget.q0 / (1.0 + budget.q0 * budget.channel_loss())
}

/// Loss tangent that explains `excess_loss` through a region of the
/// given participation: `excess_loss / participation`.
pub fn infer_loss_tangent(excess_loss: f64, participation: f64) -> Result<f64> {
    if !(participation > 0.0 && participation <= 1.0) {
        return Err(Error::domain(format!(
            "participation must be in (0, 1], got {participation}"
        )));
    }
    if !(excess_loss >= 0.0) {
        return Err(Error::domain(format!("excess loss must be >= 0, got {excess_loss}")));
    }
    Ok(excess_loss / participation)
}

/// `1/Q_device - 1/Q_witness`.
pub fn excess_loss(q_device: f64, q_witness: f64) -> Result<f64> {
    if !(q_device > 0.0 && q_witness > 0.0) {
        return Err(Error::domain("quality factors must be positive"));
    }
    Ok(1.0 / q_device - 1.0 / q_witness)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn empty_budget_is_background() {
        let b = LossBudget::new(2.5e6, vec![]).unwrap();
        assert_eq!(total_quality(&b), 2.5e6);
    }

    #[test]
    fn seven_ion_milled_sites() {
        let b = LossBudget::new(2.5e6, vec![LossChannel::new("sites", 1.0, 7.0 * 7.91e-7).unwrap()]).unwrap();
        // 1/(4e-7 + 5.537e-6)
        assert_relative_eq!(total_quality(&b), 1.0 / 5.937e-6, max_relative = 1e-12);
        assert!((total_quality(&b) - 1.684e5).abs() < 100.0);
    }

    #[test]
    fn budget_invariants_rejected() {
        assert!(LossBudget::new(0.0, vec![]).is_err());
        assert!(LossChannel::new("a", 0.0, 1.0).is_err());
        assert!(LossChannel::new("a", 1.5, 1.0).is_err());
        assert!(LossChannel::new("a", 0.5, -1.0).is_err());
        let a = LossChannel::new("a", 0.5, 1e-3).unwrap();
        assert!(LossBudget::new(1e6, vec![a.clone(), a]).is_err());
    }

    #[test]
    fn identical_channels_split_evenly() {
        let b = LossBudget::new(
            1e6,
            vec![
                LossChannel::new("a", 1e-3, 2e-3).unwrap(),
                LossChannel::new("b", 1e-3, 2e-3).unwrap(),
            ],
        )
        .unwrap();
        let c = b.contributions();
        assert_eq!(c[0].fraction_of_channel_loss, 0.5);
        assert_eq!(c[1].fraction_of_channel_loss, 0.5);
    }

    #[test]
    fn contributions_sorted_descending() {
        let b = LossBudget::new(
            1e6,
            vec![
                LossChannel::new("small", 1e-4, 1e-3).unwrap(),
                LossChannel::new("big", 1e-3, 1e-3).unwrap(),
            ],
        )
        .unwrap();
        let labels: Vec<_> = b.contributions().into_iter().map(|c| c.label).collect();
        assert_eq!(labels, ["big", "small"]);
    }

    #[test]
    fn loss_tangent_inference() {
        assert_eq!(infer_loss_tangent(0.0, 0.5).unwrap(), 0.0);
        let excess = excess_loss(2e5, 2e6).unwrap();
        assert_relative_eq!(excess, 4.5e-6, max_relative = 1e-12);
        let delta = infer_loss_tangent(excess, 6.4e-4).unwrap();
        assert!((delta - 7e-3).abs() < 1e-4, "delta {delta}");
        assert!(infer_loss_tangent(1e-6, 0.0).is_err());
        assert!(infer_loss_tangent(-1e-6, 0.1).is_err());
    }

    fn budget_strategy() -> impl Strategy<Value = LossBudget> {
        (1e3..1e8f64, prop::collection::vec((1e-6..1.0f64, 0.0..1e-2f64), 0..6)).prop_map(|(q0, chans)| {
            let channels = chans
                .into_iter()
                .enumerate()
                .map(|(i, (p, d))| LossChannel::new(format!("c{i}"), p, d).unwrap())
                .collect();
            LossBudget::new(q0, channels).unwrap()
        })
    }

    proptest! {
        #[test]
        fn quality_never_exceeds_background(b in budget_strategy()) {
            let q = total_quality(&b);
            prop_assert!(q <= b.q0);
            if b.channel_loss() == 0.0 {
                prop_assert_eq!(q, b.q0);
            }
        }

        #[test]
        fn quality_monotone_in_each_channel(b in budget_strategy(), k in 0usize..6, bump in 1.0..2.0f64) {
            prop_assume!(!b.channels.is_empty());
            let k = k % b.channels.len();
            let q = total_quality(&b);
            let mut more_p = b.clone();
            more_p.channels[k].participation = (more_p.channels[k].participation * bump).min(1.0);
            prop_assert!(total_quality(&more_p) <= q);
            let mut more_d = b.clone();
            more_d.channels[k].loss_tangent *= bump;
            prop_assert!(total_quality(&more_d) <= q);
        }

        #[test]
        fn inference_inverts_channel_term(p in 1e-9..1.0f64, d in 0.0..1.0f64) {
            let got = infer_loss_tangent(p * d, p).unwrap();
            prop_assert!((got - d).abs() <= 2.0 * f64::EPSILON * d);
        }
    }
}
