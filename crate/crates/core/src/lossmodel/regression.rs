//! Straight-line fit of resonator loss against the number of lift-off sites.

use serde::Serialize;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SitePoint {
    pub n_sites: u32,
    pub inverse_qi: f64,
    /// One-standard-deviation uncertainty of `inverse_qi`.
    pub sigma: Option<f64>,
}

impl SitePoint {
    pub fn new(n_sites: u32, inverse_qi: f64, sigma: Option<f64>) -> Self {
        Self {
            n_sites,
            inverse_qi,
            sigma,
        }
    }
}

/// `1/Qi = intercept + slope · n_sites`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SiteLossFit {
    /// Loss per site.
    pub slope: f64,
    /// Background loss with no sites.
    pub intercept: f64,
    pub slope_stderr: f64,
    pub intercept_stderr: f64,
    pub r_squared: f64,
    pub weighted: bool,
    pub n_points: usize,
}

/// Least-squares line through `points`.
///
/// With sigmas the fit uses weights `1/σ²` and standard errors follow from
/// the weighted normal equations with the sigmas taken as absolute. Without
/// sigmas the errors are scaled by the residual variance.
pub fn fit_loss_per_site(points: &[SitePoint]) -> Result<SiteLossFit> {
    let mut distinct: Vec<u32> = points.iter().map(|p| p.n_sites).collect();
    distinct.sort_unstable();
    distinct.dedup();
    match distinct.len() {
        0 => return Err(Error::Precondition("no points".into())),
        1 => return Err(Error::DegenerateAbscissa(distinct[0] as f64)),
        2 => {
            return Err(Error::Precondition(
                "at least 3 distinct site counts are required".into(),
            ))
        }
        _ => {}
    }
    let with_sigma = points.iter().filter(|p| p.sigma.is_some()).count();
    let weighted = match with_sigma {
        0 => false,
        n if n == points.len() => true,
        _ => {
            return Err(Error::Precondition(
                "sigmas must be given for all points or for none".into(),
            ))
        }
    };
    let mut weights = Vec::with_capacity(points.len());
    for p in points {
        if !p.inverse_qi.is_finite() {
            return Err(Error::domain(format!("non-finite inverse_qi {}", p.inverse_qi)));
        }
        weights.push(match p.sigma {
            Some(s) if s > 0.0 && s.is_finite() => 1.0 / (s * s),
            Some(s) => return Err(Error::domain(format!("sigma must be positive, got {s}"))),
            None => 1.0,
        });
    }

    let sw: f64 = weights.iter().sum();
    let xbar = points.iter().zip(&weights).map(|(p, w)| w * p.n_sites as f64).sum::<f64>() / sw;
    let ybar = points.iter().zip(&weights).map(|(p, w)| w * p.inverse_qi).sum::<f64>() / sw;
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for (p, w) in points.iter().zip(&weights) {
        let dx = p.n_sites as f64 - xbar;
        let dy = p.inverse_qi - ybar;
        sxx += w * dx * dx;
        sxy += w * dx * dy;
        syy += w * dy * dy;
    }
    let slope = sxy / sxx;
    let intercept = ybar - slope * xbar;
    let ssr: f64 = points
        .iter()
        .zip(&weights)
        .map(|(p, w)| w * (p.inverse_qi - intercept - slope * p.n_sites as f64).powi(2))
        .sum();

    let scale = if weighted {
        1.0
    } else {
        ssr / (points.len() - 2) as f64
    };
    let slope_var = scale / sxx;
    let intercept_var = scale * (1.0 / sw + xbar * xbar / sxx);
    let r_squared = if syy > 0.0 {
        (1.0 - ssr / syy).clamp(0.0, 1.0)
    } else {
        1.0
    };
    Ok(SiteLossFit {
        slope,
        intercept,
        slope_stderr: slope_var.max(0.0).sqrt(),
        intercept_stderr: intercept_var.max(0.0).sqrt(),
        r_squared,
        weighted,
        n_points: points.len(),
    })
}
