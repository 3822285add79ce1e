//! Fit initialization.
//!
//! The coarse dip location, depth and half-depth width come from the
//! magnitude. The refined guess works in the inverse-transmission plane,
//! where the resonance traces an exact circle once the cable delay is
//! removed: the delay is chosen to make the points most circular, the
//! off-resonance point fixes the environment, and the detuning read off
//! the circle is linear in frequency with slope `2 Qi / f0`.

use std::f64::consts::PI;
use std::ops::Range;

use nalgebra::{Matrix3, Vector3};
use num_complex::Complex64;

use super::{wrap_phase, ComplexTrace, ResonanceFit, MIN_FIT_POINTS};
use crate::error::{Error, Result};

/// Guessed parameters plus the sample range the fit should use.
#[derive(Debug, Clone)]
pub(crate) struct Analysis {
    pub guess: ResonanceFit,
    pub window: Range<usize>,
}

/// Starting point for [`super::fit_trace`].
///
/// When the trace holds several dips, the deepest one is chosen and the
/// others are listed in `warnings`.
pub fn initial_guess(trace: &ComplexTrace) -> Result<ResonanceFit> {
    Ok(analyze(trace)?.guess)
}

pub(crate) fn analyze(trace: &ComplexTrace) -> Result<Analysis> {
    let n = trace.len();
    if n < MIN_FIT_POINTS {
        return Err(Error::Precondition(format!(
            "at least {MIN_FIT_POINTS} points are required for fitting, got {n}"
        )));
    }
    let f = trace.frequencies();
    let s = trace.s21();
    let mag: Vec<f64> = s.iter().map(|z| z.norm()).collect();
    let edge = (n / 10).max(2);
    let mut edge_mags: Vec<f64> = mag[..edge].iter().chain(&mag[n - edge..]).copied().collect();
    let baseline = median(&mut edge_mags);
    if !(baseline > 0.0) {
        return Err(Error::NoResonance("off-resonance transmission is zero".into()));
    }
    let noise = noise_sigma(s);
    let smooth = moving_average(&mag, 2);
    let k0 = argmin(&smooth);
    let depth = 1.0 - smooth[k0] / baseline;
    let threshold = (3.0 * noise / baseline).max(1e-9);
    if !(depth > threshold) {
        return Err(Error::NoResonance(format!(
            "dip depth {depth:.3e} below threshold {threshold:.3e}"
        )));
    }

    // Half-depth crossing of |S21|^2 on each side.
    let half_sq = 0.5 * (smooth[k0].powi(2) + baseline.powi(2));
    let mut kl = k0;
    while kl > 0 && smooth[kl].powi(2) < half_sq {
        kl -= 1;
    }
    let mut kr = k0;
    while kr + 1 < n && smooth[kr].powi(2) < half_sq {
        kr += 1;
    }
    let fwhm = (f[kr] - f[kl]).max(f[1] - f[0]);

    let mut warnings = Vec::new();
    let exclusion = 3.0 * fwhm;
    let min_other = (5.0 * noise / baseline).max(0.2 * depth);
    let mut left_bound = 0;
    let mut right_bound = n;
    for k in local_minima(&smooth, 2) {
        if (f[k] - f[k0]).abs() <= exclusion {
            continue;
        }
        let d = 1.0 - smooth[k] / baseline;
        if d < min_other {
            continue;
        }
        warnings.push(format!(
            "additional dip at {:.6e} Hz (depth {:.3}) ignored; fitted the deepest dip at {:.6e} Hz",
            f[k], d, f[k0]
        ));
        let mid = (k + k0) / 2;
        if k < k0 {
            left_bound = left_bound.max(mid);
        } else {
            right_bound = right_bound.min(mid + 1);
        }
    }
    let window = left_bound..right_bound;
    if window.len() < MIN_FIT_POINTS {
        return Err(Error::Precondition(format!(
            "only {} points around the deepest dip after excluding neighbouring dips",
            window.len()
        )));
    }

    let mut guess = circle_guess(&f[window.clone()], &s[window.clone()], f[k0])?;
    guess.warnings = warnings;
    Ok(Analysis { guess, window })
}

fn circle_guess(f: &[f64], s: &[Complex64], f_ref: f64) -> Result<ResonanceFit> {
    let m = f.len();
    let f_mid = 0.5 * (f[0] + f[m - 1]);
    let span = f[m - 1] - f[0];
    let inv: Vec<Complex64> = s.iter().map(|z| 1.0 / z).collect();
    // Noise on 1/S21 grows as 1/|S21|^2; weight by the inverse variance.
    let weights: Vec<f64> = {
        let raw: Vec<f64> = s.iter().map(|z| z.norm_sqr().powi(2)).collect();
        let mean = raw.iter().sum::<f64>() / m as f64;
        raw.iter().map(|w| w / mean).collect()
    };
    let edge = (m / 10).max(2);

    let tau0 = edge_delay(f, s, edge);
    let derotate = |tau: f64| -> Vec<Complex64> {
        f.iter()
            .zip(&inv)
            .map(|(fk, w)| w * Complex64::from_polar(1.0, -2.0 * PI * (fk - f_mid) * tau))
            .collect()
    };
    let circle_cost = |tau: f64| -> f64 {
        let w = derotate(tau);
        match fit_circle(&w, &weights) {
            Some((c, r)) => w
                .iter()
                .zip(&weights)
                .map(|(z, wt)| wt * ((z - c).norm() - r).powi(2))
                .sum::<f64>(),
            None => f64::INFINITY,
        }
    };

    // Coarse scan (total phase excursion up to ±π over the span), then golden section.
    let half_range = 0.5 / span;
    let steps = 40;
    let grid_step = 2.0 * half_range / steps as f64;
    let mut best = (tau0, circle_cost(tau0));
    for j in 0..=steps {
        let tau = tau0 - half_range + grid_step * j as f64;
        let c = circle_cost(tau);
        if c < best.1 {
            best = (tau, c);
        }
    }
    let tau = golden_section(&circle_cost, best.0 - grid_step, best.0 + grid_step, 80);

    let w = derotate(tau);
    let (center, radius) = fit_circle(&w, &weights)
        .ok_or_else(|| Error::NoResonance("inverse transmission is not circular".into()))?;
    let edge_avg: Complex64 =
        (w[..edge].iter().sum::<Complex64>() + w[m - edge..].iter().sum::<Complex64>())
            / (2 * edge) as f64;
    let dir = edge_avg - center;
    if !(dir.norm() > 0.0) {
        return Err(Error::NoResonance("cannot locate the off-resonance point".into()));
    }
    let p_off = center + dir * (radius / dir.norm());
    let coupling = 2.0 * (center / p_off - 1.0);

    // Detuning u = 2 Qi (x - δ)/(1 + δ) from the normalized circle point.
    let (mut sw, mut swx, mut swy, mut swxx, mut swxy) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for ((fk, wk), sw_k) in f.iter().zip(&w).zip(&weights) {
        let z = (wk / p_off - 1.0) / coupling;
        if !(z.norm_sqr() > 0.0) {
            continue;
        }
        let u = (1.0 / z).im;
        let x = (fk - f_ref) / f_ref;
        let wt = z.norm_sqr().powi(2) * sw_k;
        sw += wt;
        swx += wt * x;
        swy += wt * u;
        swxx += wt * x * x;
        swxy += wt * x * u;
    }
    let det = sw * swxx - swx * swx;
    let slope = (sw * swxy - swx * swy) / det;
    let intercept = (swy - slope * swx) / sw;
    if !(slope > 0.0 && slope.is_finite()) {
        return Err(Error::NoResonance("detuning does not increase with frequency".into()));
    }
    let delta = -intercept / slope;
    let f0 = f_ref * (1.0 + delta);
    let qi = 0.5 * slope * (1.0 + delta);
    let qc_star = qi / coupling.norm();
    let guess = ResonanceFit {
        env_amplitude: 1.0 / p_off.norm(),
        env_phase: wrap_phase(-p_off.arg() + 2.0 * PI * f_mid * tau),
        env_delay: tau,
        ..ResonanceFit::ideal(f0, qi, qc_star, coupling.arg())
    };
    guess
        .validate()
        .map_err(|e| Error::NoResonance(format!("implausible initial guess: {e}")))?;
    Ok(guess)
}

/// Delay from the mean phase slope of the two trace edges.
fn edge_delay(f: &[f64], s: &[Complex64], edge: usize) -> f64 {
    let m = f.len();
    let mut phase: Vec<f64> = s.iter().map(|z| z.arg()).collect();
    for k in 1..m {
        let d = phase[k] - phase[k - 1];
        phase[k] = phase[k - 1] + wrap_phase(d);
    }
    let slope = |r: Range<usize>| -> f64 {
        let xs = &f[r.clone()];
        let ys = &phase[r];
        let mx = xs.iter().sum::<f64>() / xs.len() as f64;
        let my = ys.iter().sum::<f64>() / ys.len() as f64;
        let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
        let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
        sxy / sxx
    };
    let avg = 0.5 * (slope(0..edge) + slope(m - edge..m));
    if avg.is_finite() {
        -avg / (2.0 * PI)
    } else {
        0.0
    }
}

/// Weighted algebraic (Kåsa) circle fit. Returns (center, radius).
pub(crate) fn fit_circle(points: &[Complex64], weights: &[f64]) -> Option<(Complex64, f64)> {
    let m: f64 = weights.iter().sum();
    let mean = points.iter().zip(weights).map(|(p, w)| p * w).sum::<Complex64>() / m;
    let scale = (points
        .iter()
        .zip(weights)
        .map(|(p, w)| w * (p - mean).norm_sqr())
        .sum::<f64>()
        / m)
        .sqrt();
    if !(scale > 0.0) {
        return None;
    }
    let mut a = Matrix3::<f64>::zeros();
    let mut b = Vector3::<f64>::zeros();
    for (p, w) in points.iter().zip(weights) {
        let q = (p - mean) / scale;
        let row = Vector3::new(q.re, q.im, 1.0);
        let rhs = -q.norm_sqr();
        a += *w * row * row.transpose();
        b += *w * row * rhs;
    }
    let sol = a.lu().solve(&b)?;
    let c = Complex64::new(-0.5 * sol[0], -0.5 * sol[1]);
    let r2 = c.norm_sqr() - sol[2];
    if !(r2 > 0.0) {
        return None;
    }
    Some((mean + c * scale, r2.sqrt() * scale))
}

fn golden_section(f: &impl Fn(f64) -> f64, mut a: f64, mut b: f64, iters: usize) -> f64 {
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    for _ in 0..iters {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d);
        }
    }
    0.5 * (a + b)
}

/// Robust per-quadrature noise estimate from second differences.
fn noise_sigma(s: &[Complex64]) -> f64 {
    if s.len() < 3 {
        return 0.0;
    }
    let mut d: Vec<f64> = s
        .windows(3)
        .flat_map(|w| {
            let dd = w[2] - 2.0 * w[1] + w[0];
            [dd.re.abs(), dd.im.abs()]
        })
        .collect();
    median(&mut d) / 0.674_489_75 / 6f64.sqrt()
}

fn median(v: &mut [f64]) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn moving_average(v: &[f64], half: usize) -> Vec<f64> {
    (0..v.len())
        .map(|k| {
            let lo = k.saturating_sub(half);
            let hi = (k + half + 1).min(v.len());
            v[lo..hi].iter().sum::<f64>() / (hi - lo) as f64
        })
        .collect()
}

fn argmin(v: &[f64]) -> usize {
    v.iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| i)
        .unwrap_or(0)
}

fn local_minima(v: &[f64], half: usize) -> Vec<usize> {
    (0..v.len())
        .filter(|&k| {
            let lo = k.saturating_sub(half);
            let hi = (k + half + 1).min(v.len());
            k > 0 && k + 1 < v.len() && v[lo..hi].iter().all(|x| v[k] <= *x)
        })
        .collect()
}
