//! Notch-type resonator transmission: the inverse-S21 model, a synthetic
//! trace generator and the seven-parameter least-squares fit.
//!
//! The normalized inverse transmission is
//!
//! ```text
//! 1/S21(f) = 1 + (Qi/Qc*) e^{iφ} / (1 + 2i Qi (f - f0)/f0)
//! ```
//!
//! Measured traces additionally carry the cabling response
//! `A e^{i(θ - 2π f τ)}`, which multiplies `S21`.

mod fit;
mod guess;
pub mod io;

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use fit::{fit_trace, fit_trace_with, residual_rms, FitOptions};
pub use guess::initial_guess;

/// Minimum number of samples accepted by [`fit_trace`].
pub const MIN_FIT_POINTS: usize = 8;

/// A frequency-ordered complex transmission trace.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexTrace {
    frequencies: Vec<f64>,
    s21: Vec<Complex64>,
    drive_power_dbm: Option<f64>,
    line_attenuation_db: f64,
    pub label: String,
}

impl ComplexTrace {
    /// Builds a trace from frequencies that must already be strictly increasing.
    pub fn new(frequencies: Vec<f64>, s21: Vec<Complex64>) -> Result<Self> {
        if frequencies.len() != s21.len() {
            return Err(Error::InvalidTrace(format!(
                "{} frequencies but {} S21 samples",
                frequencies.len(),
                s21.len()
            )));
        }
        if frequencies.len() < 2 {
            return Err(Error::InvalidTrace("at least 2 points are required".into()));
        }
        if let Some(i) = frequencies.iter().position(|f| !f.is_finite() || *f <= 0.0) {
            return Err(Error::InvalidTrace(format!(
                "frequency #{i} is not a positive finite number"
            )));
        }
        if let Some(i) = s21.iter().position(|s| !s.re.is_finite() || !s.im.is_finite()) {
            return Err(Error::InvalidTrace(format!("S21 sample #{i} is not finite")));
        }
        if let Some(i) = frequencies.windows(2).position(|w| w[1] <= w[0]) {
            return Err(Error::InvalidTrace(format!(
                "frequencies not strictly increasing at sample #{}",
                i + 1
            )));
        }
        Ok(Self {
            frequencies,
            s21,
            drive_power_dbm: None,
            line_attenuation_db: 0.0,
            label: String::new(),
        })
    }

    /// Builds a trace from samples in any order. Duplicate frequencies are rejected.
    pub fn from_samples(samples: impl IntoIterator<Item = (f64, Complex64)>) -> Result<Self> {
        let mut samples: Vec<_> = samples.into_iter().collect();
        samples.sort_by(|a, b| a.0.total_cmp(&b.0));
        let (f, s) = samples.into_iter().unzip();
        Self::new(f, s)
    }

    pub fn with_drive_power(mut self, dbm: f64) -> Self {
        self.drive_power_dbm = Some(dbm);
        self
    }

    pub fn with_line_attenuation(mut self, db: f64) -> Result<Self> {
        if !(db >= 0.0 && db.is_finite()) {
            return Err(Error::InvalidTrace(format!(
                "line attenuation must be a finite value >= 0 dB, got {db}"
            )));
        }
        self.line_attenuation_db = db;
        Ok(self)
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    pub fn frequencies(&self) -> &[f64] {
        &self.frequencies
    }

    pub fn s21(&self) -> &[Complex64] {
        &self.s21
    }

    pub fn drive_power_dbm(&self) -> Option<f64> {
        self.drive_power_dbm
    }

    pub fn line_attenuation_db(&self) -> f64 {
        self.line_attenuation_db
    }

    pub fn len(&self) -> usize {
        self.frequencies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frequencies.is_empty()
    }

    /// Multiplies every sample by `factor`.
    pub fn scaled(&self, factor: Complex64) -> Self {
        let mut out = self.clone();
        out.s21.iter_mut().for_each(|s| *s *= factor);
        out
    }

    /// Keeps samples with `lo <= f <= hi`.
    pub fn window(&self, lo: f64, hi: f64) -> Result<Self> {
        let (f, s): (Vec<_>, Vec<_>) = self
            .frequencies
            .iter()
            .zip(&self.s21)
            .filter(|(f, _)| **f >= lo && **f <= hi)
            .map(|(f, s)| (*f, *s))
            .unzip();
        let mut out = Self::new(f, s)?;
        out.drive_power_dbm = self.drive_power_dbm;
        out.line_attenuation_db = self.line_attenuation_db;
        out.label = self.label.clone();
        Ok(out)
    }
}

/// Result of a resonance fit, also used as the parameter set for synthesis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResonanceFit {
    pub f0: f64,
    pub qi: f64,
    pub qc_star: f64,
    pub phi: f64,
    pub env_amplitude: f64,
    pub env_phase: f64,
    pub env_delay: f64,
    /// Covariance of (f0, Qi, Qc*, φ) in natural units.
    pub param_covariance: [[f64; 4]; 4],
    pub residual_rms: f64,
    pub n_iterations: usize,
    #[serde(default)]
    pub warnings: Vec<String>,
}

impl ResonanceFit {
    /// Parameters with a transparent environment (unit amplitude, no phase, no delay).
    pub fn ideal(f0: f64, qi: f64, qc_star: f64, phi: f64) -> Self {
        Self {
            f0,
            qi,
            qc_star,
            phi,
            env_amplitude: 1.0,
            env_phase: 0.0,
            env_delay: 0.0,
            param_covariance: [[0.0; 4]; 4],
            residual_rms: 0.0,
            n_iterations: 0,
            warnings: Vec::new(),
        }
    }

    pub fn with_environment(mut self, amplitude: f64, phase: f64, delay: f64) -> Self {
        self.env_amplitude = amplitude;
        self.env_phase = phase;
        self.env_delay = delay;
        self
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("f0", self.f0), ("Qi", self.qi), ("Qc*", self.qc_star)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::domain(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.phi.abs() < PI) {
            return Err(Error::domain(format!("|phi| must be < pi, got {}", self.phi)));
        }
        if !(self.env_amplitude > 0.0 && self.env_amplitude.is_finite()) {
            return Err(Error::domain("environment amplitude must be positive"));
        }
        Ok(())
    }

    /// Loaded quality factor, `(1/Qi + 1/Qc*)^-1`.
    pub fn loaded_q(&self) -> f64 {
        1.0 / (1.0 / self.qi + 1.0 / self.qc_star)
    }

    /// Full width of the loaded resonance in Hz.
    pub fn linewidth(&self) -> f64 {
        self.f0 / self.loaded_q()
    }

    pub fn f0_stderr(&self) -> f64 {
        self.param_covariance[0][0].max(0.0).sqrt()
    }

    pub fn qi_stderr(&self) -> f64 {
        self.param_covariance[1][1].max(0.0).sqrt()
    }

    pub fn qc_star_stderr(&self) -> f64 {
        self.param_covariance[2][2].max(0.0).sqrt()
    }

    pub fn phi_stderr(&self) -> f64 {
        self.param_covariance[3][3].max(0.0).sqrt()
    }

    /// Environment factor `A e^{i(θ - 2π f τ)}` at frequency `f`.
    pub fn environment(&self, f: f64) -> Complex64 {
        Complex64::from_polar(
            self.env_amplitude,
            self.env_phase - 2.0 * PI * f * self.env_delay,
        )
    }

    /// Modelled measured transmission at `f`, environment included.
    pub fn s21_at(&self, f: f64) -> Complex64 {
        self.environment(f) / inverse_s21(self.f0, self.qi, self.qc_star, self.phi, f)
    }
}

#[inline]
pub(crate) fn inverse_s21(f0: f64, qi: f64, qc_star: f64, phi: f64, f: f64) -> Complex64 {
    let detuning = Complex64::new(1.0, 2.0 * qi * (f - f0) / f0);
    1.0 + Complex64::from_polar(qi / qc_star, phi) / detuning
}

/// Normalized inverse transmission of a notch resonator at frequency `f`.
pub fn model_inverse_s21(f0: f64, qi: f64, qc_star: f64, phi: f64, f: f64) -> Result<Complex64> {
    for (name, v) in [("f0", f0), ("Qi", qi), ("Qc*", qc_star)] {
        if !(v > 0.0) {
            return Err(Error::domain(format!("{name} must be positive, got {v}")));
        }
    }
    Ok(inverse_s21(f0, qi, qc_star, phi, f))
}

/// Generates `env / model_inverse_s21` at each frequency plus i.i.d.
/// Gaussian noise of standard deviation `noise_sigma` on each quadrature.
pub fn synthesize_trace(
    params: &ResonanceFit,
    frequencies: &[f64],
    noise_sigma: f64,
    rng_seed: u64,
) -> Result<ComplexTrace> {
    params.validate()?;
    if !(noise_sigma >= 0.0 && noise_sigma.is_finite()) {
        return Err(Error::Precondition(format!(
            "noise_sigma must be >= 0, got {noise_sigma}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let s21 = if noise_sigma > 0.0 {
        let normal = Normal::new(0.0, noise_sigma).expect("sigma checked above");
        frequencies
            .iter()
            .map(|&f| {
                let n = Complex64::new(normal.sample(&mut rng), normal.sample(&mut rng));
                params.s21_at(f) + n
            })
            .collect()
    } else {
        frequencies.iter().map(|&f| params.s21_at(f)).collect()
    };
    Ok(ComplexTrace::new(frequencies.to_vec(), s21)?.with_label("synthetic"))
}

/// `n` evenly spaced frequencies covering `f0 ± half_span_linewidths` loaded linewidths.
pub fn linewidth_grid(params: &ResonanceFit, half_span_linewidths: f64, n: usize) -> Vec<f64> {
    let half = half_span_linewidths * params.linewidth();
    let lo = params.f0 - half;
    let step = 2.0 * half / (n.max(2) - 1) as f64;
    (0..n).map(|k| lo + step * k as f64).collect()
}

pub(crate) fn wrap_phase(x: f64) -> f64 {
    let y = (x + PI).rem_euclid(2.0 * PI) - PI;
    if y <= -PI {
        y + 2.0 * PI
    } else {
        y
    }
}
