//! Damped least-squares fit of the seven-parameter notch model.
//!
//! Internal parameters, with `x = (f - f_ref)/f_ref` and `f_ref` the
//! guessed resonance:
//!
//! | index | parameter                          |
//! |-------|------------------------------------|
//! | 0     | δ, `f0 = f_ref (1 + δ)`            |
//! | 1     | ln Qi                              |
//! | 2     | ln Qc*                             |
//! | 3     | φ                                  |
//! | 4     | ln A                               |
//! | 5     | θ', environment phase at `f_ref`   |
//! | 6     | κ, phase slope per unit x          |
//!
//! so that the environment is `A e^{i(θ' + κ x)}` and `τ = -κ / (2π f_ref)`.

use std::f64::consts::PI;

use nalgebra::{SMatrix, SVector, SymmetricEigen};
use num_complex::Complex64;

use super::guess::analyze;
use super::{wrap_phase, ComplexTrace, ResonanceFit};
use crate::error::{Error, Result};

const NP: usize = 7;
type Mat = SMatrix<f64, NP, NP>;
type Vecp = SVector<f64, NP>;

/// Optimizer settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitOptions {
    pub max_iterations: usize,
    /// Stop once an accepted step lowers the cost by less than this fraction.
    pub relative_cost_tolerance: f64,
    pub initial_damping: f64,
    /// Largest allowed condition number of the scaled normal matrix.
    pub max_condition: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            max_iterations: 200,
            relative_cost_tolerance: 1e-12,
            initial_damping: 1e-3,
            max_condition: 1e13,
        }
    }
}

/// Fits `trace` with default [`FitOptions`].
pub fn fit_trace(trace: &ComplexTrace) -> Result<ResonanceFit> {
    fit_trace_with(trace, &FitOptions::default())
}

pub fn fit_trace_with(trace: &ComplexTrace, opts: &FitOptions) -> Result<ResonanceFit> {
    let analysis = analyze(trace)?;
    let guess = analysis.guess;
    let f = &trace.frequencies()[analysis.window.clone()];
    let s = &trace.s21()[analysis.window];
    let problem = Problem::new(f, s, guess.f0);
    let mut p = problem.encode(&guess);

    let signal: f64 = s.iter().map(|z| z.norm_sqr()).sum();
    let floor = 1e-28 * signal;
    let (mut jtj, mut jtr, mut cost) = problem.normal_equations(&p);
    let mut lambda = opts.initial_damping;
    let mut converged = false;
    let mut iterations = 0;

    while iterations < opts.max_iterations {
        iterations += 1;
        if cost <= floor {
            converged = true;
            break;
        }
        let Some(step) = damped_step(&jtj, &jtr, lambda) else {
            lambda *= 10.0;
            continue;
        };
        let predicted = -(2.0 * step.dot(&jtr) + (step.transpose() * jtj * step)[0]);
        let trial = p + step;
        let trial_cost = problem.cost(&trial);
        if trial_cost.is_finite() && trial_cost < cost {
            let relative = (cost - trial_cost) / cost;
            p = trial;
            (jtj, jtr, cost) = problem.normal_equations(&p);
            lambda = (lambda * 0.3).max(1e-15);
            if relative < opts.relative_cost_tolerance {
                converged = true;
                break;
            }
        } else {
            lambda *= 10.0;
            if !(predicted > 1e-15 * cost) || lambda > 1e16 {
                // No representable improvement left.
                converged = true;
                break;
            }
        }
    }

    // Undamped Gauss-Newton polishing. Near the optimum the cost is flat to
    // rounding, so steps are judged by their size on the residual scale.
    if converged {
        for _ in 0..8 {
            let Some(step) = damped_step(&jtj, &jtr, 0.0) else { break };
            let trial = p + step;
            let trial_cost = problem.cost(&trial);
            if !(trial_cost <= cost * (1.0 + 1e-9) + floor) {
                break;
            }
            let size = (0..NP)
                .map(|a| step[a].abs() * jtj[(a, a)].sqrt())
                .fold(0.0, f64::max);
            p = trial;
            (jtj, jtr, cost) = problem.normal_equations(&p);
            if size <= 1e-10 * (cost + floor).sqrt() {
                break;
            }
        }
    }

    let mut fit = problem.decode(&p);
    fit.n_iterations = iterations;
    fit.residual_rms = (cost / f.len() as f64).sqrt();
    fit.warnings = guess.warnings;
    if !converged {
        return Err(Error::FitDiverged {
            iterations,
            last: Box::new(fit),
        });
    }
    fit.validate().map_err(|e| Error::FitDiverged {
        iterations,
        last: Box::new(ResonanceFit {
            warnings: vec![e.to_string()],
            ..fit.clone()
        }),
    })?;

    let cov = covariance(&jtj, cost, f.len(), opts.max_condition)?;
    fit.param_covariance = problem.core_covariance(&p, &cov);
    Ok(fit)
}

/// RMS of `|S21_measured - S21_model|` over every sample of `trace`.
pub fn residual_rms(trace: &ComplexTrace, fit: &ResonanceFit) -> f64 {
    let sum: f64 = trace
        .frequencies()
        .iter()
        .zip(trace.s21())
        .map(|(f, s)| (fit.s21_at(*f) - s).norm_sqr())
        .sum();
    (sum / trace.len() as f64).sqrt()
}

fn damped_step(jtj: &Mat, jtr: &Vecp, lambda: f64) -> Option<Vecp> {
    let mut a = *jtj;
    for i in 0..NP {
        a[(i, i)] += lambda * jtj[(i, i)].max(1e-300);
    }
    a.cholesky().map(|c| c.solve(&(-jtr)))
}

fn covariance(jtj: &Mat, cost: f64, m: usize, max_condition: f64) -> Result<Mat> {
    let d: Vec<f64> = (0..NP).map(|i| jtj[(i, i)]).collect();
    if let Some(i) = d.iter().position(|v| !(*v > 0.0)) {
        return Err(Error::Unidentifiable(format!(
            "parameter #{i} does not affect the model"
        )));
    }
    let scaled = Mat::from_fn(|i, j| jtj[(i, j)] / (d[i] * d[j]).sqrt());
    let eig = SymmetricEigen::new(scaled);
    let max = eig.eigenvalues.max();
    let min = eig.eigenvalues.min();
    if !(min > 0.0) || max / min > max_condition {
        return Err(Error::Unidentifiable(format!(
            "normal matrix condition number {:.3e} exceeds {max_condition:.1e}",
            max / min
        )));
    }
    let inv_scaled = eig.eigenvectors
        * Mat::from_diagonal(&eig.eigenvalues.map(|v| 1.0 / v))
        * eig.eigenvectors.transpose();
    let dof = (2 * m).saturating_sub(NP).max(1) as f64;
    let sigma2 = cost / dof;
    Ok(Mat::from_fn(|i, j| sigma2 * inv_scaled[(i, j)] / (d[i] * d[j]).sqrt()))
}

struct Problem<'a> {
    x: Vec<f64>,
    s: &'a [Complex64],
    f_ref: f64,
}

impl<'a> Problem<'a> {
    fn new(f: &[f64], s: &'a [Complex64], f_ref: f64) -> Self {
        Self {
            x: f.iter().map(|fk| (fk - f_ref) / f_ref).collect(),
            s,
            f_ref,
        }
    }

    fn encode(&self, g: &ResonanceFit) -> Vecp {
        let kappa = -2.0 * PI * self.f_ref * g.env_delay;
        Vecp::from_column_slice(&[
            g.f0 / self.f_ref - 1.0,
            g.qi.ln(),
            g.qc_star.ln(),
            g.phi,
            g.env_amplitude.ln(),
            wrap_phase(g.env_phase + kappa),
            kappa,
        ])
    }

    fn decode(&self, p: &Vecp) -> ResonanceFit {
        let tau = -p[6] / (2.0 * PI * self.f_ref);
        ResonanceFit {
            env_amplitude: p[4].exp(),
            env_phase: wrap_phase(p[5] - p[6]),
            env_delay: tau,
            ..ResonanceFit::ideal(
                self.f_ref * (1.0 + p[0]),
                p[1].exp(),
                p[2].exp(),
                wrap_phase(p[3]),
            )
        }
    }

    /// Model value and its derivatives with respect to every parameter.
    #[inline]
    fn eval(&self, p: &Vecp, x: f64, with_grad: bool) -> (Complex64, [Complex64; NP]) {
        let i = Complex64::i();
        let f0n = 1.0 + p[0];
        let qi = p[1].exp();
        let ratio = (p[1] - p[2]).exp();
        let u = 2.0 * qi * (x - p[0]) / f0n;
        let d = Complex64::new(1.0, u);
        let c = Complex64::from_polar(ratio, p[3]);
        let c_over_d = c / d;
        let m = 1.0 + c_over_d;
        let env = Complex64::from_polar(p[4].exp(), p[5] + p[6] * x);
        let s = env / m;
        let mut g = [Complex64::new(0.0, 0.0); NP];
        if with_grad {
            let ds_dm = -s / m;
            let c_over_d2 = c_over_d / d;
            let du_ddelta = -2.0 * qi * (1.0 + x) / (f0n * f0n);
            g[0] = ds_dm * (-c_over_d2 * i * du_ddelta);
            g[1] = ds_dm * c_over_d2;
            g[2] = ds_dm * (-c_over_d);
            g[3] = ds_dm * (i * c_over_d);
            g[4] = s;
            g[5] = i * s;
            g[6] = i * x * s;
        }
        (s, g)
    }

    fn cost(&self, p: &Vecp) -> f64 {
        self.x
            .iter()
            .zip(self.s)
            .map(|(x, s)| (self.eval(p, *x, false).0 - s).norm_sqr())
            .sum()
    }

    fn normal_equations(&self, p: &Vecp) -> (Mat, Vecp, f64) {
        let mut jtj = Mat::zeros();
        let mut jtr = Vecp::zeros();
        let mut cost = 0.0;
        for (x, s) in self.x.iter().zip(self.s) {
            let (model, g) = self.eval(p, *x, true);
            let r = model - s;
            cost += r.norm_sqr();
            for a in 0..NP {
                // Re(conj(g_a) r) sums the real and imaginary residual rows.
                jtr[a] += g[a].re * r.re + g[a].im * r.im;
                for b in a..NP {
                    jtj[(a, b)] += g[a].re * g[b].re + g[a].im * g[b].im;
                }
            }
        }
        for a in 0..NP {
            for b in 0..a {
                jtj[(a, b)] = jtj[(b, a)];
            }
        }
        (jtj, jtr, cost)
    }

    /// Propagates the internal covariance to (f0, Qi, Qc*, φ).
    fn core_covariance(&self, p: &Vecp, cov: &Mat) -> [[f64; 4]; 4] {
        let scale = [self.f_ref, p[1].exp(), p[2].exp(), 1.0];
        let mut out = [[0.0; 4]; 4];
        for a in 0..4 {
            for b in 0..4 {
                out[a][b] = scale[a] * scale[b] * cov[(a, b)];
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::resonance::{initial_guess, linewidth_grid, synthesize_trace};

    #[test]
    fn analytic_jacobian_matches_finite_differences() {
        let f: Vec<f64> = (0..5).map(|k| 6e9 + 2e3 * k as f64).collect();
        let s = vec![Complex64::new(0.0, 0.0); 5];
        let prob = Problem::new(&f, &s, 6.000004e9);
        let p = Vecp::from_column_slice(&[1e-7, 13.0, 12.5, 0.3, -0.2, 0.7, -1.5]);
        for x in &prob.x {
            let (_, g) = prob.eval(&p, *x, true);
            for a in 0..NP {
                let h = match a {
                    0 => 1e-9 * p[a].abs().max(1e-3),
                    6 => 1e-1,
                    _ => 1e-6 * p[a].abs().max(1e-3),
                };
                let mut up = p;
                up[a] += h;
                let mut dn = p;
                dn[a] -= h;
                let fd = (prob.eval(&up, *x, false).0 - prob.eval(&dn, *x, false).0) / (2.0 * h);
                let err = (fd - g[a]).norm() / g[a].norm().max(1e-12);
                assert!(err < 1e-5, "param {a}: analytic {} vs fd {fd}", g[a]);
            }
        }
    }

    #[test]
    fn encode_decode_round_trip() {
        let f = [6e9, 6.1e9];
        let s = [Complex64::new(1.0, 0.0); 2];
        let prob = Problem::new(&f, &s, 6.0000001e9);
        let fit = ResonanceFit::ideal(6e9, 1e6, 3e5, -0.4).with_environment(0.5, 1.2, 20e-9);
        let back = prob.decode(&prob.encode(&fit));
        assert!((back.f0 / fit.f0 - 1.0).abs() < 1e-15);
        assert!((back.qi / fit.qi - 1.0).abs() < 1e-12);
        assert!((back.env_delay - fit.env_delay).abs() < 1e-20);
        assert!(wrap_phase(back.env_phase - fit.env_phase).abs() < 1e-6);
    }

    #[test]
    fn noiseless_recovery() {
        let p = ResonanceFit::ideal(5.8e9, 2e6, 5e5, 0.1).with_environment(0.8, -2.0, 50e-9);
        let t = synthesize_trace(&p, &linewidth_grid(&p, 5.0, 401), 0.0, 0).unwrap();
        let fit = fit_trace(&t).unwrap();
        assert!((fit.f0 / p.f0 - 1.0).abs() < 1e-9);
        assert!((fit.qi / p.qi - 1.0).abs() < 1e-6);
        assert!((fit.qc_star / p.qc_star - 1.0).abs() < 1e-6);
        assert!((fit.phi - p.phi).abs() < 1e-6);
    }

    #[test]
    fn fit_never_worse_than_guess() {
        let p = ResonanceFit::ideal(6.2e9, 8e5, 4e5, -0.3).with_environment(1.3, 0.4, 10e-9);
        for seed in 0..5 {
            let t = synthesize_trace(&p, &linewidth_grid(&p, 5.0, 201), 2e-3, seed).unwrap();
            let guess = initial_guess(&t).unwrap();
            let fit = fit_trace(&t).unwrap();
            assert!(residual_rms(&t, &fit) <= residual_rms(&t, &guess));
            assert!((fit.residual_rms - residual_rms(&t, &fit)).abs() < 1e-12);
        }
    }

    #[test]
    fn noisy_recovery_within_one_percent() {
        let p = ResonanceFit::ideal(5.8e9, 2e6, 5e5, 0.1);
        let t = synthesize_trace(&p, &linewidth_grid(&p, 5.0, 401), 1e-3, 7).unwrap();
        let fit = fit_trace(&t).unwrap();
        assert!((fit.qi / p.qi - 1.0).abs() < 0.01, "Qi {}", fit.qi);
        assert!(fit.qi_stderr() > 0.0);
    }

    #[test]
    fn one_sided_trace_is_flagged() {
        let p = ResonanceFit::ideal(6e9, 1e6, 5e5, 0.5).with_environment(1.0, 0.3, 30e-9);
        let lw = p.linewidth();
        let f: Vec<f64> = (0..200).map(|k| p.f0 + 0.6 * lw + 0.05 * lw * k as f64).collect();
        let t = synthesize_trace(&p, &f, 1e-4, 3).unwrap();
        match fit_trace(&t) {
            Err(Error::Unidentifiable(_)) | Err(Error::NoResonance(_)) | Err(Error::FitDiverged { .. }) => {}
            Ok(fit) => {
                let rel = fit.qi_stderr() / fit.qi;
                assert!(rel > 0.1, "one-sided fit claims Qi to {rel:.2e}");
            }
            Err(e) => panic!("unexpected error {e}"),
        }
    }
}
