use std::f64::consts::PI;

use num_complex::Complex64;
use proptest::prelude::*;
use tlsloss::resonance::*;
use tlsloss::Error;

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

fn core_close(a: &ResonanceFit, b: &ResonanceFit, tol: f64) -> bool {
    rel(a.f0, b.f0) < tol && rel(a.qi, b.qi) < tol && rel(a.qc_star, b.qc_star) < tol && (a.phi - b.phi).abs() < tol
}

fn params() -> impl Strategy<Value = ResonanceFit> {
    (4e9..8e9f64, 1e5..5e6f64, 1e5..2e6f64, -1.0..1.0f64, 0.1..2.0f64, -PI..PI, 0.0..50e-9f64).prop_map(
        |(f0, qi, qc, phi, a, theta, tau)| ResonanceFit::ideal(f0, qi, qc, phi).with_environment(a, theta, tau),
    )
}

#[test]
fn on_resonance_identity_is_exact() {
    for (qi, qc, phi) in [(1e6, 1e6, 0.0), (3e5, 7e5, 0.4), (2e6, 1e5, -0.9)] {
        let z = model_inverse_s21(6e9, qi, qc, phi, 6e9).unwrap();
        assert_eq!(z, Complex64::new(1.0, 0.0) + Complex64::from_polar(qi / qc, phi));
    }
}

#[test]
fn symmetric_dip_is_deepest_at_f0() {
    let p = ResonanceFit::ideal(6e9, 8e5, 3e5, 0.0);
    let f = linewidth_grid(&p, 10.0, 4001);
    let k = f
        .iter()
        .enumerate()
        .min_by(|a, b| p.s21_at(*a.1).norm().total_cmp(&p.s21_at(*b.1).norm()))
        .unwrap()
        .0;
    assert_eq!(k, 2000);
    assert!((f[k] - 6e9).abs() < 1e-3);
}

#[test]
fn noiseless_synthesis_is_exact_model() {
    let p = ResonanceFit::ideal(5e9, 1e6, 4e5, 0.2);
    let f = linewidth_grid(&p, 5.0, 101);
    let t = synthesize_trace(&p, &f, 0.0, 1).unwrap();
    for (fk, s) in f.iter().zip(t.s21()) {
        let inv = model_inverse_s21(5e9, 1e6, 4e5, 0.2, *fk).unwrap();
        assert!((s * inv - 1.0).norm() < 1e-14);
    }
}

#[test]
fn deep_dip_noisy_trace_recovers_qi() {
    let p = ResonanceFit::ideal(5.8e9, 2e6, 5e5, 0.1);
    let f = linewidth_grid(&p, 5.0, 401);
    let fit = fit_trace(&synthesize_trace(&p, &f, 1e-3, 7).unwrap()).unwrap();
    assert!(rel(fit.qi, 2e6) < 0.01);
}

#[test]
fn reported_uncertainty_covers_truth() {
    let p = ResonanceFit::ideal(5.8e9, 2e6, 5e5, 0.1);
    let f = linewidth_grid(&p, 5.0, 401);
    let covered = (0..100u64)
        .filter(|seed| {
            let fit = fit_trace(&synthesize_trace(&p, &f, 1e-3, 1000 + seed).unwrap()).unwrap();
            (fit.qi - p.qi).abs() <= 3.0 * fit.qi_stderr()
        })
        .count();
    assert!(covered >= 99, "{covered}/100");
}

#[test]
fn fit_improves_on_guess() {
    let p = ResonanceFit::ideal(6.2e9, 4e5, 9e5, -0.3).with_environment(0.7, 1.0, 20e-9);
    let f = linewidth_grid(&p, 6.0, 301);
    let t = synthesize_trace(&p, &f, 2e-3, 3).unwrap();
    let guess = initial_guess(&t).unwrap();
    let fit = fit_trace(&t).unwrap();
    assert!(fit.residual_rms <= residual_rms(&t, &guess));
    fit.validate().unwrap();
}

#[test]
fn flat_trace_has_no_resonance() {
    let f: Vec<f64> = (0..64).map(|k| 6e9 + 1e3 * k as f64).collect();
    let t = ComplexTrace::new(f, vec![Complex64::new(1.0, 0.0); 64]).unwrap();
    assert!(matches!(fit_trace(&t), Err(Error::NoResonance(_))));
}

#[test]
fn one_sided_trace_is_flagged() {
    let p = ResonanceFit::ideal(6e9, 1e6, 1e6, 0.3);
    let f: Vec<f64> = linewidth_grid(&p, 5.0, 401).into_iter().filter(|f| *f > 6e9 + p.linewidth()).collect();
    let t = synthesize_trace(&p, &f, 1e-3, 5).unwrap();
    match fit_trace(&t) {
        Err(Error::Unidentifiable(_)) | Err(Error::NoResonance(_)) | Err(Error::FitDiverged { .. }) => {}
        Ok(fit) => assert!(fit.qi_stderr() / fit.qi > 0.1, "one-sided fit claims Qi = {} ± {}", fit.qi, fit.qi_stderr()),
        Err(e) => panic!("unexpected error {e}"),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn noiseless_round_trip(p in params()) {
        let f = linewidth_grid(&p, 5.0, 401);
        let fit = fit_trace(&synthesize_trace(&p, &f, 0.0, 0).unwrap()).unwrap();
        prop_assert!(core_close(&fit, &p, 1e-6), "{fit:?}");
    }

    #[test]
    fn complex_scaling_only_moves_environment(
        p in params(), mag in 0.01..100.0f64, arg in -PI..PI, seed in 0u64..1000,
    ) {
        let f = linewidth_grid(&p, 5.0, 201);
        let t = synthesize_trace(&p, &f, 1e-3, seed).unwrap();
        let base = fit_trace(&t).unwrap();
        let scaled = fit_trace(&t.scaled(Complex64::from_polar(mag, arg))).unwrap();
        prop_assert!(core_close(&scaled, &base, 1e-9), "{base:?}\n{scaled:?}");
        prop_assert!(rel(scaled.env_amplitude, base.env_amplitude * mag) < 1e-6);
    }

    #[test]
    fn sample_order_does_not_matter(p in params(), seed in 0u64..1000) {
        let f = linewidth_grid(&p, 5.0, 201);
        let t = synthesize_trace(&p, &f, 1e-3, seed).unwrap();
        let reversed: Vec<(f64, Complex64)> =
            t.frequencies().iter().copied().zip(t.s21().iter().copied()).rev().collect();
        let a = fit_trace(&t).unwrap();
        let b = fit_trace(&ComplexTrace::from_samples(reversed).unwrap()).unwrap();
        prop_assert!(core_close(&a, &b, 1e-12));
    }

    #[test]
    fn same_seed_same_trace(p in params(), seed in any::<u64>()) {
        let f = linewidth_grid(&p, 5.0, 51);
        prop_assert_eq!(synthesize_trace(&p, &f, 1e-3, seed).unwrap(), synthesize_trace(&p, &f, 1e-3, seed).unwrap());
    }
}
