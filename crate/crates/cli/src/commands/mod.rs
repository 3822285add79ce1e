pub mod budget;
pub mod fit;
pub mod participation;
pub mod ratio;
pub mod regress;
pub mod sweep;
pub mod synth;

use serde_json::{json, Value};
use tlsloss::resonance::ResonanceFit;

/// Report fields for a resonance fit.
pub fn fit_fields(fit: &ResonanceFit) -> Value {
    json!({
        "f0_hz": fit.f0,
        "f0_stderr_hz": fit.f0_stderr(),
        "qi_dimensionless": fit.qi,
        "qi_stderr_dimensionless": fit.qi_stderr(),
        "qc_star_dimensionless": fit.qc_star,
        "qc_star_stderr_dimensionless": fit.qc_star_stderr(),
        "phi_rad": fit.phi,
        "phi_stderr_rad": fit.phi_stderr(),
        "loaded_q_dimensionless": fit.loaded_q(),
        "env_amplitude_dimensionless": fit.env_amplitude,
        "env_phase_rad": fit.env_phase,
        "env_delay_s": fit.env_delay,
        "residual_rms_dimensionless": fit.residual_rms,
        "iterations_count": fit.n_iterations,
        "warnings": fit.warnings,
    })
}

/// Merge two JSON objects.
pub fn merge(mut a: Value, b: Value) -> Value {
    if let (Value::Object(x), Value::Object(y)) = (&mut a, b) {
        x.extend(y);
    }
    a
}
