//! Local-time normalization: the calibrated damped local-time mean against
//! its analytic value from the linearized w-equation. For a stable
//! mechanism (no drift) the normalized profile equals e^{-α₀ t} = 1 at
//! every level; one level fixes the scale, the others are held out.

use crate::error::{Error, Result};
use crate::harness::calibrate::{collect_layer_moments, shared_source, CalibrationSet};
use crate::harness::config::RunConfig;
use crate::harness::report::{inputs, CaseRecord};
use crate::mechanism::BranchingMechanism;
use crate::odelaw::solve_w_with_sensitivity;

pub fn run(cfg: &RunConfig, calib: &CalibrationSet) -> Result<Vec<CaseRecord>> {
    if cfg.n0 != calib.n0 {
        return Err(Error::config(format!(
            "ode-mc runs at the calibration resolution (config n0 {}, calibration n0 {})",
            cfg.n0, calib.n0
        )));
    }
    let mech = BranchingMechanism::stable(cfg.alpha)?;
    let source = shared_source(cfg, cfg.n0)?;
    let moments =
        collect_layer_moments(&source, cfg.ode_mc.trees, cfg.n0, cfg.lambda0, cfg.workers);
    let scale = calib.depth_scale();
    let layer_to_level = calib.c_n * calib.c_l * scale / cfg.n0 as f64;

    let mut cases = Vec::new();
    for &t in &cfg.ode_mc.t {
        // Damped local-time mean via the boundary sensitivity of w.
        let steps = (t / 1e-4).round().max(8.0);
        let (_, m_vals) = solve_w_with_sensitivity(&mech, cfg.lambda0, 0.0, t, t / steps)?;
        let m_t = *m_vals.last().unwrap();

        let x = t * scale;
        let k0 = x.floor() as usize;
        let f = x - k0 as f64;
        let layer = moments.layer_at(x)?;
        let ratio = layer_to_level * layer / m_t;
        let rel =
            moments.rel_se_layer(k0) * (1.0 - f) + moments.rel_se_layer(k0 + 1) * f;
        let stderr = ratio * (rel * rel + calib.diagnostics.c_n_rel_se.powi(2)).sqrt();
        let mut inp = inputs(&[
            ("t", t),
            ("trees", cfg.ode_mc.trees as f64),
            ("lambda0", cfg.lambda0),
            ("damped_mean", m_t),
        ]);
        if (t - calib.t_ref).abs() < 1e-12 {
            inp.insert("calibration_level".into(), 1.0);
        }
        cases.push(CaseRecord::new(
            "ode-mc",
            &format!("t={t}"),
            inp,
            ratio,
            stderr,
            1.0,
            cfg.ode_mc.tol,
        ));
    }
    Ok(cases)
}
