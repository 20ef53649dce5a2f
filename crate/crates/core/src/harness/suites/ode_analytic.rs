//! RK4 integration of the local-time ODE against its λ = 0 closed form.

use crate::error::Result;
use crate::harness::config::RunConfig;
use crate::harness::report::{inputs, CaseRecord};
use crate::mechanism::BranchingMechanism;
use crate::odelaw::{closed_form_w_lambda0, solve_w};

pub fn run(cfg: &RunConfig) -> Result<Vec<CaseRecord>> {
    let mech = BranchingMechanism::stable(cfg.alpha)?;
    let mut cases = Vec::new();

    for &gamma in &cfg.ode.gammas {
        let sol = solve_w(&mech, 0.0, gamma, cfg.ode.t_max, cfg.ode.step)?;
        let mut max_err = 0.0f64;
        for (t, w) in sol.t_grid.iter().zip(&sol.w) {
            let exact = closed_form_w_lambda0(cfg.alpha, gamma, *t)?;
            max_err = max_err.max((w - exact).abs());
        }
        cases.push(CaseRecord::new(
            "ode-analytic",
            &format!("max-error/gamma={gamma}"),
            inputs(&[("gamma", gamma), ("step", cfg.ode.step), ("t_max", cfg.ode.t_max)]),
            max_err,
            0.0,
            0.0,
            cfg.ode.tol,
        ));
    }

    // Observed convergence order on a smooth segment away from the clamp.
    let err_at = |h: f64| -> Result<f64> {
        let sol = solve_w(&mech, 0.0, 1.0, 1.0, h)?;
        Ok((sol.final_w() - closed_form_w_lambda0(cfg.alpha, 1.0, 1.0)?).abs())
    };
    let order = (err_at(0.02)? / err_at(0.01)?).log2();
    let mid = 0.5 * (cfg.ode.order_lo + cfg.ode.order_hi);
    let half = 0.5 * (cfg.ode.order_hi - cfg.ode.order_lo);
    cases.push(CaseRecord::new(
        "ode-analytic",
        "rk4-observed-order",
        inputs(&[("h_coarse", 0.02), ("h_fine", 0.01)]),
        order,
        0.0,
        mid,
        half,
    ));

    Ok(cases)
}
