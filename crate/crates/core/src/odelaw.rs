//! The ODE characterizing the Laplace functional of the local time:
//! w'(t) = λ - ψ(φ(λ) + w(t)), w(0) = γ.
//!
//! 0 is the unique fixed point (ψ(φ(λ)) = λ), w is non-increasing, and
//! v = w + φ(λ) solves v' = λ - ψ(v). For λ = 0 and a stable mechanism the
//! equation w' = -w^α integrates in closed form, which serves as the
//! analytic oracle for the integrator.

use crate::error::{Error, Result};
use crate::mechanism::BranchingMechanism;

/// Fixed-step RK4 solution of the w equation.
#[derive(Debug, Clone)]
pub struct OdeSolution {
    pub t_grid: Vec<f64>,
    pub w: Vec<f64>,
    pub lambda: f64,
    pub gamma: f64,
    pub step: f64,
    /// φ(λ), so that v(t) = w(t) + φ(λ).
    pub phi_lambda: f64,
}

impl OdeSolution {
    /// v(t) = w(t) + φ(λ) on the grid.
    pub fn v(&self) -> Vec<f64> {
        self.w.iter().map(|w| w + self.phi_lambda).collect()
    }

    /// Solution value at the last grid point.
    pub fn final_w(&self) -> f64 {
        *self.w.last().unwrap()
    }

    /// Linear interpolation of w at time t inside the grid.
    pub fn w_at(&self, t: f64) -> f64 {
        let h = self.step;
        let x = (t / h).clamp(0.0, (self.w.len() - 1) as f64);
        let i = (x.floor() as usize).min(self.w.len() - 2);
        let f = x - i as f64;
        self.w[i] * (1.0 - f) + self.w[i + 1] * f
    }
}

fn rk4_step<F: Fn(f64) -> Result<f64>>(f: &F, w: f64, h: f64) -> Result<f64> {
    let k1 = f(w)?;
    let k2 = f(w + 0.5 * h * k1)?;
    let k3 = f(w + 0.5 * h * k2)?;
    let k4 = f(w + h * k3)?;
    Ok(w + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4))
}

/// Integrate w' = λ - ψ(φ(λ) + w) from w(0) = γ with classical RK4,
/// clamping at the fixed point 0 from below.
pub fn solve_w(
    mech: &BranchingMechanism,
    lam: f64,
    gamma: f64,
    t_max: f64,
    step: f64,
) -> Result<OdeSolution> {
    if !(step > 0.0 && step.is_finite()) {
        return Err(Error::config(format!("step must be > 0, got {step}")));
    }
    if !(t_max > 0.0 && t_max.is_finite()) {
        return Err(Error::config(format!("t_max must be > 0, got {t_max}")));
    }
    if lam < 0.0 || gamma < 0.0 {
        return Err(Error::domain("lambda and gamma must be >= 0"));
    }
    let phi_lambda = mech.phi(lam)?;
    // Stages may probe slightly below the fixed point; the state itself is
    // clamped, so evaluating the field at max(w, 0) is exact on-trajectory.
    let field = |w: f64| -> Result<f64> { Ok(lam - mech.psi(phi_lambda + w.max(0.0))?) };
    let n = (t_max / step).ceil() as usize;
    let mut t_grid = Vec::with_capacity(n + 1);
    let mut w_vals = Vec::with_capacity(n + 1);
    let mut w = gamma;
    t_grid.push(0.0);
    w_vals.push(w);
    for i in 1..=n {
        w = rk4_step(&field, w, step)?.max(0.0);
        t_grid.push(i as f64 * step);
        w_vals.push(w);
    }
    Ok(OdeSolution {
        t_grid,
        w: w_vals,
        lambda: lam,
        gamma,
        step,
        phi_lambda,
    })
}

/// Jointly integrate w and its sensitivity to the boundary value:
/// m' = -ψ'(φ(λ) + w) m, m(0) = 1.
///
/// At γ = 0 this gives m(t) = exp(-t ψ'(φ(λ))), the damped local-time mean
/// used to calibrate the local-time scale.
pub fn solve_w_with_sensitivity(
    mech: &BranchingMechanism,
    lam: f64,
    gamma: f64,
    t_max: f64,
    step: f64,
) -> Result<(OdeSolution, Vec<f64>)> {
    if !(step > 0.0 && step.is_finite()) {
        return Err(Error::config(format!("step must be > 0, got {step}")));
    }
    if !(t_max > 0.0 && t_max.is_finite()) {
        return Err(Error::config(format!("t_max must be > 0, got {t_max}")));
    }
    let phi_lambda = mech.phi(lam)?;
    let n = (t_max / step).ceil() as usize;
    let mut t_grid = Vec::with_capacity(n + 1);
    let mut w_vals = Vec::with_capacity(n + 1);
    let mut m_vals = Vec::with_capacity(n + 1);
    let (mut w, mut m) = (gamma, 1.0);
    t_grid.push(0.0);
    w_vals.push(w);
    m_vals.push(m);
    let f_w = |w: f64| -> Result<f64> { Ok(lam - mech.psi(phi_lambda + w.max(0.0))?) };
    for i in 1..=n {
        // RK4 on the coupled system (w, m).
        let k1w = f_w(w)?;
        let k1m = -mech.psi_prime(phi_lambda + w.max(0.0))? * m;
        let k2w = f_w(w + 0.5 * step * k1w)?;
        let k2m = -mech.psi_prime(phi_lambda + (w + 0.5 * step * k1w).max(0.0))?
            * (m + 0.5 * step * k1m);
        let k3w = f_w(w + 0.5 * step * k2w)?;
        let k3m = -mech.psi_prime(phi_lambda + (w + 0.5 * step * k2w).max(0.0))?
            * (m + 0.5 * step * k2m);
        let k4w = f_w(w + step * k3w)?;
        let k4m = -mech.psi_prime(phi_lambda + (w + step * k3w).max(0.0))? * (m + step * k3m);
        w = (w + step / 6.0 * (k1w + 2.0 * k2w + 2.0 * k3w + k4w)).max(0.0);
        m += step / 6.0 * (k1m + 2.0 * k2m + 2.0 * k3m + k4m);
        t_grid.push(i as f64 * step);
        w_vals.push(w);
        m_vals.push(m);
    }
    Ok((
        OdeSolution {
            t_grid,
            w: w_vals,
            lambda: lam,
            gamma,
            step,
            phi_lambda,
        },
        m_vals,
    ))
}

/// Closed form for the stable case at λ = 0:
/// w(t) = (γ^{1-α} + (α-1) t)^{-1/(α-1)}.
pub fn closed_form_w_lambda0(alpha: f64, gamma: f64, t: f64) -> Result<f64> {
    if !(alpha > 1.0 && alpha < 2.0) {
        return Err(Error::domain(format!("alpha must lie in (1,2), got {alpha}")));
    }
    if !(gamma > 0.0) {
        return Err(Error::domain(format!("gamma must be > 0, got {gamma}")));
    }
    if t < 0.0 {
        return Err(Error::domain(format!("t must be >= 0, got {t}")));
    }
    Ok((gamma.powf(1.0 - alpha) + (alpha - 1.0) * t).powf(-1.0 / (alpha - 1.0)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn stable() -> BranchingMechanism {
        BranchingMechanism::stable(1.5).unwrap()
    }

    #[test]
    fn gamma_zero_is_fixed_point() {
        let sol = solve_w(&stable(), 0.7, 0.0, 2.0, 1e-3).unwrap();
        assert!(sol.w.iter().all(|&w| w == 0.0));
    }

    #[test]
    fn closed_form_values() {
        assert_relative_eq!(
            closed_form_w_lambda0(1.5, 1.0, 1.0).unwrap(),
            4.0 / 9.0,
            max_relative = 1e-14
        );
        assert_relative_eq!(
            closed_form_w_lambda0(1.5, 2.0, 0.0).unwrap(),
            2.0,
            max_relative = 1e-14
        );
        // Decay to zero.
        assert!(closed_form_w_lambda0(1.5, 1.0, 1e8).unwrap() < 1e-3);
        assert!(closed_form_w_lambda0(1.5, 0.0, 1.0).is_err());
    }

    #[test]
    fn rk4_matches_closed_form_at_lambda0() {
        for &gamma in &[0.5, 1.0, 2.0] {
            let sol = solve_w(&stable(), 0.0, gamma, 5.0, 1e-3).unwrap();
            let mut max_err = 0.0f64;
            for (t, w) in sol.t_grid.iter().zip(&sol.w) {
                let exact = closed_form_w_lambda0(1.5, gamma, *t).unwrap();
                max_err = max_err.max((w - exact).abs());
            }
            assert!(max_err <= 1e-6, "gamma={gamma}: max err {max_err}");
        }
    }

    #[test]
    fn observed_order_is_four() {
        // Error at t=1 against the closed form, for two step sizes on a
        // smooth segment (w stays well above the clamp).
        let err_at = |h: f64| -> f64 {
            let sol = solve_w(&stable(), 0.0, 1.0, 1.0, h).unwrap();
            (sol.final_w() - closed_form_w_lambda0(1.5, 1.0, 1.0).unwrap()).abs()
        };
        let order = (err_at(0.02) / err_at(0.01)).log2();
        assert!((3.5..=4.5).contains(&order), "observed order {order}");
    }

    #[test]
    fn w_decreases_strictly_for_positive_gamma() {
        for &(lam, gamma) in &[(0.0, 1.0), (0.5, 0.3), (2.0, 2.0)] {
            let sol = solve_w(&stable(), lam, gamma, 3.0, 1e-3).unwrap();
            assert!(sol.final_w() < sol.w[0]);
            for w in sol.w.windows(2) {
                assert!(w[1] <= w[0] + 1e-15);
            }
        }
    }

    #[test]
    fn residual_against_field_at_midpoints() {
        // (w_{i+1} - w_i)/h vs the field at the midpoint value; both sides
        // are O(h^2) accurate, so with h = 1e-4 the residual sits below 1e-8.
        let mech = stable();
        let lam = 0.5;
        let sol = solve_w(&mech, lam, 1.0, 1.0, 1e-4).unwrap();
        let phi = mech.phi(lam).unwrap();
        for i in (0..sol.w.len() - 1).step_by(97) {
            let slope = (sol.w[i + 1] - sol.w[i]) / sol.step;
            let mid = 0.5 * (sol.w[i] + sol.w[i + 1]);
            let field = lam - mech.psi(phi + mid).unwrap();
            assert!((slope - field).abs() <= 1e-8, "residual at i={i}");
        }
    }

    #[test]
    fn v_equation_consistency() {
        // v = w + φ(λ) must satisfy v' = λ - ψ(v); check the endpoints of a
        // coarse grid by finite differences.
        let mech = stable();
        let lam = 1.0;
        let sol = solve_w(&mech, lam, 0.7, 2.0, 1e-4).unwrap();
        let v = sol.v();
        for i in (1..v.len() - 1).step_by(1999) {
            let slope = (v[i + 1] - v[i - 1]) / (2.0 * sol.step);
            let rhs = lam - mech.psi(v[i]).unwrap();
            assert!((slope - rhs).abs() < 1e-6);
        }
    }

    #[test]
    fn sensitivity_matches_exponential_at_gamma_zero() {
        let mech = stable();
        let lam = 1.0;
        let rate = mech.psi_prime(mech.phi(lam).unwrap()).unwrap();
        let (_, m) = solve_w_with_sensitivity(&mech, lam, 0.0, 1.0, 1e-4).unwrap();
        let exact = (-rate * 1.0f64).exp();
        assert_relative_eq!(*m.last().unwrap(), exact, max_relative = 1e-10);
    }

    #[test]
    fn config_errors() {
        assert!(solve_w(&stable(), 1.0, 1.0, 1.0, 0.0).is_err());
        assert!(solve_w(&stable(), 1.0, 1.0, -1.0, 0.1).is_err());
        assert!(solve_w(&stable(), -1.0, 1.0, 1.0, 0.1).is_err());
    }
}
