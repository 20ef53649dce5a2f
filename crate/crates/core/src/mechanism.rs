//! Branching mechanisms: the Laplace exponent ψ, its inverse φ, and the
//! stable-case closed forms for the jump measure of the inverse subordinator.
//!
//! ψ(λ) = α₀λ + ∫ (e^{-λℓ} - 1 + λℓ) π(dℓ) with no Brownian part. The
//! stable mechanism ψ(λ) = λ^α (1 < α < 2) is the one every simulation
//! entry point accepts; the other variants exist to exercise the analytic
//! plumbing (numeric inversion, drift handling) and are rejected by
//! samplers when they violate the infinite-variation assumption.

use crate::error::{Error, Result};
use crate::special::gamma;

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha.is_finite() && alpha > 1.0 && alpha < 2.0) {
        return Err(Error::domain(format!(
            "stable index must lie strictly inside (1, 2), got {alpha}"
        )));
    }
    Ok(())
}

fn check_lambda(lam: f64) -> Result<()> {
    if !lam.is_finite() || lam < 0.0 {
        return Err(Error::domain(format!(
            "argument must be finite and non-negative, got {lam}"
        )));
    }
    Ok(())
}

/// A branching mechanism ψ, the Laplace exponent of a spectrally positive
/// Lévy process with no Brownian part.
#[derive(Debug, Clone, PartialEq)]
pub enum BranchingMechanism {
    /// ψ(λ) = λ^α.
    Stable { alpha: f64 },
    /// ψ(λ) = α₀λ + λ^α.
    DriftedStable { alpha0: f64, alpha: f64 },
    /// ψ(λ) = α₀λ + Σ wᵢ (e^{-λℓᵢ} - 1 + λℓᵢ): a finite Lévy measure.
    ///
    /// Finite π violates the infinite-variation assumption, so this
    /// variant is valid only for exercising ψ/φ plumbing.
    AtomTest { alpha0: f64, atoms: Vec<(f64, f64)> },
}

impl BranchingMechanism {
    pub fn stable(alpha: f64) -> Result<Self> {
        check_alpha(alpha)?;
        Ok(BranchingMechanism::Stable { alpha })
    }

    pub fn drifted_stable(alpha0: f64, alpha: f64) -> Result<Self> {
        check_alpha(alpha)?;
        if !(alpha0.is_finite() && alpha0 >= 0.0) {
            return Err(Error::domain(format!("drift must be >= 0, got {alpha0}")));
        }
        Ok(BranchingMechanism::DriftedStable { alpha0, alpha })
    }

    pub fn atom_test(alpha0: f64, atoms: Vec<(f64, f64)>) -> Result<Self> {
        if !(alpha0.is_finite() && alpha0 >= 0.0) {
            return Err(Error::domain(format!("drift must be >= 0, got {alpha0}")));
        }
        for &(ell, weight) in &atoms {
            if !(ell.is_finite() && ell > 0.0 && weight.is_finite() && weight > 0.0) {
                return Err(Error::domain(format!(
                    "atoms must have positive mass and weight, got ({ell}, {weight})"
                )));
            }
        }
        if alpha0 == 0.0 && atoms.is_empty() {
            return Err(Error::domain(
                "atom-test mechanism with no drift and no atoms is degenerate (psi = 0)",
            ));
        }
        Ok(BranchingMechanism::AtomTest { alpha0, atoms })
    }

    /// True iff the infinite-variation assumption holds, i.e. the mechanism
    /// may be fed to tree simulation.
    pub fn validity_flag(&self) -> bool {
        !matches!(self, BranchingMechanism::AtomTest { .. })
    }

    /// The stable index, when the mechanism has one.
    pub fn alpha(&self) -> Option<f64> {
        match self {
            BranchingMechanism::Stable { alpha }
            | BranchingMechanism::DriftedStable { alpha, .. } => Some(*alpha),
            BranchingMechanism::AtomTest { .. } => None,
        }
    }

    /// ψ(λ). Convex, increasing, ψ(0) = 0.
    pub fn psi(&self, lam: f64) -> Result<f64> {
        check_lambda(lam)?;
        Ok(match self {
            BranchingMechanism::Stable { alpha } => lam.powf(*alpha),
            BranchingMechanism::DriftedStable { alpha0, alpha } => {
                alpha0 * lam + lam.powf(*alpha)
            }
            BranchingMechanism::AtomTest { alpha0, atoms } => {
                // exp_m1 keeps e^{-x} - 1 + x accurate down to the x²/2 scale.
                let jump: f64 = atoms
                    .iter()
                    .map(|&(ell, w)| w * ((-lam * ell).exp_m1() + lam * ell))
                    .sum();
                alpha0 * lam + jump
            }
        })
    }

    /// ψ'(λ). Non-decreasing; ψ'(0) = α₀.
    pub fn psi_prime(&self, lam: f64) -> Result<f64> {
        check_lambda(lam)?;
        Ok(match self {
            BranchingMechanism::Stable { alpha } => alpha * lam.powf(alpha - 1.0),
            BranchingMechanism::DriftedStable { alpha0, alpha } => {
                alpha0 + alpha * lam.powf(alpha - 1.0)
            }
            BranchingMechanism::AtomTest { alpha0, atoms } => {
                let jump: f64 = atoms
                    .iter()
                    .map(|&(ell, w)| w * ell * -(-lam * ell).exp_m1())
                    .sum();
                alpha0 + jump
            }
        })
    }

    /// φ(x), the functional inverse of ψ: the unique λ ≥ 0 with ψ(λ) = x.
    pub fn phi(&self, x: f64) -> Result<f64> {
        check_lambda(x)?;
        match self {
            BranchingMechanism::Stable { alpha } => Ok(x.powf(1.0 / alpha)),
            _ => self.invert_psi(x),
        }
    }

    /// φ'(λ) = 1/ψ'(φ(λ)), for λ > 0.
    pub fn phi_prime(&self, lam: f64) -> Result<f64> {
        if !lam.is_finite() || lam <= 0.0 {
            return Err(Error::domain(format!(
                "phi' requires a strictly positive argument, got {lam}"
            )));
        }
        match self {
            BranchingMechanism::Stable { alpha } => {
                Ok((1.0 / alpha) * lam.powf(1.0 / alpha - 1.0))
            }
            _ => Ok(1.0 / self.psi_prime(self.phi(lam)?)?),
        }
    }

    /// Safeguarded bisection + Newton for convex increasing ψ.
    fn invert_psi(&self, x: f64) -> Result<f64> {
        if x == 0.0 {
            return Ok(0.0);
        }
        // Initial bracket: for a drift term alpha0, psi(l) >= alpha0*l; the
        // +x^{1/2}+1 covers pure-jump growth up to alpha < 2.
        let alpha0 = match self {
            BranchingMechanism::DriftedStable { alpha0, .. }
            | BranchingMechanism::AtomTest { alpha0, .. } => *alpha0,
            BranchingMechanism::Stable { .. } => 0.0,
        };
        let mut hi = if alpha0 > 0.0 { x / alpha0 } else { 0.0 } + x.sqrt() + 1.0;
        let mut grow = 0;
        while self.psi(hi)? < x {
            hi *= 2.0;
            grow += 1;
            if grow > 200 {
                return Err(Error::Numeric(format!(
                    "failed to bracket phi({x}); psi may not reach the target"
                )));
            }
        }
        let mut lo = 0.0_f64;
        // Coarse bisection, then Newton polish.
        while hi - lo > 1e-3 * hi.max(1.0) {
            let mid = 0.5 * (lo + hi);
            if self.psi(mid)? < x {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let tol = 1e-12 * x.max(1.0);
        let mut lam = 0.5 * (lo + hi);
        for _ in 0..200 {
            let f = self.psi(lam)? - x;
            if f.abs() <= tol {
                return Ok(lam);
            }
            if f < 0.0 {
                lo = lam;
            } else {
                hi = lam;
            }
            let slope = self.psi_prime(lam)?;
            let newton = if slope > 0.0 { lam - f / slope } else { f64::NAN };
            lam = if newton.is_finite() && newton > lo && newton < hi {
                newton
            } else {
                0.5 * (lo + hi)
            };
        }
        Err(Error::Numeric(format!(
            "phi({x}) did not converge to tolerance {tol}"
        )))
    }
}

/// Closed-form constants of the stable case ψ(λ) = λ^α.
///
/// π*(dr) = (α Γ(1-1/α))^{-1} r^{-1-1/α} dr is the law of the excursion
/// length σ under the excursion measure, and c_α = α(α-1)/Γ(2-α)
/// normalizes the Lévy density of π so that ψ(λ) = λ^α.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StableConstants {
    pub alpha: f64,
    /// Γ(1 - 1/α).
    pub gamma_value: f64,
    /// c_α = α(α-1)/Γ(2-α).
    pub pi_density_const: f64,
}

impl StableConstants {
    pub fn new(alpha: f64) -> Result<Self> {
        check_alpha(alpha)?;
        let gamma_value = gamma(1.0 - 1.0 / alpha);
        let pi_density_const = alpha * (alpha - 1.0) / gamma(2.0 - alpha);
        debug_assert!(gamma_value > 0.0 && pi_density_const > 0.0);
        Ok(StableConstants {
            alpha,
            gamma_value,
            pi_density_const,
        })
    }

    fn check_positive(x: f64, what: &str) -> Result<()> {
        if !(x.is_finite() && x > 0.0) {
            return Err(Error::domain(format!("{what} must be > 0, got {x}")));
        }
        Ok(())
    }

    /// Tail of the excursion-length measure: π̄*(ε) = Γ(1-1/α)^{-1} ε^{-1/α}.
    pub fn pi_star_tail(&self, eps: f64) -> Result<f64> {
        Self::check_positive(eps, "eps")?;
        Ok(eps.powf(-1.0 / self.alpha) / self.gamma_value)
    }

    /// Density of π*: (α Γ(1-1/α))^{-1} r^{-1-1/α}.
    pub fn pi_star_density(&self, r: f64) -> Result<f64> {
        Self::check_positive(r, "r")?;
        Ok(r.powf(-1.0 - 1.0 / self.alpha) / (self.alpha * self.gamma_value))
    }

    /// Truncated first moment φ(ε) = ∫_(0,ε) r π*(dr)
    /// = ((α-1) Γ(1-1/α))^{-1} ε^{1-1/α}.
    pub fn varphi(&self, eps: f64) -> Result<f64> {
        Self::check_positive(eps, "eps")?;
        Ok(eps.powf(1.0 - 1.0 / self.alpha) / ((self.alpha - 1.0) * self.gamma_value))
    }

    /// Density of the branching Lévy measure π: c_α ℓ^{-1-α}.
    pub fn pi_density(&self, ell: f64) -> Result<f64> {
        Self::check_positive(ell, "ell")?;
        Ok(self.pi_density_const * ell.powf(-1.0 - self.alpha))
    }
}
