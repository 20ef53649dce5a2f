//! Mechanism identities: ψ∘φ inversion accuracy and the sublinear growth
//! of λ ↦ λ/ψ(λ).

use crate::error::Result;
use crate::harness::config::RunConfig;
use crate::harness::report::{inputs, CaseRecord};
use crate::mechanism::BranchingMechanism;

pub fn run(cfg: &RunConfig) -> Result<Vec<CaseRecord>> {
    let mut cases = Vec::new();
    let stable = BranchingMechanism::stable(cfg.alpha)?;
    let drifted = BranchingMechanism::drifted_stable(1.0, cfg.alpha)?;
    let atoms = BranchingMechanism::atom_test(0.5, vec![(1.0, 1.0), (0.1, 5.0)])?;

    for (name, mech) in [
        ("stable", &stable),
        ("drifted-stable", &drifted),
        ("atom-test", &atoms),
    ] {
        let mut worst = 0.0f64;
        for j in 0..=60 {
            let x = 10f64.powf(-3.0 + 0.1 * j as f64);
            let err = (mech.psi(mech.phi(x)?)? - x).abs() / x.max(1.0);
            worst = worst.max(err);
        }
        cases.push(CaseRecord::new(
            "mechanism",
            &format!("inverse-identity/{name}"),
            inputs(&[("grid_points", 61.0)]),
            worst,
            0.0,
            0.0,
            cfg.mech.tol_inverse,
        ));
    }

    // λ/ψ(λ) strictly decreasing along 10^k; its limit is 0 exactly when π
    // is infinite, so the threshold applies to the stable mechanism.
    for (name, mech) in [("stable", &stable), ("atom-test", &atoms)] {
        let mut violations = 0u32;
        let mut prev = f64::INFINITY;
        for k in 1..=8 {
            let lam = 10f64.powi(k);
            let ratio = lam / mech.psi(lam)?;
            if ratio >= prev {
                violations += 1;
            }
            prev = ratio;
        }
        cases.push(CaseRecord::new(
            "mechanism",
            &format!("psi-ratio-decreasing/{name}"),
            inputs(&[("k_max", 8.0)]),
            violations as f64,
            0.0,
            0.0,
            0.0,
        ));
    }

    let lam = 1e6;
    let ratio = lam / stable.psi(lam)?;
    cases.push(CaseRecord::new(
        "mechanism",
        "psi-ratio-threshold/stable",
        inputs(&[("lambda", lam)]),
        ratio,
        0.0,
        0.0,
        cfg.mech.ratio_threshold,
    ));

    Ok(cases)
}
