//! Small-fragment limits in the stable case: Γ(1-1/α) ε^{1/α} N_ε(t) and
//! (α-1) Γ(1-1/α) ε^{1/α-1} M_ε(t) both estimate the local time at level t;
//! the suite compares them per tree against the windowed occupation
//! estimator and requires the signed mean relative error to stay small.
//!
//! The ε decade must be small on two scales at once: thresholds need
//! enough vertices for the discrete subtree tail to reach its stable form,
//! while ε has to stay microscopic relative to the conditioned mass, since
//! the count limit carries a finite-ε correction of order ε^{1-1/α}/L from
//! the unit-mass constraint. The defaults therefore run at a finer
//! resolution than the global one.

use super::ngh::calibration_at;
use super::poisson_counts::{conditioned_source, observation_layer};
use crate::error::{Error, Result};
use crate::harness::calibrate::CalibrationSet;
use crate::harness::config::RunConfig;
use crate::harness::estimator::run_blocks;
use crate::harness::report::{inputs, CaseRecord};
use crate::harness::stats::Running;
use crate::mechanism::StableConstants;

pub fn run(cfg: &RunConfig, calib: &CalibrationSet) -> Result<Vec<CaseRecord>> {
    let n0 = cfg.smallfrag.n0;
    let local = calibration_at(cfg, calib, n0, cfg.smallfrag.recal_trees)?;
    let constants = StableConstants::new(cfg.alpha)?;
    let source = conditioned_source(cfg, "ctrees-smallfrag", n0 as usize)?;
    let k_star = observation_layer(
        &source,
        cfg.smallfrag.trees.min(100),
        cfg.smallfrag.level_frac,
    )?;
    let factors = cfg.smallfrag.eps_factors.clone();
    let n0_f = n0 as f64;
    // Single-layer occupation estimator at the same lattice level as the
    // fragment roots.
    let l_scale = local.c_l * local.depth_scale() / n0_f;

    #[derive(Default)]
    struct Acc {
        n_err: Vec<Running>,
        m_err: Vec<Running>,
        skipped: u64,
        err: Option<String>,
    }
    let nf = factors.len();
    let alpha = cfg.alpha;
    let gamma_v = constants.gamma_value;
    let blocks = run_blocks(cfg.smallfrag.trees, cfg.workers, |i, acc: &mut Acc| {
        if acc.err.is_some() {
            return;
        }
        if acc.n_err.is_empty() {
            acc.n_err = vec![Running::default(); nf];
            acc.m_err = vec![Running::default(); nf];
        }
        match source.tree(i) {
            Ok(stats) => {
                let z = stats.depth_count(k_star) as f64;
                if z == 0.0 {
                    acc.skipped += 1;
                    return;
                }
                let l_hat = l_scale * z;
                for (j, &f) in factors.iter().enumerate() {
                    let eps = f as f64 / n0_f;
                    let mut n_eps = 0u64;
                    let mut m_eps = 0.0f64;
                    for &v in stats.vertices_at_depth(k_star) {
                        let s = stats.subtree_size[v as usize];
                        if s >= f {
                            n_eps += 1;
                        }
                        if s <= f {
                            m_eps += s as f64 / n0_f;
                        }
                    }
                    let x_n = gamma_v * eps.powf(1.0 / alpha) * n_eps as f64;
                    let x_m =
                        (alpha - 1.0) * gamma_v * eps.powf(1.0 / alpha - 1.0) * m_eps;
                    acc.n_err[j].push((x_n - l_hat) / l_hat);
                    acc.m_err[j].push((x_m - l_hat) / l_hat);
                }
            }
            Err(e) => acc.err = Some(e.to_string()),
        }
    });
    let mut n_err = vec![Running::default(); nf];
    let mut m_err = vec![Running::default(); nf];
    let mut skipped = 0;
    for b in &blocks {
        if let Some(e) = &b.err {
            return Err(Error::Sampling(e.clone()));
        }
        for j in 0..nf {
            n_err[j].merge(&b.n_err[j]);
            m_err[j].merge(&b.m_err[j]);
        }
        skipped += b.skipped;
    }

    let mut cases = Vec::new();
    for (j, &f) in factors.iter().enumerate() {
        let eps = f as f64 / n0_f;
        for (kind, run) in [("count", &n_err[j]), ("mass", &m_err[j])] {
            cases.push(CaseRecord::new(
                "small-fragments",
                &format!("{kind}/eps={eps}"),
                inputs(&[
                    ("eps", eps),
                    ("eps_vertices", f as f64),
                    ("n0", n0_f),
                    ("k_star", k_star as f64),
                    ("trees", run.n as f64),
                    ("skipped", skipped as f64),
                ]),
                run.mean(),
                run.se(),
                0.0,
                cfg.smallfrag.tol,
            ));
        }
    }
    Ok(cases)
}
