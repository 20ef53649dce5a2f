//! Dislocation-measure identity: tree-side Monte Carlo of
//! N[σ e^{-λσ} Σ_{t ∈ T_{s*}} g(t) G(x(t))] against the subordinator-side
//! estimator of ∫ g e^{-tψ'(φ(λ))} dt ∫ μ(dr,dx) r e^{-λr} G(x).
//!
//! The tagged vertex is integrated out exactly: a dislocation at vertex a
//! is on the tagged path with probability S_a/T, so the per-tree functional
//! is e^{-λσ} Σ_a S_a g(depth(a)/c) G(children of a) / n0. The δ threshold
//! inside G keeps only macroscopic splits on both sides.

use crate::dislocation::{
    ngg_rhs_mc_with_variants, FunctionalSpec, IsConfig, LevelWeight, MassFunctional,
};
use crate::error::Result;
use crate::harness::calibrate::{shared_source, CalibrationSet};
use crate::harness::config::RunConfig;
use crate::harness::estimator::{run_blocks, SourcedTree};
use crate::harness::report::{inputs, CaseRecord};
use crate::harness::stats::Running;
use crate::mechanism::StableConstants;

pub fn run(cfg: &RunConfig, calib: &CalibrationSet) -> Result<Vec<CaseRecord>> {
    let n0 = cfg.ngg.n0;
    let local = super::ngh::calibration_at(cfg, calib, n0, cfg.ngg.recal_trees)?;
    let scale = local.depth_scale();
    let lam = cfg.ngg.lambda;
    let delta_vertices = cfg.ngg.delta * n0 as f64;
    let g_rate = cfg.ngg.g_rate;

    // Tree side.
    let source = shared_source(cfg, n0)?;
    let blocks = run_blocks(cfg.ngg.trees, cfg.workers, |i, acc: &mut Running| {
        match source.tree(i) {
            SourcedTree::Stats(stats) => {
                let sigma = stats.total_progeny() as f64 / n0 as f64;
                let damp = (-lam * sigma).exp();
                let mut total = 0.0;
                for v in 0..stats.total_progeny() as u32 {
                    let children = stats.children_of(v);
                    if children.len() < 2 {
                        continue;
                    }
                    let mut largest = 0u32;
                    let mut second = 0u32;
                    for &c in children {
                        let s = stats.subtree_size[c as usize];
                        if s > largest {
                            second = largest;
                            largest = s;
                        } else if s > second {
                            second = s;
                        }
                    }
                    if (second as f64) < delta_vertices {
                        continue;
                    }
                    let t_event = stats.depth[v as usize] as f64 / scale;
                    total += stats.subtree_size[v as usize] as f64 * (-g_rate * t_event).exp();
                }
                acc.push(damp * total / n0 as f64);
            }
            SourcedTree::Overflow => acc.push(0.0),
        }
    });
    let mut run = Running::default();
    for b in &blocks {
        run.merge(b);
    }
    // Dislocation events sit on the generation lattice, so the level
    // integral is a geometric sum with ratio x = e^{-(a+ψ'(φ(λ)))/c};
    // Σ x^k = 1/(1-x) versus ∫ x^t dt = 1/(-ln x). The exact conversion for
    // exponential integrands is the factor (-ln x)/(1-x) applied below.
    let mech = crate::mechanism::BranchingMechanism::stable(cfg.alpha)?;
    let level_rate = g_rate + mech.psi_prime(mech.phi(lam)?)?;
    let x = (-level_rate / scale).exp();
    let lattice_to_level = (1.0 - x) / level_rate * scale;
    let tree_value = local.c_n * run.mean() * lattice_to_level;
    let tree_se = tree_value
        * (run.rel_se().powi(2) + local.diagnostics.c_n_rel_se.powi(2))
            .sqrt();

    // Subordinator side with shared-randomness stability variants.
    let constants = StableConstants::new(cfg.alpha)?;
    let spec = FunctionalSpec {
        g: LevelWeight::ExpDecay { rate: g_rate },
        big_g: MassFunctional::SecondMassIndicator { delta: cfg.ngg.delta },
        lam,
    };
    let is_cfg = IsConfig {
        v_min: cfg.ngg.v_min,
        v_split: cfg.ngg.v_split,
        v_max: cfg.ngg.v_max,
        proposal_exponent: 1.0 + cfg.alpha,
        samples: cfg.ngg.samples,
        split_fraction: cfg.ngg.split_fraction,
        r_min: cfg.ngg.r_min_factor * cfg.ngg.delta,
        rel_stderr_cap: 0.05,
    };
    let variants = ngg_rhs_mc_with_variants(&constants, &spec, &is_cfg, cfg.seed, "ngg-sub")?;
    let sub = &variants.base;

    let combined = (tree_se * tree_se + sub.stderr * sub.stderr).sqrt();
    let tol = (cfg.ngg.tol_se * combined).min(cfg.ngg.tol_rel * sub.value.abs());
    let mut inp = inputs(&[
        ("lambda", lam),
        ("delta", cfg.ngg.delta),
        ("g_rate", g_rate),
        ("n0", n0 as f64),
        ("trees", cfg.ngg.trees as f64),
        ("samples", sub.samples as f64),
        ("tree_stderr", tree_se),
        ("sub_stderr", sub.stderr),
        ("bias_v_tail", sub.bias_bound_v_tail),
        ("bias_v_min", sub.bias_bound_v_min),
        ("bias_r_min", sub.bias_bound_r_min),
    ]);
    if let Some(w) = &sub.warning {
        inp.insert(format!("warning_len_{}", w.len()), 1.0);
    }
    let mut cases = vec![CaseRecord::new(
        "ngg",
        "tree-vs-subordinator",
        inp,
        tree_value,
        combined,
        sub.value,
        tol,
    )];

    let half = &variants.r_min_half;
    cases.push(CaseRecord::new(
        "ngg",
        "stable-under-rmin-halving",
        inputs(&[
            ("r_min", is_cfg.r_min),
            ("paired_diff_se", variants.diff_r_min_se),
        ]),
        half.value,
        half.stderr,
        sub.value,
        (sub.stderr * sub.stderr + half.stderr * half.stderr).sqrt(),
    ));
    let wide = &variants.widened;
    cases.push(CaseRecord::new(
        "ngg",
        "stable-under-window-widening",
        inputs(&[
            ("v_min", is_cfg.v_min),
            ("v_max", is_cfg.v_max),
            ("window_diff_se", variants.diff_window_se),
        ]),
        wide.value,
        wide.stderr,
        sub.value,
        (sub.stderr * sub.stderr + wide.stderr * wide.stderr).sqrt(),
    ));
    Ok(cases)
}
