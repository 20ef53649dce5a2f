//! The fragmentation property, tested distributionally: given its mass, the
//! largest fragment at level t evolves like a fresh tree of that mass, so
//! the law of its largest sub-fragment one step later must match freshly
//! simulated trees of matching size. Two-sample KS per mass bucket.

use super::poisson_counts::conditioned_source;
use crate::error::{Error, Result};
use crate::harness::calibrate::CalibrationSet;
use crate::harness::config::RunConfig;
use crate::harness::estimator::run_blocks;
use crate::harness::report::{inputs, CaseRecord};
use crate::harness::stats::ks_two_sample;
use crate::rng::stream;
use crate::treesim::{analyze, sample_tree_conditioned, OffspringLaw, TreeStats};

/// Largest subtree size among vertices at `depth` within the preorder range
/// [root_idx, root_idx + span).
fn largest_at_depth_within(stats: &TreeStats, depth: u32, root_idx: u32, span: u32) -> u32 {
    stats
        .vertices_at_depth(depth)
        .iter()
        .filter(|&&v| v >= root_idx && v < root_idx + span)
        .map(|&v| stats.subtree_size[v as usize])
        .max()
        .unwrap_or(0)
}

pub fn run(cfg: &RunConfig, calib: &CalibrationSet) -> Result<Vec<CaseRecord>> {
    if cfg.n0 != calib.n0 {
        return Err(Error::config(
            "frag-property conditions trees on m = n0 at the calibration resolution",
        ));
    }
    let map = calib.level_map()?;
    let d1 = map.depth_of(cfg.frag.t);
    let d2 = map.depth_of(cfg.frag.t + cfg.frag.t_prime);
    if d2 <= d1 {
        return Err(Error::config(format!(
            "t_prime too small: levels t and t+t' collapse to depths {d1}, {d2}"
        )));
    }
    let source = conditioned_source(cfg, "ctrees-fragprop", cfg.n0 as usize)?;

    // Observed pass: largest fragment at level t and its largest
    // sub-fragment at level t + t'.
    #[derive(Default)]
    struct Obs {
        rows: Vec<(u32, f64)>, // (fragment size S*, sub-fragment fraction)
        skipped: u64,
        err: Option<String>,
    }
    let blocks = run_blocks(cfg.frag.trees, cfg.workers, |i, acc: &mut Obs| {
        if acc.err.is_some() {
            return;
        }
        match source.tree(i) {
            Ok(stats) => {
                let roots = stats.vertices_at_depth(d1 + 1);
                let Some(&a_star) = roots
                    .iter()
                    .max_by_key(|&&v| (stats.subtree_size[v as usize], std::cmp::Reverse(v)))
                else {
                    acc.skipped += 1;
                    return;
                };
                let s_star = stats.subtree_size[a_star as usize];
                if s_star < 2 {
                    acc.skipped += 1;
                    return;
                }
                let sub = largest_at_depth_within(&stats, d2 + 1, a_star, s_star);
                acc.rows.push((s_star, sub as f64 / s_star as f64));
            }
            Err(e) => acc.err = Some(e.to_string()),
        }
    });
    let mut rows = Vec::new();
    let mut skipped = 0;
    for b in blocks {
        if let Some(e) = b.err {
            return Err(Error::Sampling(e));
        }
        rows.extend(b.rows);
        skipped += b.skipped;
    }
    let buckets = cfg.frag.buckets.max(2);
    if rows.len() < buckets * 30 {
        return Err(Error::Sampling(format!(
            "only {} usable trees for {buckets} buckets",
            rows.len()
        )));
    }
    let mut order: Vec<usize> = (0..rows.len()).collect();
    order.sort_by_key(|&i| (rows[i].0, i));
    let per = rows.len() / buckets;

    // Reference pass: one fresh tree per observed row, conditioned to the
    // observed fragment size, examined at the matching relative depth.
    let delta_depth = d2 - d1;
    let tasks: Vec<u32> = order.iter().map(|&i| rows[i].0).collect();
    let law = OffspringLaw::new(cfg.alpha, cfg.tail_cut)?;
    #[derive(Default)]
    struct Refs {
        vals: Vec<(u64, f64)>,
        err: Option<String>,
    }
    let seed = cfg.seed;
    let theta_ref = cfg.frag.theta_ref;
    let max_attempts = cfg.max_attempts;
    let ref_blocks = run_blocks(tasks.len() as u64, cfg.workers, |i, acc: &mut Refs| {
        if acc.err.is_some() {
            return;
        }
        let m = tasks[i as usize] as usize;
        let mut rng = stream(seed, "ctrees-fragprop-ref", i);
        match sample_tree_conditioned(&law, m, theta_ref, &mut rng, max_attempts) {
            Ok(c) => match analyze(&c.tree) {
                Ok(stats) => {
                    let total = stats.total_progeny() as u32;
                    let sub = largest_at_depth_within(&stats, delta_depth, 0, total);
                    acc.vals.push((i, sub as f64 / total as f64));
                }
                Err(e) => acc.err = Some(e.to_string()),
            },
            Err(e) => acc.err = Some(e.to_string()),
        }
    });
    let mut ref_vals = vec![0.0; tasks.len()];
    for b in ref_blocks {
        if let Some(e) = b.err {
            return Err(Error::Sampling(e));
        }
        for (i, v) in b.vals {
            ref_vals[i as usize] = v;
        }
    }

    let mut passing = 0usize;
    let mut inp = inputs(&[
        ("t", cfg.frag.t),
        ("t_prime", cfg.frag.t_prime),
        ("depth_lo", d1 as f64),
        ("depth_hi", d2 as f64),
        ("trees", rows.len() as f64),
        ("skipped", skipped as f64),
    ]);
    for b in 0..buckets {
        let lo = b * per;
        let hi = if b + 1 == buckets { rows.len() } else { (b + 1) * per };
        let observed: Vec<f64> = order[lo..hi].iter().map(|&i| rows[i].1).collect();
        let reference: Vec<f64> = ref_vals[lo..hi].to_vec();
        let (_, p) = ks_two_sample(&observed, &reference)?;
        if p > cfg.frag.p_min {
            passing += 1;
        }
        inp.insert(format!("p_bucket_{b}"), p);
        let mass_lo = rows[order[lo]].0 as f64 / cfg.n0 as f64;
        inp.insert(format!("mass_lo_bucket_{b}"), mass_lo);
    }

    Ok(vec![CaseRecord::new(
        "frag-property",
        "largest-mass-markov",
        inp,
        passing as f64,
        0.0,
        buckets as f64,
        (buckets - cfg.frag.min_pass) as f64,
    )])
}
