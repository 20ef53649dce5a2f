//! Poisson structure of small-fragment counts: conditionally on the local
//! time at a level, the number of fragments of size >= ε is Poisson, so its
//! within-bin index of dispersion should sit near 1.

use crate::error::{Error, Result};
use crate::harness::calibrate::CalibrationSet;
use crate::harness::config::RunConfig;
use crate::harness::estimator::{run_blocks, ConditionedSource};
use crate::harness::report::{inputs, CaseRecord};
use crate::harness::stats::{median, pooled_dispersion};
use crate::treesim::OffspringLaw;

pub(super) fn conditioned_source(
    cfg: &RunConfig,
    label: &str,
    m: usize,
) -> Result<ConditionedSource> {
    Ok(ConditionedSource {
        law: OffspringLaw::new(cfg.alpha, cfg.tail_cut)?,
        seed: cfg.seed,
        label: label.to_string(),
        m,
        theta: cfg.theta,
        max_attempts: cfg.max_attempts,
    })
}

/// Observation layer: a fraction of the median height over a pilot slice of
/// the conditioned sample. Deterministic given the stream.
pub(super) fn observation_layer(
    source: &ConditionedSource,
    pilot: u64,
    frac: f64,
) -> Result<u32> {
    let mut heights = Vec::with_capacity(pilot as usize);
    for i in 0..pilot {
        heights.push(source.tree(i)?.height() as f64);
    }
    let med = median(&mut heights);
    Ok(((med * frac).floor() as u32).max(2))
}

pub fn run(cfg: &RunConfig, calib: &CalibrationSet) -> Result<Vec<CaseRecord>> {
    if cfg.n0 != calib.n0 {
        return Err(Error::config(
            "poisson-counts conditions trees on m = n0 at the calibration resolution",
        ));
    }
    let source = conditioned_source(cfg, "ctrees-poisson", cfg.n0 as usize)?;
    let k_star = observation_layer(&source, cfg.poisson.trees.min(200), cfg.poisson.level_frac)?;
    let factors = cfg.poisson.eps_factors.clone();

    #[derive(Default)]
    struct Acc {
        rows: Vec<(u32, Vec<u32>)>,
        err: Option<String>,
    }
    let blocks = run_blocks(cfg.poisson.trees, cfg.workers, |i, acc: &mut Acc| {
        if acc.err.is_some() {
            return;
        }
        match source.tree(i) {
            Ok(stats) => {
                let z = stats.depth_count(k_star) as u32;
                let counts: Vec<u32> = factors
                    .iter()
                    .map(|&f| {
                        stats
                            .vertices_at_depth(k_star)
                            .iter()
                            .filter(|&&v| stats.subtree_size[v as usize] >= f)
                            .count() as u32
                    })
                    .collect();
                acc.rows.push((z, counts));
            }
            Err(e) => acc.err = Some(e.to_string()),
        }
    });
    let mut rows = Vec::with_capacity(cfg.poisson.trees as usize);
    for b in blocks {
        if let Some(e) = b.err {
            return Err(Error::Sampling(e));
        }
        rows.extend(b.rows);
    }
    // Bin by the local-time proxy (the layer population) into equal-count
    // quantile bins; sorting is made total with the original order as a
    // tiebreak for determinism.
    let mut order: Vec<usize> = (0..rows.len()).collect();
    order.sort_by_key(|&i| (rows[i].0, i));
    let bins = cfg.poisson.bins.max(2);
    let per = rows.len() / bins;
    if per < 20 {
        return Err(Error::config(
            "poisson-counts needs at least 20 trees per dispersion bin",
        ));
    }

    let mut cases = Vec::new();
    for (jf, &f) in factors.iter().enumerate() {
        let groups: Vec<Vec<f64>> = (0..bins)
            .map(|b| {
                let lo = b * per;
                let hi = if b + 1 == bins { rows.len() } else { (b + 1) * per };
                order[lo..hi]
                    .iter()
                    .map(|&i| rows[i].1[jf] as f64)
                    .collect()
            })
            .collect();
        let disp = pooled_dispersion(&groups, 20)?;
        let mean_count: f64 =
            rows.iter().map(|r| r.1[jf] as f64).sum::<f64>() / rows.len() as f64;
        let eps = f as f64 / cfg.n0 as f64;
        let mid = 0.5 * (cfg.poisson.disp_lo + cfg.poisson.disp_hi);
        let half = 0.5 * (cfg.poisson.disp_hi - cfg.poisson.disp_lo);
        cases.push(CaseRecord::new(
            "poisson-counts",
            &format!("eps={eps}"),
            inputs(&[
                ("eps", eps),
                ("eps_vertices", f as f64),
                ("k_star", k_star as f64),
                ("trees", rows.len() as f64),
                ("mean_count", mean_count),
                ("bins", bins as f64),
            ]),
            disp,
            0.0,
            mid,
            half,
        ));
    }
    Ok(cases)
}
