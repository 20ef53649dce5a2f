//! Total-progeny tail exponent: log-log regression of the survival
//! function over the top decades, against the -1/α law of the excursion
//! length measure.

use crate::error::{Error, Result};
use crate::harness::config::RunConfig;
use crate::harness::estimator::run_blocks;
use crate::harness::report::{inputs, CaseRecord};
use crate::harness::stats::weighted_line_fit;
use crate::rng::stream;
use crate::treesim::{sample_progeny, OffspringLaw};

pub fn run(cfg: &RunConfig) -> Result<Vec<CaseRecord>> {
    let law = OffspringLaw::new(cfg.alpha, cfg.tail_cut)?;
    let p = cfg.tails.points;
    if p < 3 {
        return Err(Error::config("tails.points must be >= 3"));
    }
    // Thresholds spanning two decades, ending half a decade under the cap
    // so censoring cannot touch the survival estimates.
    let hi = (cfg.tails.cap as f64).log10() - 0.5;
    let lo = hi - 2.0;
    let thresholds: Vec<u64> = (0..p)
        .map(|j| 10f64.powf(lo + 2.0 * j as f64 / (p - 1) as f64) as u64)
        .collect();

    #[derive(Default)]
    struct Acc {
        counts: Vec<u64>,
    }
    let seed = cfg.seed;
    let blocks = run_blocks(cfg.tails.trees, cfg.workers, |i, acc: &mut Acc| {
        if acc.counts.is_empty() {
            acc.counts = vec![0; thresholds.len()];
        }
        let mut rng = stream(seed, "tails", i);
        let (t, _) = sample_progeny(&law, &mut rng, cfg.tails.cap);
        for (j, &g) in thresholds.iter().enumerate() {
            if t >= g {
                acc.counts[j] += 1;
            }
        }
    });
    let mut counts = vec![0u64; thresholds.len()];
    for b in &blocks {
        for (c, &v) in counts.iter_mut().zip(&b.counts) {
            *c += v;
        }
    }

    let n = cfg.tails.trees as f64;
    let points: Vec<(f64, f64, f64)> = thresholds
        .iter()
        .zip(&counts)
        .filter(|(_, &c)| c > 0)
        .map(|(&g, &c)| ((g as f64).log10(), (c as f64 / n).log10(), c as f64))
        .collect();
    let fit = weighted_line_fit(&points)?;

    let mut inp = inputs(&[
        ("trees", n),
        ("cap", cfg.tails.cap as f64),
        ("points", points.len() as f64),
        ("top_count", *counts.last().unwrap() as f64),
    ]);
    inp.insert("threshold_lo".into(), thresholds[0] as f64);
    inp.insert("threshold_hi".into(), *thresholds.last().unwrap() as f64);

    Ok(vec![CaseRecord::new(
        "tails",
        "progeny-tail-slope",
        inp,
        fit.slope,
        fit.slope_se,
        -1.0 / cfg.alpha,
        cfg.tails.tol,
    )])
}
