//! Run configuration: flat key=value text with dotted section prefixes.
//!
//! Required keys: alpha, n0, trees, seed, lambda0. Everything else has a
//! default. Unknown keys are an error (listed), and suite tolerances may be
//! tightened but never loosened past their shipped defaults.

use crate::error::{Error, Result};
use std::collections::BTreeMap;
use std::path::Path;

#[derive(Debug, Clone)]
pub struct CalibParams {
    pub t_ref: f64,
}

#[derive(Debug, Clone)]
pub struct ExpSigmaParams {
    pub trees: u64,
    pub lambdas: Vec<f64>,
    pub tol_rel: f64,
    pub tol_se: f64,
}

#[derive(Debug, Clone)]
pub struct NghParams {
    pub n0: u32,
    pub trees: u64,
    pub recal_trees: u64,
    pub lambda: f64,
    pub p: Vec<f64>,
    pub t: Vec<f64>,
    pub tol_rel: f64,
    pub tol_se: f64,
}

#[derive(Debug, Clone)]
pub struct NggParams {
    pub n0: u32,
    pub trees: u64,
    pub recal_trees: u64,
    pub lambda: f64,
    pub delta: f64,
    pub g_rate: f64,
    pub samples: u64,
    pub r_min_factor: f64,
    pub v_min: f64,
    pub v_split: f64,
    pub v_max: f64,
    pub split_fraction: f64,
    pub tol_rel: f64,
    pub tol_se: f64,
}

#[derive(Debug, Clone)]
pub struct PoissonParams {
    pub trees: u64,
    /// ε thresholds as vertex counts (ε = factor / n0).
    pub eps_factors: Vec<u32>,
    pub bins: usize,
    /// Level as a fraction of the median height.
    pub level_frac: f64,
    pub disp_lo: f64,
    pub disp_hi: f64,
}

#[derive(Debug, Clone)]
pub struct SmallFragParams {
    /// Resolution for this suite (conditioned size m = n0).
    pub n0: u32,
    pub trees: u64,
    pub recal_trees: u64,
    pub eps_factors: Vec<u32>,
    pub level_frac: f64,
    pub tol: f64,
}

#[derive(Debug, Clone)]
pub struct OdeMcParams {
    pub trees: u64,
    pub t: Vec<f64>,
    pub tol: f64,
}

#[derive(Debug, Clone)]
pub struct FragPropParams {
    pub trees: u64,
    pub t: f64,
    pub t_prime: f64,
    pub buckets: usize,
    pub theta_ref: f64,
    pub p_min: f64,
    pub min_pass: usize,
}

#[derive(Debug, Clone)]
pub struct TailsParams {
    pub trees: u64,
    pub cap: u64,
    pub points: usize,
    pub tol: f64,
}

#[derive(Debug, Clone)]
pub struct OdeAnalyticParams {
    pub gammas: Vec<f64>,
    pub step: f64,
    pub t_max: f64,
    pub tol: f64,
    pub order_lo: f64,
    pub order_hi: f64,
}

#[derive(Debug, Clone)]
pub struct MechanismParams {
    pub tol_inverse: f64,
    pub ratio_threshold: f64,
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub alpha: f64,
    pub n0: u32,
    pub trees: u64,
    pub seed: u64,
    pub lambda0: f64,
    pub workers: usize,
    pub theta: f64,
    pub tail_cut: usize,
    pub max_attempts: u64,
    pub calib: CalibParams,
    pub exp_sigma: ExpSigmaParams,
    pub ngh: NghParams,
    pub ngg: NggParams,
    pub poisson: PoissonParams,
    pub smallfrag: SmallFragParams,
    pub ode_mc: OdeMcParams,
    pub frag: FragPropParams,
    pub tails: TailsParams,
    pub ode: OdeAnalyticParams,
    pub mech: MechanismParams,
}

impl RunConfig {
    /// Defaults around the five required keys.
    pub fn new(alpha: f64, n0: u32, trees: u64, seed: u64, lambda0: f64) -> Result<Self> {
        let cfg = RunConfig {
            alpha,
            n0,
            trees,
            seed,
            lambda0,
            workers: 0,
            theta: 0.05,
            tail_cut: 1 << 16,
            max_attempts: 20_000_000,
            calib: CalibParams { t_ref: 0.2 },
            exp_sigma: ExpSigmaParams {
                trees: 20_000,
                lambdas: vec![0.5, 2.0],
                tol_rel: 0.05,
                tol_se: 3.0,
            },
            ngh: NghParams {
                n0: 1024,
                trees: 20_000,
                recal_trees: 100_000,
                lambda: 0.5,
                p: vec![0.0, 1.0],
                t: vec![0.1, 0.2, 0.4],
                tol_rel: 0.10,
                tol_se: 3.0,
            },
            ngg: NggParams {
                n0: 4096,
                trees: 1_000_000,
                recal_trees: 100_000,
                lambda: 1.0,
                delta: 0.5,
                g_rate: 1.0,
                samples: 1_000_000,
                r_min_factor: 1e-4,
                v_min: 1e-4,
                v_split: 0.05,
                v_max: 30.0,
                split_fraction: 0.25,
                tol_rel: 0.10,
                tol_se: 3.0,
            },
            // Dispersion anchors: the resolvable floor is 6 vertices (the
            // offspring law forbids size-2 subtrees, so smaller thresholds
            // sit on size-lattice artifacts), and the representatives stay
            // in the lower parts of the two smallest decades; past
            // ε ≈ 0.02 the unit-mass constraint of the conditioned law
            // genuinely deflates the dispersion below the band.
            poisson: PoissonParams {
                trees: 3_000,
                eps_factors: vec![6, 19, 60],
                bins: 10,
                level_frac: 0.5,
                disp_lo: 0.8,
                disp_hi: 1.2,
            },
            smallfrag: SmallFragParams {
                n0: 1 << 18,
                trees: 1_000,
                recal_trees: 1_600_000,
                eps_factors: vec![128, 256, 512],
                level_frac: 0.35,
                tol: 0.10,
            },
            ode_mc: OdeMcParams {
                trees: 100_000,
                t: vec![0.1, 0.2, 0.4],
                tol: 0.05,
            },
            frag: FragPropParams {
                trees: 1_500,
                t: 0.25,
                t_prime: 0.15,
                buckets: 10,
                theta_ref: 0.02,
                p_min: 0.01,
                min_pass: 9,
            },
            tails: TailsParams {
                trees: 1_000_000,
                cap: 2_000_000,
                points: 8,
                tol: 0.05,
            },
            ode: OdeAnalyticParams {
                gammas: vec![0.5, 1.0, 2.0],
                step: 1e-3,
                t_max: 5.0,
                tol: 1e-6,
                order_lo: 3.5,
                order_hi: 4.5,
            },
            mech: MechanismParams {
                tol_inverse: 1e-10,
                ratio_threshold: 1e-3,
            },
        };
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<()> {
        if !(self.alpha > 1.0 && self.alpha < 2.0) {
            return Err(Error::config(format!(
                "alpha must lie strictly in (1, 2), got {}",
                self.alpha
            )));
        }
        if self.n0 < 2 {
            return Err(Error::config("n0 must be >= 2"));
        }
        if self.trees < 1 {
            return Err(Error::config("trees must be >= 1"));
        }
        if !(self.lambda0 > 0.0) {
            return Err(Error::config("lambda0 must be > 0"));
        }
        if !(self.theta > 0.0 && self.theta <= 0.1) {
            return Err(Error::config("theta must lie in (0, 0.1]"));
        }
        if self.tail_cut < 2 {
            return Err(Error::config("tail_cut must be >= 2"));
        }
        // Acceptance tolerances may be tightened, never loosened.
        let guards: [(&str, f64, f64); 9] = [
            ("exp_sigma.tol_rel", self.exp_sigma.tol_rel, 0.05),
            ("ngh.tol_rel", self.ngh.tol_rel, 0.10),
            ("ngg.tol_rel", self.ngg.tol_rel, 0.10),
            ("smallfrag.tol", self.smallfrag.tol, 0.10),
            ("ode_mc.tol", self.ode_mc.tol, 0.05),
            ("tails.tol", self.tails.tol, 0.05),
            ("ode.tol", self.ode.tol, 1e-6),
            ("mech.tol_inverse", self.mech.tol_inverse, 1e-10),
            ("mech.ratio_threshold", self.mech.ratio_threshold, 1e-3),
        ];
        for (name, value, max) in guards {
            if value > max {
                return Err(Error::config(format!(
                    "{name} = {value} loosens the acceptance tolerance {max}"
                )));
            }
        }
        if self.poisson.disp_lo < 0.8 - 1e-12 || self.poisson.disp_hi > 1.2 + 1e-12 {
            return Err(Error::config(
                "poisson dispersion window may not extend beyond [0.8, 1.2]",
            ));
        }
        if self.frag.p_min < 0.01 {
            return Err(Error::config("frag.p_min may not be below 0.01"));
        }
        if self.frag.min_pass + 1 < self.frag.buckets {
            return Err(Error::config(
                "frag.min_pass may allow at most one failing bucket",
            ));
        }
        if self.exp_sigma.tol_se > 3.0 || self.ngh.tol_se > 3.0 || self.ngg.tol_se > 3.0 {
            return Err(Error::config("tol_se may not exceed 3 standard errors"));
        }
        Ok(())
    }
}

fn parse_f64(key: &str, v: &str) -> Result<f64> {
    v.parse::<f64>()
        .map_err(|_| Error::config(format!("key '{key}': cannot parse '{v}' as a number")))
}

fn parse_list_f64(key: &str, v: &str) -> Result<Vec<f64>> {
    v.split(',')
        .map(|s| parse_f64(key, s.trim()))
        .collect::<Result<Vec<_>>>()
        .and_then(|l| {
            if l.is_empty() {
                Err(Error::config(format!("key '{key}': empty list")))
            } else {
                Ok(l)
            }
        })
}

fn parse_list_u32(key: &str, v: &str) -> Result<Vec<u32>> {
    v.split(',')
        .map(|s| {
            s.trim()
                .parse::<u32>()
                .map_err(|_| Error::config(format!("key '{key}': cannot parse '{s}' as integer")))
        })
        .collect()
}

fn parse_int<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse::<T>()
        .map_err(|_| Error::config(format!("key '{key}': cannot parse '{v}' as integer")))
}

/// Parse a flat key=value configuration. `#` starts a comment; blank lines
/// are ignored.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let mut map: BTreeMap<String, String> = BTreeMap::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            return Err(Error::config(format!(
                "line {}: expected key=value, got '{line}'",
                lineno + 1
            )));
        };
        if map.insert(k.trim().to_string(), v.trim().to_string()).is_some() {
            return Err(Error::config(format!("duplicate key '{}'", k.trim())));
        }
    }

    let mut take = |k: &str| map.remove(k);
    let required = |k: &str, v: Option<String>| -> Result<String> {
        v.ok_or_else(|| Error::config(format!("missing required key '{k}'")))
    };

    let alpha = parse_f64("alpha", &required("alpha", take("alpha"))?)?;
    let n0: u32 = parse_int("n0", &required("n0", take("n0"))?)?;
    let trees: u64 = parse_int("trees", &required("trees", take("trees"))?)?;
    let seed: u64 = parse_int("seed", &required("seed", take("seed"))?)?;
    let lambda0 = parse_f64("lambda0", &required("lambda0", take("lambda0"))?)?;

    let mut cfg = RunConfig::new(alpha, n0, trees, seed, lambda0)?;

    macro_rules! set {
        ($key:literal, $slot:expr, f64) => {
            if let Some(v) = take($key) {
                $slot = parse_f64($key, &v)?;
            }
        };
        ($key:literal, $slot:expr, list_f64) => {
            if let Some(v) = take($key) {
                $slot = parse_list_f64($key, &v)?;
            }
        };
        ($key:literal, $slot:expr, list_u32) => {
            if let Some(v) = take($key) {
                $slot = parse_list_u32($key, &v)?;
            }
        };
        ($key:literal, $slot:expr, $ty:ty) => {
            if let Some(v) = take($key) {
                $slot = parse_int::<$ty>($key, &v)?;
            }
        };
    }

    set!("workers", cfg.workers, usize);
    set!("theta", cfg.theta, f64);
    set!("tail_cut", cfg.tail_cut, usize);
    set!("max_attempts", cfg.max_attempts, u64);
    set!("calib.t_ref", cfg.calib.t_ref, f64);

    set!("exp_sigma.trees", cfg.exp_sigma.trees, u64);
    set!("exp_sigma.lambdas", cfg.exp_sigma.lambdas, list_f64);
    set!("exp_sigma.tol_rel", cfg.exp_sigma.tol_rel, f64);
    set!("exp_sigma.tol_se", cfg.exp_sigma.tol_se, f64);

    set!("ngh.n0", cfg.ngh.n0, u32);
    set!("ngh.trees", cfg.ngh.trees, u64);
    set!("ngh.recal_trees", cfg.ngh.recal_trees, u64);
    set!("ngh.lambda", cfg.ngh.lambda, f64);
    set!("ngh.p", cfg.ngh.p, list_f64);
    set!("ngh.t", cfg.ngh.t, list_f64);
    set!("ngh.tol_rel", cfg.ngh.tol_rel, f64);
    set!("ngh.tol_se", cfg.ngh.tol_se, f64);

    set!("ngg.n0", cfg.ngg.n0, u32);
    set!("ngg.trees", cfg.ngg.trees, u64);
    set!("ngg.recal_trees", cfg.ngg.recal_trees, u64);
    set!("ngg.lambda", cfg.ngg.lambda, f64);
    set!("ngg.delta", cfg.ngg.delta, f64);
    set!("ngg.g_rate", cfg.ngg.g_rate, f64);
    set!("ngg.samples", cfg.ngg.samples, u64);
    set!("ngg.r_min_factor", cfg.ngg.r_min_factor, f64);
    set!("ngg.v_min", cfg.ngg.v_min, f64);
    set!("ngg.v_split", cfg.ngg.v_split, f64);
    set!("ngg.v_max", cfg.ngg.v_max, f64);
    set!("ngg.split_fraction", cfg.ngg.split_fraction, f64);
    set!("ngg.tol_rel", cfg.ngg.tol_rel, f64);
    set!("ngg.tol_se", cfg.ngg.tol_se, f64);

    set!("poisson.trees", cfg.poisson.trees, u64);
    set!("poisson.eps_factors", cfg.poisson.eps_factors, list_u32);
    set!("poisson.bins", cfg.poisson.bins, usize);
    set!("poisson.level_frac", cfg.poisson.level_frac, f64);
    set!("poisson.disp_lo", cfg.poisson.disp_lo, f64);
    set!("poisson.disp_hi", cfg.poisson.disp_hi, f64);

    set!("smallfrag.n0", cfg.smallfrag.n0, u32);
    set!("smallfrag.trees", cfg.smallfrag.trees, u64);
    set!("smallfrag.recal_trees", cfg.smallfrag.recal_trees, u64);
    set!("smallfrag.eps_factors", cfg.smallfrag.eps_factors, list_u32);
    set!("smallfrag.level_frac", cfg.smallfrag.level_frac, f64);
    set!("smallfrag.tol", cfg.smallfrag.tol, f64);

    set!("ode_mc.trees", cfg.ode_mc.trees, u64);
    set!("ode_mc.t", cfg.ode_mc.t, list_f64);
    set!("ode_mc.tol", cfg.ode_mc.tol, f64);

    set!("frag.trees", cfg.frag.trees, u64);
    set!("frag.t", cfg.frag.t, f64);
    set!("frag.t_prime", cfg.frag.t_prime, f64);
    set!("frag.buckets", cfg.frag.buckets, usize);
    set!("frag.theta_ref", cfg.frag.theta_ref, f64);
    set!("frag.p_min", cfg.frag.p_min, f64);
    set!("frag.min_pass", cfg.frag.min_pass, usize);

    set!("tails.trees", cfg.tails.trees, u64);
    set!("tails.cap", cfg.tails.cap, u64);
    set!("tails.points", cfg.tails.points, usize);
    set!("tails.tol", cfg.tails.tol, f64);

    set!("ode.gammas", cfg.ode.gammas, list_f64);
    set!("ode.step", cfg.ode.step, f64);
    set!("ode.t_max", cfg.ode.t_max, f64);
    set!("ode.tol", cfg.ode.tol, f64);
    set!("ode.order_lo", cfg.ode.order_lo, f64);
    set!("ode.order_hi", cfg.ode.order_hi, f64);

    set!("mech.tol_inverse", cfg.mech.tol_inverse, f64);
    set!("mech.ratio_threshold", cfg.mech.ratio_threshold, f64);

    if !map.is_empty() {
        let unknown: Vec<String> = map.keys().cloned().collect();
        return Err(Error::config(format!(
            "unknown keys: {}",
            unknown.join(", ")
        )));
    }
    cfg.validate()?;
    Ok(cfg)
}

pub fn load_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path)?;
    parse_config(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "alpha=1.5\nn0=4096\ntrees=10000\nseed=42\nlambda0=1.0\n";

    #[test]
    fn minimal_config_parses_with_defaults() {
        let cfg = parse_config(MINIMAL).unwrap();
        assert_eq!(cfg.n0, 4096);
        assert_eq!(cfg.exp_sigma.lambdas, vec![0.5, 2.0]);
        assert_eq!(cfg.ngh.t, vec![0.1, 0.2, 0.4]);
        assert_eq!(cfg.theta, 0.05);
    }

    #[test]
    fn boundary_alpha_rejected() {
        let text = "alpha=2.0\nn0=4096\ntrees=10\nseed=1\nlambda0=1.0\n";
        assert!(parse_config(text).is_err());
    }

    #[test]
    fn unknown_keys_listed() {
        let text = format!("{MINIMAL}bogus.key=3\nother=1\n");
        let err = parse_config(&text).unwrap_err().to_string();
        assert!(err.contains("bogus.key") && err.contains("other"), "{err}");
    }

    #[test]
    fn missing_required_key() {
        let err = parse_config("alpha=1.5\nn0=64\ntrees=1\nseed=1\n")
            .unwrap_err()
            .to_string();
        assert!(err.contains("lambda0"), "{err}");
    }

    #[test]
    fn tolerances_cannot_loosen() {
        let text = format!("{MINIMAL}ngh.tol_rel=0.2\n");
        assert!(parse_config(&text).is_err());
        let text = format!("{MINIMAL}ngh.tol_rel=0.05\n");
        assert!(parse_config(&text).is_ok());
    }

    #[test]
    fn comments_and_overrides() {
        let text = format!("{MINIMAL}# comment\nngh.t=0.1,0.3 # inline\n");
        let cfg = parse_config(&text).unwrap();
        assert_eq!(cfg.ngh.t, vec![0.1, 0.3]);
    }

    #[test]
    fn duplicate_keys_rejected() {
        let text = format!("{MINIMAL}alpha=1.4\n");
        assert!(parse_config(&text).is_err());
    }
}
