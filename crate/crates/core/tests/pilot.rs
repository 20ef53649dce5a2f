//! Diagnostic pilots for tuning suite defaults. All ignored; run with
//! `cargo test -p levyfrag-core --test pilot -- --ignored --nocapture`.

use levyfrag_core::harness::calibrate::{calibrate, CalibrationSet};
use levyfrag_core::harness::config::RunConfig;
use levyfrag_core::harness::estimator::ConditionedSource;
use levyfrag_core::harness::stats::pooled_dispersion;
use levyfrag_core::mechanism::StableConstants;
use levyfrag_core::treesim::OffspringLaw;

fn cfg(n0: u32) -> RunConfig {
    // Damped per-tree variance grows like n0^{1/α}; keep the calibration
    // noise flat across resolutions.
    let trees = 100_000u64 * ((n0 as u64 / 4096).max(1)).min(16);
    let mut c = RunConfig::new(1.5, n0, trees, 42, 1.0).unwrap();
    c.workers = 0;
    c
}

fn csource(c: &RunConfig, label: &str, m: usize) -> ConditionedSource {
    ConditionedSource {
        law: OffspringLaw::new(c.alpha, c.tail_cut).unwrap(),
        seed: c.seed,
        label: label.to_string(),
        m,
        theta: c.theta,
        max_attempts: c.max_attempts,
    }
}

fn calib_for(c: &RunConfig) -> CalibrationSet {
    calibrate(c).unwrap()
}

/// Map the dispersion of fragment counts over (level fraction, threshold).
#[test]
#[ignore]
fn pilot_dispersion_map() {
    let c = cfg(4096);
    let src = csource(&c, "pilot-disp", c.n0 as usize);
    let trees = 1500u64;
    let mut heights = Vec::new();
    for i in 0..200 {
        heights.push(src.tree(i).unwrap().height() as f64);
    }
    heights.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let med = heights[heights.len() / 2];
    println!("median height = {med}");
    for frac in [0.25, 0.4, 0.5, 0.65] {
        let k_star = ((med * frac) as u32).max(2);
        let factors = [8u32, 16, 32, 64, 128, 256, 512];
        let mut rows: Vec<(u32, Vec<u32>)> = Vec::new();
        for i in 0..trees {
            let s = src.tree(i).unwrap();
            let z = s.depth_count(k_star) as u32;
            let counts: Vec<u32> = factors
                .iter()
                .map(|&f| {
                    s.vertices_at_depth(k_star)
                        .iter()
                        .filter(|&&v| s.subtree_size[v as usize] >= f)
                        .count() as u32
                })
                .collect();
            rows.push((z, counts));
        }
        let mut order: Vec<usize> = (0..rows.len()).collect();
        order.sort_by_key(|&i| (rows[i].0, i));
        let bins = 10;
        let per = rows.len() / bins;
        print!("k*={k_star:3} (frac {frac}):");
        for (jf, &f) in factors.iter().enumerate() {
            let groups: Vec<Vec<f64>> = (0..bins)
                .map(|b| {
                    order[b * per..(b + 1) * per]
                        .iter()
                        .map(|&i| rows[i].1[jf] as f64)
                        .collect()
                })
                .collect();
            let d = pooled_dispersion(&groups, 20).unwrap_or(f64::NAN);
            let mean: f64 =
                rows.iter().map(|r| r.1[jf] as f64).sum::<f64>() / rows.len() as f64;
            print!("  m={f}: D={d:.3}(n̄={mean:.1})");
        }
        println!();
    }
}

/// Count- and mass-limit biases against the windowed local time, across
/// resolutions and thresholds.
#[test]
#[ignore]
fn pilot_smallfrag_bias() {
    for n0 in [4096u32, 16384, 65536] {
        let c = cfg(n0);
        let calib = calib_for(&c);
        let consts = StableConstants::new(c.alpha).unwrap();
        let src = csource(&c, "pilot-sf", n0 as usize);
        let trees = if n0 >= 65536 { 400 } else { 800 };
        let mut heights = Vec::new();
        for i in 0..100 {
            heights.push(src.tree(i).unwrap().height() as f64);
        }
        heights.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let k_star = ((heights[heights.len() / 2] / 2.0) as u32).max(2);
        let l_scale = calib.c_l * calib.depth_scale() / n0 as f64;
        let factors = [16u32, 32, 64, 128, 256, 512];
        let mut errs = vec![(0.0f64, 0.0f64, 0u64); factors.len()];
        for i in 0..trees {
            let s = src.tree(i).unwrap();
            let z = s.depth_count(k_star) as f64;
            if z == 0.0 {
                continue;
            }
            let l_hat = l_scale * z;
            for (j, &f) in factors.iter().enumerate() {
                let eps = f as f64 / n0 as f64;
                let mut n_eps = 0u64;
                let mut m_eps = 0.0;
                for &v in s.vertices_at_depth(k_star) {
                    let sz = s.subtree_size[v as usize];
                    if sz >= f {
                        n_eps += 1;
                    }
                    if sz <= f {
                        m_eps += sz as f64 / n0 as f64;
                    }
                }
                let x_n = consts.gamma_value * eps.powf(1.0 / c.alpha) * n_eps as f64;
                let x_m = (c.alpha - 1.0)
                    * consts.gamma_value
                    * eps.powf(1.0 / c.alpha - 1.0)
                    * m_eps;
                errs[j].0 += (x_n - l_hat) / l_hat;
                errs[j].1 += (x_m - l_hat) / l_hat;
                errs[j].2 += 1;
            }
        }
        print!("n0={n0:6} k*={k_star}:");
        for (j, &f) in factors.iter().enumerate() {
            let n = errs[j].2 as f64;
            print!(
                "  m={f}: N{:+.1}% M{:+.1}%",
                100.0 * errs[j].0 / n,
                100.0 * errs[j].1 / n
            );
        }
        println!();
    }
}

/// Resolution curves of the two limits from the unconditioned progeny law:
/// R_N(m) = Γ m^{2/3} P(T >= m) / α^{1/α} and
/// R_M(m) = (α-1) Γ m^{-1/3} E[T 1{T<=m}] / α^{1/α}, both -> 1.
#[test]
#[ignore]
fn pilot_resolution_curves() {
    use levyfrag_core::rng::stream;
    use levyfrag_core::treesim::sample_progeny;
    let alpha = 1.5f64;
    let consts = StableConstants::new(alpha).unwrap();
    let law = OffspringLaw::new(alpha, 1 << 16).unwrap();
    let n = 30_000_000u64;
    let ms = [8u64, 16, 32, 64, 128, 256, 512, 1024, 4096];
    let mut tail = vec![0u64; ms.len()];
    let mut mass = vec![0u64; ms.len()];
    for i in 0..n {
        let mut rng = stream(4242, "pilot-res", i);
        let (t, _) = sample_progeny(&law, &mut rng, 1 << 22);
        for (j, &m) in ms.iter().enumerate() {
            if t >= m {
                tail[j] += 1;
            }
            if t <= m {
                mass[j] += t;
            }
        }
    }
    let a_pow = alpha.powf(1.0 / alpha);
    for (j, &m) in ms.iter().enumerate() {
        let p = tail[j] as f64 / n as f64;
        let em = mass[j] as f64 / n as f64;
        let rn = consts.gamma_value * (m as f64).powf(2.0 / 3.0) * p / a_pow;
        let rm = (alpha - 1.0) * consts.gamma_value * (m as f64).powf(-1.0 / 3.0) * em / a_pow;
        println!("m={m:5}  R_N={rn:.4}  R_M={rm:.4}");
    }
}

/// Brute-force check of the μ-side integral: fixed v-grid quadrature with
/// plain Monte Carlo per node, no importance sampling.
#[test]
#[ignore]
fn pilot_ngg_mu_bruteforce() {
    use levyfrag_core::dislocation::{
        ngg_rhs_mc, sample_subordinator_jumps, FunctionalSpec, IsConfig, LevelWeight,
        MassFunctional,
    };
    use levyfrag_core::rng::stream;
    let alpha = 1.5f64;
    let (lam, delta) = (1.0f64, 0.5f64);
    let consts = StableConstants::new(alpha).unwrap();
    let r_min = 1e-4 * delta;
    // log-grid over v
    let (v_lo, v_hi, cells) = (1e-3f64, 40.0f64, 160usize);
    let ratio = (v_hi / v_lo).powf(1.0 / cells as f64);
    let mut total = 0.0;
    let mut v = v_lo;
    let per_cell = 4000u64;
    let mut idx = 0u64;
    for _ in 0..cells {
        let v_next = v * ratio;
        let mid = (v * v_next).sqrt();
        let mut acc = 0.0;
        for _ in 0..per_cell {
            let mut rng = stream(777, "brute-mu", idx);
            idx += 1;
            let j = sample_subordinator_jumps(&consts, mid, r_min, &mut rng).unwrap();
            let (mut largest, mut second, mut sum) = (0.0f64, 0.0f64, 0.0f64);
            for &r in &j.jumps {
                sum += r;
                if r > largest {
                    second = largest;
                    largest = r;
                } else if r > second {
                    second = r;
                }
            }
            if second >= delta {
                acc += sum * (-lam * sum).exp();
            }
        }
        let e_mid = acc / per_cell as f64;
        total += consts.pi_density(mid).unwrap() * e_mid * (v_next - v);
        v = v_next;
    }
    println!("brute-force mu integral = {total:.6e}");
    let spec = FunctionalSpec {
        g: LevelWeight::ExpDecay { rate: 1.0 },
        big_g: MassFunctional::SecondMassIndicator { delta },
        lam,
    };
    let mut cfg = IsConfig::defaults(alpha, delta);
    cfg.samples = 400_000;
    let est = ngg_rhs_mc(&consts, &spec, &cfg, 778, "brute-vs-is").unwrap();
    println!(
        "importance-sampling mu = {:.6e} +- {:.2e} (value {:.6e}, t_factor {:.4})",
        est.mu_value, est.mu_stderr, est.value, est.t_factor
    );
}

/// Validate the stratified v-sampler against closed forms: with h(v) = v
/// and h(v) = E[S_v e^{-λS_v}] = v φ'(λ) e^{-v φ(λ)}, the weighted means
/// must match exact quadratures of π(dv) h(v) over the window.
#[test]
#[ignore]
fn pilot_is_weights() {
    use levyfrag_core::rng::stream;
    use rand::Rng;
    let alpha = 1.5f64;
    let consts = StableConstants::new(alpha).unwrap();
    let (v_min, v_split, v_max, q) = (1e-4f64, 0.05f64, 30.0f64, 2.5f64);
    let lam = 1.0f64;
    let (phi, phi_p) = (lam.powf(1.0 / alpha), (1.0 / alpha) * lam.powf(1.0 / alpha - 1.0));

    let draw = |a: f64, b: f64, u: f64| -> f64 {
        let ta = a.powf(1.0 - q);
        let tb = b.powf(1.0 - q);
        (ta + u * (tb - ta)).powf(1.0 / (1.0 - q))
    };
    let dens = |v: f64, a: f64, b: f64| -> f64 {
        let norm = (a.powf(1.0 - q) - b.powf(1.0 - q)) / (q - 1.0);
        v.powf(-q) / norm
    };
    let mut acc_v = [0.0f64; 2];
    let mut acc_h = [0.0f64; 2];
    let n = 2_000_000u64;
    for (s, (a, b)) in [(v_min, v_split), (v_split, v_max)].into_iter().enumerate() {
        for i in 0..n {
            let mut rng = stream(31337 + s as u64, "pilot-isw", i);
            let v = draw(a, b, rng.random());
            let w = consts.pi_density(v).unwrap() / dens(v, a, b);
            acc_v[s] += w * v;
            acc_h[s] += w * v * phi_p * (-v * phi).exp();
        }
    }
    let est_v = (acc_v[0] + acc_v[1]) / n as f64;
    let est_h = (acc_h[0] + acc_h[1]) / n as f64;
    // Exact: ∫ c v^{-2.5} v dv = c (v^{-0.5}/0.5 ...) over the window.
    let c = consts.pi_density_const;
    let exact_v = c * 2.0 * (v_min.powf(-0.5) - v_max.powf(-0.5));
    // Quadrature for the damped one.
    let mut exact_h = 0.0;
    let cells = 400_000;
    let ratio = (v_max / v_min).powf(1.0 / cells as f64);
    let mut v = v_min;
    for _ in 0..cells {
        let vn = v * ratio;
        let mid = (v * vn).sqrt();
        exact_h += consts.pi_density(mid).unwrap() * mid * phi_p * (-mid * phi).exp() * (vn - v);
        v = vn;
    }
    println!("plain  : est {est_v:.6e} exact {exact_v:.6e} ratio {:.4}", est_v / exact_v);
    println!("damped : est {est_h:.6e} exact {exact_h:.6e} ratio {:.4}", est_h / exact_h);
}

/// Window-matched comparison: IS estimate restricted to [v_split, v_max]
/// vs brute quadrature on the same window, with the full jump simulation
/// on both sides.
#[test]
#[ignore]
fn pilot_is_vs_brute_matched() {
    use levyfrag_core::rng::stream;
    use levyfrag_core::dislocation::sample_subordinator_jumps;
    use rand::Rng;
    let alpha = 1.5f64;
    let consts = StableConstants::new(alpha).unwrap();
    let (lam, delta) = (1.0f64, 0.5f64);
    let r_min = 5e-5f64;
    let (a, b, q) = (0.05f64, 30.0f64, 2.5f64);

    let h_of = |v: f64, rng: &mut rand_chacha::ChaCha8Rng| -> f64 {
        let j = sample_subordinator_jumps(&consts, v, r_min, rng).unwrap();
        let (mut largest, mut second, mut sum) = (0.0f64, 0.0f64, 0.0f64);
        for &r in &j.jumps {
            sum += r;
            if r > largest {
                second = largest;
                largest = r;
            } else if r > second {
                second = r;
            }
        }
        if second >= delta && sum > 0.0 {
            sum * (-lam * sum).exp()
        } else {
            0.0
        }
    };

    // IS on the window.
    let n = 1_000_000u64;
    let (mut acc, mut acc2) = (0.0f64, 0.0f64);
    for i in 0..n {
        let mut rng = stream(555, "matched-is", i);
        let u: f64 = rng.random();
        let ta = a.powf(1.0 - q);
        let tb = b.powf(1.0 - q);
        let v = (ta + u * (tb - ta)).powf(1.0 / (1.0 - q));
        let norm = (ta - tb) / (q - 1.0);
        let w = consts.pi_density(v).unwrap() * norm * v.powf(q);
        let x = w * h_of(v, &mut rng);
        acc += x;
        acc2 += x * x;
    }
    let mean = acc / n as f64;
    let se = ((acc2 / n as f64 - mean * mean) / n as f64).sqrt();
    println!("IS    [0.05,30]: {mean:.6e} +- {se:.2e}");

    // Brute on the same window.
    let cells = 120usize;
    let per_cell = 20_000u64;
    let ratio = (b / a).powf(1.0 / cells as f64);
    let mut v = a;
    let mut total = 0.0;
    let mut idx = 0u64;
    for _ in 0..cells {
        let vn = v * ratio;
        let mid = (v * vn).sqrt();
        let mut cell = 0.0;
        for _ in 0..per_cell {
            let mut rng = stream(556, "matched-brute", idx);
            idx += 1;
            cell += h_of(mid, &mut rng);
        }
        total += consts.pi_density(mid).unwrap() * (cell / per_cell as f64) * (vn - v);
        v = vn;
    }
    println!("brute [0.05,30]: {total:.6e}");
}
