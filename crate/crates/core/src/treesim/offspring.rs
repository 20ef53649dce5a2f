//! The canonical critical stable offspring law.
//!
//! f(s) = s + α^{-1}(1-s)^α gives p₀ = 1/α, p₁ = 0 and, for k ≥ 2,
//! p_k = α^{-1}(-1)^k C(α,k). The tail mass M_k = P(ξ > k) satisfies the
//! exact recursion M_k = M_{k-1}(k-α)/k with M_1 = (α-1)/α, which both
//! builds the table and gives a closed log-Gamma form for exact inversion
//! beyond the table cut. The sampled law is therefore the exact target law,
//! not a truncation of it.

use crate::error::{Error, Result};
use crate::special::ln_gamma;
use rand::Rng;

// Tail draws beyond this are astronomically rare (P < 1e-40) and any tree
// containing one overflows every practical cap; clamping avoids u64 overflow
// in the bisection.
const TAIL_CLAMP: u64 = 1 << 40;

/// Offspring distribution with cumulative table up to `tail_cut` and exact
/// inversion of the closed-form tail beyond it.
#[derive(Debug, Clone)]
pub struct OffspringLaw {
    alpha: f64,
    tail_cut: usize,
    /// cumulative[k] = P(ξ ≤ k) for k = 0..=tail_cut.
    cumulative: Vec<f64>,
    /// P(ξ > tail_cut).
    tail_mass: f64,
    /// ln((α-1)/α) - ln Γ(2-α), so ln M_m = ln_c + ln Γ(m+1-α) - ln Γ(m+1).
    ln_c: f64,
}

impl OffspringLaw {
    pub fn new(alpha: f64, tail_cut: usize) -> Result<Self> {
        if !(alpha.is_finite() && alpha > 1.0 && alpha < 2.0) {
            return Err(Error::domain(format!(
                "offspring law requires alpha in (1, 2), got {alpha}"
            )));
        }
        if tail_cut < 2 {
            return Err(Error::domain(format!(
                "tail_cut must be >= 2, got {tail_cut}"
            )));
        }
        let mut cumulative = vec![0.0; tail_cut + 1];
        cumulative[0] = 1.0 / alpha;
        cumulative[1] = 1.0 / alpha; // p₁ = 0, and 1 - M_1 = 1/α exactly.
        let mut tail = (alpha - 1.0) / alpha; // M_1
        for k in 2..=tail_cut {
            tail *= (k as f64 - alpha) / k as f64;
            cumulative[k] = 1.0 - tail;
        }
        let ln_c = ((alpha - 1.0) / alpha).ln() - ln_gamma(2.0 - alpha);
        Ok(OffspringLaw {
            alpha,
            tail_cut,
            cumulative,
            tail_mass: tail,
            ln_c,
        })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn tail_cut(&self) -> usize {
        self.tail_cut
    }

    /// P(ξ = k).
    pub fn pmf(&self, k: usize) -> f64 {
        match k {
            0 => self.cumulative[0],
            1 => 0.0,
            _ if k <= self.tail_cut => self.cumulative[k] - self.cumulative[k - 1],
            _ => (self.ln_tail(k - 1)).exp() - (self.ln_tail(k)).exp(),
        }
    }

    /// ln P(ξ > m) for m ≥ 1, in closed form.
    fn ln_tail(&self, m: usize) -> f64 {
        let m = m as f64;
        self.ln_c + ln_gamma(m + 1.0 - self.alpha) - ln_gamma(m + 1.0)
    }

    /// P(ξ > tail_cut).
    pub fn tail_mass(&self) -> f64 {
        self.tail_mass
    }

    /// |Σ_{k ≤ tail_cut} k p_k + tail mean - 1|: the table's criticality
    /// residual, with the tail mean taken from its closed form
    /// Σ_{k > K} k p_k = Γ(K+1-α) / (Γ(2-α) Γ(K)).
    pub fn criticality_residual(&self) -> f64 {
        let mut mean = 0.0;
        for k in (2..=self.tail_cut).rev() {
            mean += k as f64 * (self.cumulative[k] - self.cumulative[k - 1]);
        }
        let k = self.tail_cut as f64;
        let tail_mean =
            (ln_gamma(k + 1.0 - self.alpha) - ln_gamma(2.0 - self.alpha) - ln_gamma(k)).exp();
        (mean + tail_mean - 1.0).abs()
    }

    /// Draw one offspring count.
    #[inline]
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> u64 {
        let u: f64 = rng.random();
        if u < self.cumulative[0] {
            return 0;
        }
        // Linear scan covers all but ~1e-3 of the remaining mass.
        let scan_end = 32.min(self.tail_cut);
        for k in 2..=scan_end {
            if u < self.cumulative[k] {
                return k as u64;
            }
        }
        if u < self.cumulative[self.tail_cut] {
            let rest = &self.cumulative[scan_end..];
            return (scan_end + rest.partition_point(|&c| c <= u)) as u64;
        }
        self.sample_tail(u)
    }

    /// Exact inversion beyond the table: smallest m with M_m ≤ 1-u, found by
    /// bisection on the closed-form log tail.
    fn sample_tail(&self, u: f64) -> u64 {
        // v = (1-u)/M_K is uniform on (0,1) given a tail draw.
        let v = ((1.0 - u) / self.tail_mass).clamp(f64::MIN_POSITIVE, 1.0);
        let target = v.ln() + self.tail_mass.ln();
        let mut lo = self.tail_cut as u64; // M_lo > target region boundary
        let mut hi = lo * 2;
        while self.ln_tail(hi as usize) > target {
            if hi >= TAIL_CLAMP {
                return TAIL_CLAMP;
            }
            lo = hi;
            hi *= 2;
        }
        while hi - lo > 1 {
            let mid = lo + (hi - lo) / 2;
            if self.ln_tail(mid as usize) > target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        hi
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;
    use approx::assert_relative_eq;

    #[test]
    fn low_order_probabilities() {
        let law = OffspringLaw::new(1.5, 4096).unwrap();
        assert_relative_eq!(law.pmf(0), 2.0 / 3.0, max_relative = 1e-14);
        assert_eq!(law.pmf(1), 0.0);
        assert_relative_eq!(law.pmf(2), 0.25, max_relative = 1e-13);
        assert_relative_eq!(law.pmf(3), (0.5 * 0.5) / 6.0, max_relative = 1e-13);
        assert_relative_eq!(law.pmf(3), 0.041_666_7, max_relative = 1e-5);
    }

    #[test]
    fn table_and_tail_sum_to_one() {
        for &alpha in &[1.2, 1.5, 1.9] {
            let law = OffspringLaw::new(alpha, 1 << 16).unwrap();
            let body: f64 = (0..=law.tail_cut()).map(|k| law.pmf(k)).sum();
            assert!(
                (body + law.tail_mass() - 1.0).abs() < 1e-12,
                "alpha={alpha}"
            );
        }
    }

    #[test]
    fn criticality_residual_is_tiny() {
        for &alpha in &[1.2, 1.5, 1.9] {
            let law = OffspringLaw::new(alpha, 1 << 16).unwrap();
            assert!(law.criticality_residual() < 1e-10, "alpha={alpha}");
        }
    }

    #[test]
    fn closed_form_tail_matches_recursion_at_seam() {
        let law = OffspringLaw::new(1.5, 4096).unwrap();
        assert_relative_eq!(
            law.ln_tail(4096).exp(),
            law.tail_mass(),
            max_relative = 1e-9
        );
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(OffspringLaw::new(1.0, 100).is_err());
        assert!(OffspringLaw::new(2.0, 100).is_err());
        assert!(OffspringLaw::new(1.5, 1).is_err());
    }

    #[test]
    fn empirical_mean_is_critical() {
        let law = OffspringLaw::new(1.5, 1 << 16).unwrap();
        let mut rng = stream(7, "offspring-mean", 0);
        let n = 1_000_000u64;
        let (mut sum, mut sum2) = (0.0f64, 0.0f64);
        for _ in 0..n {
            let k = law.sample(&mut rng) as f64;
            sum += k;
            sum2 += k * k;
        }
        let mean = sum / n as f64;
        let var = (sum2 / n as f64 - mean * mean).max(0.0);
        let se = (var / n as f64).sqrt();
        assert!(
            (mean - 1.0).abs() <= 3.0 * se,
            "mean={mean} se={se} over {n} draws"
        );
    }

    #[test]
    fn sampling_is_deterministic() {
        let law = OffspringLaw::new(1.5, 1 << 12).unwrap();
        let draw = |salt: u64| -> Vec<u64> {
            let mut rng = stream(11, "offspring-det", salt);
            (0..64).map(|_| law.sample(&mut rng)).collect()
        };
        assert_eq!(draw(3), draw(3));
        assert_ne!(draw(3), draw(4));
    }

    #[test]
    fn small_tail_cut_still_exact() {
        // With a tiny table almost every draw goes through the closed-form
        // tail; the empirical mean must still be critical.
        let law = OffspringLaw::new(1.5, 2).unwrap();
        let mut rng = stream(5, "offspring-tiny", 0);
        let n = 400_000u64;
        let mut sum = 0.0f64;
        let mut count2 = 0u64;
        for _ in 0..n {
            let k = law.sample(&mut rng);
            sum += k as f64;
            if k == 2 {
                count2 += 1;
            }
        }
        let mean = sum / n as f64;
        assert!((mean - 1.0).abs() < 0.05, "mean={mean}");
        let f2 = count2 as f64 / n as f64;
        assert!((f2 - 0.25).abs() < 0.005, "p2 freq={f2}");
    }
}
