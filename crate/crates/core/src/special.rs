//! Gamma function via the Lanczos approximation (g = 7, n = 9).
//!
//! This is the only special function the engine needs: every stable-case
//! constant is built from `gamma`, and the exact offspring tail inversion
//! uses `ln_gamma` at large arguments.

use std::f64::consts::PI;

const LANCZOS_G: f64 = 7.0;

// Coefficients from the GNU Scientific Library's g=7, n=9 table.
const LANCZOS_COEF: [f64; 9] = [
    0.999_999_999_999_809_93,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_13,
    -176.615_029_162_140_59,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_571_6e-6,
    1.505_632_735_149_311_6e-7,
];

fn lanczos_series(x: f64) -> f64 {
    let mut a = LANCZOS_COEF[0];
    for (i, &c) in LANCZOS_COEF.iter().enumerate().skip(1) {
        a += c / (x + i as f64);
    }
    a
}

/// Gamma function for real arguments (poles at 0, -1, -2, ... excluded).
pub fn gamma(x: f64) -> f64 {
    if x < 0.5 {
        // Reflection formula keeps the Lanczos series on x >= 0.5.
        PI / ((PI * x).sin() * gamma(1.0 - x))
    } else {
        let x = x - 1.0;
        let t = x + LANCZOS_G + 0.5;
        (2.0 * PI).sqrt() * t.powf(x + 0.5) * (-t).exp() * lanczos_series(x)
    }
}

/// Natural log of the Gamma function for x > 0.
///
/// Evaluated in log form so arguments of order 10^9 (offspring tail
/// inversion) do not overflow.
pub fn ln_gamma(x: f64) -> f64 {
    debug_assert!(x > 0.0, "ln_gamma requires x > 0, got {x}");
    if x < 0.5 {
        // ln Γ(x) = ln π - ln sin(πx) - ln Γ(1-x); sin(πx) > 0 on (0, 1/2).
        PI.ln() - (PI * x).sin().ln() - ln_gamma(1.0 - x)
    } else {
        let x = x - 1.0;
        let t = x + LANCZOS_G + 0.5;
        0.5 * (2.0 * PI).ln() + (x + 0.5) * t.ln() - t + lanczos_series(x).ln()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rel_err(a: f64, b: f64) -> f64 {
        ((a - b) / b).abs()
    }

    #[test]
    fn matches_known_values() {
        assert!(rel_err(gamma(0.5), PI.sqrt()) < 1e-12);
        assert!(rel_err(gamma(1.0), 1.0) < 1e-12);
        assert!(rel_err(gamma(2.0), 1.0) < 1e-12);
        assert!(rel_err(gamma(5.0), 24.0) < 1e-12);
        // Γ(1/3), Γ(2/3): reference values to 16 digits.
        assert!(rel_err(gamma(1.0 / 3.0), 2.678_938_534_707_747_6) < 1e-12);
        assert!(rel_err(gamma(2.0 / 3.0), 1.354_117_939_426_400_4) < 1e-12);
    }

    #[test]
    fn factorials_via_recursion() {
        let mut fact = 1.0;
        for n in 1..30u32 {
            fact *= n as f64;
            assert!(rel_err(gamma(n as f64 + 1.0), fact) < 1e-12, "n={n}");
        }
    }

    #[test]
    fn ln_gamma_consistent_with_gamma() {
        for &x in &[0.1, 0.3, 0.5, 1.0, 1.5, 3.7, 10.0, 40.5] {
            assert!(rel_err(ln_gamma(x).exp(), gamma(x)) < 1e-11, "x={x}");
        }
    }

    #[test]
    fn ln_gamma_large_arguments() {
        // ln Γ(n+1) = Σ ln k, an independent route for large arguments.
        for &n in &[100u64, 10_000, 1_000_000] {
            let direct: f64 = (1..=n).map(|k| (k as f64).ln()).sum();
            assert!(rel_err(ln_gamma(n as f64 + 1.0), direct) < 1e-12, "n={n}");
        }
    }

    #[test]
    fn reflection_identity() {
        for &x in &[0.05, 0.2, 0.45] {
            let lhs = gamma(x) * gamma(1.0 - x);
            let rhs = PI / (PI * x).sin();
            assert!(rel_err(lhs, rhs) < 1e-12);
        }
    }
}
