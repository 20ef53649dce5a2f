//! Small statistics toolkit shared by the suites.

use crate::error::{Error, Result};

/// Streaming mean/variance accumulator.
#[derive(Debug, Clone, Copy, Default)]
pub struct Running {
    pub n: u64,
    pub sum: f64,
    pub sum2: f64,
}

impl Running {
    pub fn push(&mut self, x: f64) {
        self.n += 1;
        self.sum += x;
        self.sum2 += x * x;
    }

    pub fn merge(&mut self, other: &Running) {
        self.n += other.n;
        self.sum += other.sum;
        self.sum2 += other.sum2;
    }

    pub fn mean(&self) -> f64 {
        if self.n == 0 {
            0.0
        } else {
            self.sum / self.n as f64
        }
    }

    pub fn variance(&self) -> f64 {
        if self.n < 2 {
            return 0.0;
        }
        let m = self.mean();
        ((self.sum2 / self.n as f64) - m * m).max(0.0)
    }

    pub fn se(&self) -> f64 {
        if self.n == 0 {
            0.0
        } else {
            (self.variance() / self.n as f64).sqrt()
        }
    }

    pub fn rel_se(&self) -> f64 {
        let m = self.mean();
        if m == 0.0 {
            0.0
        } else {
            (self.se() / m).abs()
        }
    }
}

/// Paired accumulator for ratio estimates with a common sample.
#[derive(Debug, Clone, Copy, Default)]
pub struct Paired {
    pub n: u64,
    pub sx: f64,
    pub sy: f64,
    pub sxx: f64,
    pub syy: f64,
    pub sxy: f64,
}

impl Paired {
    pub fn push(&mut self, x: f64, y: f64) {
        self.n += 1;
        self.sx += x;
        self.sy += y;
        self.sxx += x * x;
        self.syy += y * y;
        self.sxy += x * y;
    }

    pub fn merge(&mut self, o: &Paired) {
        self.n += o.n;
        self.sx += o.sx;
        self.sy += o.sy;
        self.sxx += o.sxx;
        self.syy += o.syy;
        self.sxy += o.sxy;
    }

    pub fn mean_x(&self) -> f64 {
        self.sx / self.n as f64
    }

    pub fn mean_y(&self) -> f64 {
        self.sy / self.n as f64
    }

    /// Delta-method relative standard error of mean_x / mean_y.
    pub fn ratio_rel_se(&self) -> f64 {
        let n = self.n as f64;
        let (mx, my) = (self.mean_x(), self.mean_y());
        let vx = (self.sxx / n - mx * mx).max(0.0);
        let vy = (self.syy / n - my * my).max(0.0);
        let cxy = self.sxy / n - mx * my;
        let rel2 = vx / (mx * mx) + vy / (my * my) - 2.0 * cxy / (mx * my);
        (rel2.max(0.0) / n).sqrt()
    }
}

/// Weighted least squares fit of y = intercept + slope x.
#[derive(Debug, Clone, Copy)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    pub slope_se: f64,
    pub r2: f64,
    pub max_abs_residual: f64,
    pub points: usize,
}

pub fn weighted_line_fit(points: &[(f64, f64, f64)]) -> Result<LineFit> {
    if points.len() < 2 {
        return Err(Error::Calibration(format!(
            "need at least 2 points for a line fit, got {}",
            points.len()
        )));
    }
    let sw: f64 = points.iter().map(|p| p.2).sum();
    let mx: f64 = points.iter().map(|p| p.2 * p.0).sum::<f64>() / sw;
    let my: f64 = points.iter().map(|p| p.2 * p.1).sum::<f64>() / sw;
    let sxx: f64 = points.iter().map(|p| p.2 * (p.0 - mx) * (p.0 - mx)).sum();
    let sxy: f64 = points.iter().map(|p| p.2 * (p.0 - mx) * (p.1 - my)).sum();
    if sxx <= 0.0 {
        return Err(Error::Calibration("degenerate abscissa in line fit".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let mut ss_res = 0.0;
    let mut ss_tot = 0.0;
    let mut max_abs = 0.0f64;
    for &(x, y, w) in points {
        let r = y - (intercept + slope * x);
        ss_res += w * r * r;
        ss_tot += w * (y - my) * (y - my);
        max_abs = max_abs.max(r.abs());
    }
    let dof = (points.len() as f64 - 2.0).max(1.0);
    let slope_se = (ss_res / dof / sxx).sqrt();
    let r2 = if ss_tot > 0.0 { 1.0 - ss_res / ss_tot } else { 1.0 };
    Ok(LineFit {
        slope,
        intercept,
        slope_se,
        r2,
        max_abs_residual: max_abs,
        points: points.len(),
    })
}

/// Two-sample Kolmogorov–Smirnov statistic and asymptotic p-value
/// (Stephens' small-sample correction; ties make the p conservative).
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<(f64, f64)> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::domain("KS test requires non-empty samples"));
    }
    let mut xs = a.to_vec();
    let mut ys = b.to_vec();
    xs.sort_by(|p, q| p.partial_cmp(q).unwrap());
    ys.sort_by(|p, q| p.partial_cmp(q).unwrap());
    let (n, m) = (xs.len(), ys.len());
    let (mut i, mut j) = (0usize, 0usize);
    let mut d = 0.0f64;
    while i < n && j < m {
        let t = xs[i].min(ys[j]);
        while i < n && xs[i] <= t {
            i += 1;
        }
        while j < m && ys[j] <= t {
            j += 1;
        }
        d = d.max((i as f64 / n as f64 - j as f64 / m as f64).abs());
    }
    let ne = (n as f64 * m as f64) / (n as f64 + m as f64);
    let lambda = (ne.sqrt() + 0.12 + 0.11 / ne.sqrt()) * d;
    Ok((d, kolmogorov_sf(lambda)))
}

/// Q_KS(λ) = 2 Σ_{j>=1} (-1)^{j-1} e^{-2 j² λ²}.
pub fn kolmogorov_sf(lambda: f64) -> f64 {
    if lambda <= 0.0 {
        return 1.0;
    }
    let mut sum = 0.0;
    for j in 1..=100 {
        let term = (-2.0 * (j as f64) * (j as f64) * lambda * lambda).exp();
        sum += if j % 2 == 1 { term } else { -term };
        if term < 1e-12 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// Pooled within-group index of dispersion: pooled variance over pooled
/// mean, skipping groups smaller than `min_group`.
pub fn pooled_dispersion(groups: &[Vec<f64>], min_group: usize) -> Result<f64> {
    let mut ss = 0.0;
    let mut dof = 0.0;
    let mut total = 0.0;
    let mut count = 0.0;
    for g in groups {
        if g.len() < min_group.max(2) {
            continue;
        }
        let n = g.len() as f64;
        let mean = g.iter().sum::<f64>() / n;
        ss += g.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>();
        dof += n - 1.0;
        total += mean * n;
        count += n;
    }
    if dof <= 0.0 || total <= 0.0 {
        return Err(Error::domain(
            "dispersion undefined: empty groups or zero mean",
        ));
    }
    Ok((ss / dof) / (total / count))
}

/// Median of a slice (average of central pair for even lengths).
pub fn median(values: &mut [f64]) -> f64 {
    assert!(!values.is_empty());
    values.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// Log-linear interpolation of positive values y0, y1 at fractional
/// position f in [0, 1].
pub fn log_lerp(y0: f64, y1: f64, f: f64) -> Result<f64> {
    if !(y0 > 0.0 && y1 > 0.0) {
        return Err(Error::Numeric(format!(
            "log interpolation requires positive values, got ({y0}, {y1})"
        )));
    }
    Ok((y0.ln() * (1.0 - f) + y1.ln() * f).exp())
}
