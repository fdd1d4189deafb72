//! Estimators consumed by the experiments: empirical distributions, the
//! two-sample KS test, correlation with bootstrap intervals, log-log exponent
//! fits, and central moments. Nothing here aspires to be a general statistics
//! library.

use rand::Rng;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StatsError {
    #[error("empty sample")]
    EmptySample,
    #[error("need at least {need} points, got {got}")]
    TooFewPoints { need: usize, got: usize },
    #[error("sample contains NaN")]
    ContainsNan,
    #[error("nonpositive value {0} where a positive one is required")]
    NonpositiveValue(f64),
    #[error("degenerate variance in input")]
    DegenerateVariance,
    #[error("moment order {0} not supported (1..=4)")]
    BadMomentOrder(usize),
}

/// A sample held sorted so CDF queries are binary searches. Construction
/// rejects NaN.
#[derive(Debug, Clone)]
pub struct EmpiricalDistribution {
    samples: Vec<f64>,
}

impl EmpiricalDistribution {
    pub fn new(mut samples: Vec<f64>) -> Result<Self, StatsError> {
        if samples.is_empty() {
            return Err(StatsError::EmptySample);
        }
        if samples.iter().any(|x| x.is_nan()) {
            return Err(StatsError::ContainsNan);
        }
        samples.sort_by(|a, b| a.partial_cmp(b).unwrap());
        Ok(Self { samples })
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Right-continuous empirical CDF: fraction of samples <= x.
    pub fn cdf(&self, x: f64) -> f64 {
        let k = self.samples.partition_point(|&s| s <= x);
        k as f64 / self.samples.len() as f64
    }
}

/// Survival function of the Kolmogorov distribution, Q(lambda) = P(K > lambda).
/// Two complementary series: the alternating sum for large lambda, the
/// theta-dual form for small lambda where the former converges slowly.
pub fn kolmogorov_survival(lambda: f64) -> f64 {
    if lambda <= 1e-8 {
        return 1.0;
    }
    if lambda < 1.18 {
        // 1 - sqrt(2 pi)/lambda * sum over odd j of exp(-(j pi)^2 / (8 lambda^2))
        let mut sum = 0.0;
        let c = std::f64::consts::PI * std::f64::consts::PI / (8.0 * lambda * lambda);
        for j in (1..50).step_by(2) {
            let term = (-c * (j * j) as f64).exp();
            sum += term;
            if term < 1e-18 * sum {
                break;
            }
        }
        (1.0 - (2.0 * std::f64::consts::PI).sqrt() / lambda * sum).clamp(0.0, 1.0)
    } else {
        let mut sum = 0.0;
        for j in 1..50 {
            let term = (-2.0 * (j * j) as f64 * lambda * lambda).exp();
            sum += if j % 2 == 1 { term } else { -term };
            if term < 1e-18 {
                break;
            }
        }
        (2.0 * sum).clamp(0.0, 1.0)
    }
}

/// Two-sample Kolmogorov-Smirnov test. Returns (D, asymptotic p-value) with
/// the usual effective-size correction lambda = D (sqrt(ne) + 0.12 + 0.11/sqrt(ne)).
pub fn ks_two_sample(
    a: &EmpiricalDistribution,
    b: &EmpiricalDistribution,
) -> Result<(f64, f64), StatsError> {
    let (xs, ys) = (a.samples(), b.samples());
    let (n, m) = (xs.len(), ys.len());
    let mut i = 0;
    let mut j = 0;
    let mut d: f64 = 0.0;
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
    let sqrt_ne = ne.sqrt();
    let lambda = d * (sqrt_ne + 0.12 + 0.11 / sqrt_ne);
    Ok((d, kolmogorov_survival(lambda)))
}

/// Linear-interpolation quantile of an already sorted slice, q in [0, 1].
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    debug_assert!(!sorted.is_empty());
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let pos = q.clamp(0.0, 1.0) * (n - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] + (sorted[hi] - sorted[lo]) * frac
}

fn correlation(pairs: &[(f64, f64)]) -> Result<f64, StatsError> {
    let n = pairs.len() as f64;
    let mx = pairs.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pairs.iter().map(|p| p.1).sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    let mut sxy = 0.0;
    for &(x, y) in pairs {
        sxx += (x - mx) * (x - mx);
        syy += (y - my) * (y - my);
        sxy += (x - mx) * (y - my);
    }
    if sxx <= 0.0 || syy <= 0.0 {
        return Err(StatsError::DegenerateVariance);
    }
    Ok(sxy / (sxx * syy).sqrt())
}

/// Pearson correlation with a percentile bootstrap 95% interval over pair
/// resamples. The caller supplies the RNG so replicates are reproducible.
pub fn pearson<R: Rng>(
    pairs: &[(f64, f64)],
    resamples: usize,
    rng: &mut R,
) -> Result<(f64, (f64, f64)), StatsError> {
    if pairs.len() < 10 {
        return Err(StatsError::TooFewPoints {
            need: 10,
            got: pairs.len(),
        });
    }
    let r = correlation(pairs)?;
    let n = pairs.len();
    let mut reps = Vec::with_capacity(resamples);
    let mut draw = Vec::with_capacity(n);
    for _ in 0..resamples {
        draw.clear();
        for _ in 0..n {
            draw.push(pairs[rng.random_range(0..n)]);
        }
        // Degenerate resamples (all-equal pairs) carry no information; resampling
        // cannot fabricate variance the data had, so just skip them.
        if let Ok(rb) = correlation(&draw) {
            reps.push(rb);
        }
    }
    if reps.is_empty() {
        return Err(StatsError::DegenerateVariance);
    }
    reps.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let ci = (quantile_sorted(&reps, 0.025), quantile_sorted(&reps, 0.975));
    Ok((r, ci))
}

/// Least-squares fit of log(statistic) against log(scale).
#[derive(Debug, Clone)]
pub struct ExponentFit {
    pub slope: f64,
    pub intercept: f64,
    pub stderr: f64,
    pub ci95: (f64, f64),
    pub points: Vec<(f64, f64)>,
}

/// Fits statistic = c * scale^slope by ordinary least squares on logs.
/// The interval is slope +- 1.96 stderr; use [`fit_exponent_bootstrap`] when
/// per-point trial samples are available.
pub fn fit_exponent(points: &[(f64, f64)]) -> Result<ExponentFit, StatsError> {
    if points.len() < 3 {
        return Err(StatsError::TooFewPoints {
            need: 3,
            got: points.len(),
        });
    }
    for &(s, y) in points {
        if !(s > 0.0) {
            return Err(StatsError::NonpositiveValue(s));
        }
        if !(y > 0.0) {
            return Err(StatsError::NonpositiveValue(y));
        }
    }
    let logs: Vec<(f64, f64)> = points.iter().map(|&(s, y)| (s.ln(), y.ln())).collect();
    let n = logs.len() as f64;
    let mx = logs.iter().map(|p| p.0).sum::<f64>() / n;
    let my = logs.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = logs.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    if sxx <= 0.0 {
        return Err(StatsError::DegenerateVariance);
    }
    let sxy: f64 = logs.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = logs
        .iter()
        .map(|p| {
            let res = p.1 - (intercept + slope * p.0);
            res * res
        })
        .sum();
    let dof = (logs.len() - 2).max(1) as f64;
    let stderr = (sse / dof / sxx).sqrt();
    Ok(ExponentFit {
        slope,
        intercept,
        stderr,
        ci95: (slope - 1.96 * stderr, slope + 1.96 * stderr),
        points: points.to_vec(),
    })
}

/// Exponent fit whose CI comes from resampling the per-scale trial samples:
/// each replicate draws trials with replacement at every scale, recomputes the
/// statistic there, and refits. `statistic` maps a resampled trial vector to
/// the per-scale summary (e.g. standard deviation).
pub fn fit_exponent_bootstrap<R: Rng>(
    per_scale: &[(f64, Vec<f64>)],
    statistic: impl Fn(&[f64]) -> f64,
    resamples: usize,
    rng: &mut R,
) -> Result<ExponentFit, StatsError> {
    let points: Vec<(f64, f64)> = per_scale
        .iter()
        .map(|(s, trials)| (*s, statistic(trials)))
        .collect();
    let mut fit = fit_exponent(&points)?;
    let mut slopes = Vec::with_capacity(resamples);
    let mut buf = Vec::new();
    for _ in 0..resamples {
        let mut rep = Vec::with_capacity(per_scale.len());
        for (s, trials) in per_scale {
            buf.clear();
            for _ in 0..trials.len() {
                buf.push(trials[rng.random_range(0..trials.len())]);
            }
            rep.push((*s, statistic(&buf)));
        }
        if let Ok(f) = fit_exponent(&rep) {
            slopes.push(f.slope);
        }
    }
    if !slopes.is_empty() {
        slopes.sort_by(|a, b| a.partial_cmp(b).unwrap());
        fit.ci95 = (
            quantile_sorted(&slopes, 0.025),
            quantile_sorted(&slopes, 0.975),
        );
    }
    Ok(fit)
}

/// Central moments up to order k (k in 1..=4): [mean, unbiased variance,
/// plug-in third, plug-in fourth]. The variance uses the n-1 denominator;
/// orders 3 and 4 are plain plug-in estimators (biased, consistent).
pub fn central_moments(samples: &[f64], k: usize) -> Result<Vec<f64>, StatsError> {
    if samples.is_empty() {
        return Err(StatsError::EmptySample);
    }
    if !(1..=4).contains(&k) {
        return Err(StatsError::BadMomentOrder(k));
    }
    if k >= 2 && samples.len() < 2 {
        return Err(StatsError::TooFewPoints {
            need: 2,
            got: samples.len(),
        });
    }
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let mut out = vec![mean];
    if k >= 2 {
        let ss: f64 = samples.iter().map(|x| (x - mean) * (x - mean)).sum();
        out.push(ss / (n - 1.0));
    }
    for order in 3..=k {
        let m: f64 = samples
            .iter()
            .map(|x| (x - mean).powi(order as i32))
            .sum::<f64>()
            / n;
        out.push(m);
    }
    Ok(out)
}

/// Sample mean; errors on empty input.
pub fn mean(samples: &[f64]) -> Result<f64, StatsError> {
    if samples.is_empty() {
        return Err(StatsError::EmptySample);
    }
    Ok(samples.iter().sum::<f64>() / samples.len() as f64)
}

/// Unbiased standard deviation.
pub fn std_dev(samples: &[f64]) -> Result<f64, StatsError> {
    Ok(central_moments(samples, 2)?[1].sqrt())
}
