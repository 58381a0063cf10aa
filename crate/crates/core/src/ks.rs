//! One-sample Kolmogorov-Smirnov test with the asymptotic Kolmogorov p-value.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{FcltError, Result};

/// Terms of the Kolmogorov series are summed until they drop below this.
const SERIES_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KsResult {
    pub statistic: f64,
    pub p_value: f64,
    pub sample_size: usize,
}

/// `sup_x |F_n(x) - F(x)|` for the empirical CDF of `samples`.
pub fn ks_statistic(samples: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    sorted
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).max((i + 1) as f64 / n - f)
        })
        .fold(0.0, f64::max)
}

/// `P(K > x)` for the Kolmogorov distribution.
pub fn kolmogorov_survival(x: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    if x < 1.18 {
        // P(K <= x) = sqrt(2 pi)/x sum_{k>=1} exp(-(2k-1)^2 pi^2 / (8 x^2))
        let scale = (2.0 * std::f64::consts::PI).sqrt() / x;
        let mut sum = 0.0;
        for k in 1.. {
            let odd = (2 * k - 1) as f64;
            let term = (-odd * odd * std::f64::consts::PI.powi(2) / (8.0 * x * x)).exp();
            sum += term;
            if scale * term < SERIES_TOL {
                break;
            }
        }
        (1.0 - scale * sum).clamp(0.0, 1.0)
    } else {
        // P(K > x) = 2 sum_{k>=1} (-1)^{k-1} exp(-2 k^2 x^2)
        let mut sum = 0.0;
        for k in 1.. {
            let kf = k as f64;
            let term = 2.0 * (-2.0 * kf * kf * x * x).exp();
            sum += if k % 2 == 1 { term } else { -term };
            if term < SERIES_TOL {
                break;
            }
        }
        sum.clamp(0.0, 1.0)
    }
}

/// Two-sided test of `samples` against the continuous distribution `cdf`.
pub fn ks_test(samples: &[f64], cdf: impl Fn(f64) -> f64) -> Result<KsResult> {
    if samples.is_empty() {
        return Err(FcltError::invalid("KS test needs at least one sample"));
    }
    let statistic = ks_statistic(samples, cdf);
    let n = samples.len();
    Ok(KsResult {
        statistic,
        p_value: kolmogorov_survival((n as f64).sqrt() * statistic),
        sample_size: n,
    })
}

/// KS test against `Normal(mean, sd^2)`.
pub fn ks_test_normal(samples: &[f64], mean: f64, sd: f64) -> Result<KsResult> {
    let normal = Normal::new(mean, sd).map_err(|e| FcltError::invalid(format!("normal law: {e}")))?;
    ks_test(samples, |x| normal.cdf(x))
}

/// `sup_x |Phi(x / sd_a) - Phi(x / sd_b)|` for two centered normals.
pub fn normal_scale_distance(sd_a: f64, sd_b: f64) -> f64 {
    if sd_a == sd_b {
        return 0.0;
    }
    let (lo, hi) = if sd_a < sd_b { (sd_a, sd_b) } else { (sd_b, sd_a) };
    if lo == 0.0 {
        return 0.5;
    }
    // densities cross at x^2 = 2 ln(hi/lo) lo^2 hi^2 / (hi^2 - lo^2)
    let x = (2.0 * (hi / lo).ln() * lo * lo * hi * hi / (hi * hi - lo * lo)).sqrt();
    let std_normal = Normal::new(0.0, 1.0).expect("unit normal");
    std_normal.cdf(x / lo) - std_normal.cdf(x / hi)
}
