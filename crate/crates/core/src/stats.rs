//! Sample moments, bootstrap standard errors and normality checks.

use crate::rng::replicate_rng;
use rand::Rng;
use serde::{Deserialize, Serialize};


/// Standard normal distribution function.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

pub fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

/// Unbiased sample variance.
pub fn variance(x: &[f64]) -> f64 {
    let m = mean(x);
    x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (x.len() as f64 - 1.0)
}

/// Unbiased sample covariance matrix of the rows of `data`.
pub fn covariance_matrix(data: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let d = data.first().map_or(0, |r| r.len());
    let n = data.len() as f64;
    let mu: Vec<f64> = (0..d).map(|j| data.iter().map(|r| r[j]).sum::<f64>() / n).collect();
    let mut c = vec![vec![0.0; d]; d];
    for row in data {
        for i in 0..d {
            let di = row[i] - mu[i];
            for j in i..d {
                c[i][j] += di * (row[j] - mu[j]);
            }
        }
    }
    for i in 0..d {
        for j in i..d {
            c[i][j] /= n - 1.0;
            c[j][i] = c[i][j];
        }
    }
    c
}

/// Kolmogorov–Smirnov distance between the empirical law of `z` and N(0,1).
pub fn ks_standard_normal(z: &[f64]) -> f64 {
    let mut s: Vec<f64> = z.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len() as f64;
    s.iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = normal_cdf(x);
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianFit {
    pub count: usize,
    pub mean: f64,
    pub var: f64,
    /// KS distance of the standardized sample to N(0,1); `None` when degenerate.
    pub ks: Option<f64>,
    pub degenerate: bool,
    /// KS below the asymptotic 5% and 1% critical values 1.358/√n, 1.628/√n.
    pub ks_ok_05: bool,
    pub ks_ok_01: bool,
}

/// Moments and a KS normality check of a sample.
pub fn gaussian_fit(x: &[f64]) -> GaussianFit {
    assert!(x.len() >= 2, "gaussian_fit needs at least two samples");
    let m = mean(x);
    let v = variance(x);
    let degenerate = !(v > 0.0) || x.iter().all(|y| *y == x[0]);
    let ks = if degenerate {
        None
    } else {
        let sd = v.sqrt();
        Some(ks_standard_normal(&x.iter().map(|y| (y - m) / sd).collect::<Vec<_>>()))
    };
    let rn = (x.len() as f64).sqrt();
    GaussianFit {
        count: x.len(),
        mean: m,
        var: v,
        ks,
        degenerate,
        ks_ok_05: ks.is_some_and(|d| d < 1.358 / rn),
        ks_ok_01: ks.is_some_and(|d| d < 1.628 / rn),
    }
}

/// Summary of multivariate replicate data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleStats {
    pub count: usize,
    pub columns: Vec<String>,
    pub mean: Vec<f64>,
    pub cov: Vec<Vec<f64>>,
    /// Per-column KS distance of the standardized marginal to N(0,1).
    pub ks: Vec<Option<f64>>,
    /// Standard errors of the means.
    pub se_mean: Vec<f64>,
    /// Bootstrap standard errors of the covariance entries.
    pub se_cov: Vec<Vec<f64>>,
}

pub fn sample_stats(columns: &[&str], data: &[Vec<f64>], bootstrap: usize, seed: u64) -> SampleStats {
    let d = columns.len();
    let n = data.len();
    let cov = covariance_matrix(data);
    let mean: Vec<f64> = (0..d).map(|j| data.iter().map(|r| r[j]).sum::<f64>() / n as f64).collect();
    let ks = (0..d)
        .map(|j| gaussian_fit(&data.iter().map(|r| r[j]).collect::<Vec<_>>()).ks)
        .collect();
    let se_mean = (0..d).map(|j| (cov[j][j] / n as f64).sqrt()).collect();
    SampleStats {
        count: n,
        columns: columns.iter().map(|s| s.to_string()).collect(),
        mean,
        cov,
        ks,
        se_mean,
        se_cov: bootstrap_cov_se(data, bootstrap, seed),
    }
}

/// Standard deviation of each covariance entry over `reps` bootstrap resamples.
pub fn bootstrap_cov_se(data: &[Vec<f64>], reps: usize, seed: u64) -> Vec<Vec<f64>> {
    let d = data.first().map_or(0, |r| r.len());
    let n = data.len();
    if reps < 2 || n < 2 {
        return vec![vec![f64::NAN; d]; d];
    }
    let mut rng = replicate_rng(seed, u64::MAX);
    let mut sum = vec![vec![0.0; d]; d];
    let mut sum2 = vec![vec![0.0; d]; d];
    let mut sample = vec![Vec::new(); n];
    for _ in 0..reps {
        for s in sample.iter_mut() {
            *s = data[rng.random_range(0..n)].clone();
        }
        let c = covariance_matrix(&sample);
        for i in 0..d {
            for j in 0..d {
                sum[i][j] += c[i][j];
                sum2[i][j] += c[i][j] * c[i][j];
            }
        }
    }
    let r = reps as f64;
    (0..d)
        .map(|i| {
            (0..d)
                .map(|j| ((sum2[i][j] - sum[i][j] * sum[i][j] / r) / (r - 1.0)).max(0.0).sqrt())
                .collect()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn degenerate_sample() {
        let f = gaussian_fit(&[2.0; 10]);
        assert!(f.degenerate && f.ks.is_none());
    }

    #[test]
    fn normal_quantile_grid() {
        // Midpoint quantiles of N(0,1) by bisection on the distribution function.
        let n = 1000;
        let q: Vec<f64> = (0..n)
            .map(|i| {
                let target = (i as f64 + 0.5) / n as f64;
                crate::threshold::bisect(|x| normal_cdf(x) - target, -10.0, 10.0)
            })
            .collect();
        let f = gaussian_fit(&q);
        assert!(f.ks.unwrap() < 0.002, "{:?}", f.ks);
    }

    #[test]
    fn uniform_is_rejected() {
        let mut rng = replicate_rng(1, 0);
        let x: Vec<f64> = (0..1000).map(|_| rng.random::<f64>()).collect();
        let f = gaussian_fit(&x);
        assert!(f.ks.unwrap() > 0.05);
    }

    #[test]
    fn moments_and_bootstrap() {
        let mut rng = replicate_rng(2, 0);
        let data: Vec<Vec<f64>> = (0..2000)
            .map(|_| {
                let a: f64 = rng.random::<f64>() - 0.5;
                let b: f64 = rng.random::<f64>() - 0.5;
                vec![a, a + b]
            })
            .collect();
        let s = sample_stats(&["a", "ab"], &data, 300, 9);
        // Var U(−½,½) = 1/12; Cov(a, a+b) = 1/12; Var(a+b) = 1/6
        assert!((s.cov[0][0] - 1.0 / 12.0).abs() < 4.0 * s.se_cov[0][0]);
        assert!((s.cov[0][1] - 1.0 / 12.0).abs() < 4.0 * s.se_cov[0][1]);
        assert!((s.cov[1][1] - 1.0 / 6.0).abs() < 4.0 * s.se_cov[1][1]);
        // analytic SE of a variance estimate for U(−½,½): √((μ4 − σ⁴)/n)
        let se = ((1.0 / 80.0 - 1.0 / 144.0) / 2000.0f64).sqrt();
        assert!((s.se_cov[0][0] / se - 1.0).abs() < 0.2);
        assert_eq!(s.cov[0][1], s.cov[1][0]);
    }

    #[test]
    fn cdf_values() {
        assert!((normal_cdf(0.0) - 0.5).abs() < 1e-16);
        let d = normal_cdf(1.0) - 0.841344746068543; assert!(d.abs() < 1e-14, "{d:e}");
    }
}
