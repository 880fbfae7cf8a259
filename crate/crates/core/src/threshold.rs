//! Threshold quantities: c_k, μ_k(λ), p̂, p̄, and the local constants at p̂.

use crate::degree::{self, DegreeDistribution};
use crate::error::{domain, Error, Result};
use crate::poisson::{pmf_i, tail};
use serde::{Deserialize, Serialize};

/// Bisection on [lo, hi] for a sign change of `f`; runs until the bracket
/// stops shrinking in floating point.
pub(crate) fn bisect<F: Fn(f64) -> f64>(f: F, mut lo: f64, mut hi: f64) -> f64 {
    let flo = f(lo);
    let neg_lo = flo < 0.0;
    for _ in 0..400 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let fm = f(mid);
        if fm == 0.0 {
            return mid;
        }
        if (fm < 0.0) == neg_lo {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

fn check_k(k: usize) -> Result<()> {
    if k < 2 {
        return domain(format!("k must be >= 2, got {k}"));
    }
    Ok(())
}

/// c_k = inf_{μ>0} μ/ψ_{k−1}(μ) and its minimizer.
///
/// For k = 2 the infimum 1 is only approached as μ → 0; the minimizer is
/// reported as 0.
pub fn compute_ck(k: usize) -> Result<(f64, f64)> {
    check_k(k)?;
    if k == 2 {
        return Ok((1.0, 0.0));
    }
    // f' has the sign of ψ_{k−1}(μ) − μπ_{k−2}(μ): negative near 0, positive for large μ.
    let g = |mu: f64| tail(k - 1, mu) - mu * pmf_i(k as i64 - 2, mu);
    let mu = bisect(g, 1e-6, 4.0 * k as f64 + 10.0);
    Ok((mu / tail(k - 1, mu), mu))
}

/// μ_k(λ): the largest root of μ/ψ_{k−1}(μ) = λ.
pub fn mu_k(k: usize, lambda: f64) -> Result<f64> {
    check_k(k)?;
    if !(lambda.is_finite() && lambda > 0.0) {
        return domain(format!("lambda must be positive, got {lambda}"));
    }
    let (ck, argmin) = compute_ck(k)?;
    if k == 2 && lambda <= ck {
        return domain(format!("mu_2 requires lambda > 1, got {lambda}"));
    }
    if lambda < ck - 1e-12 {
        return Err(Error::NoRoot(format!("lambda = {lambda} is below c_{k} = {ck}")));
    }
    if lambda <= ck + 1e-12 {
        return Ok(argmin);
    }
    let f = |mu: f64| mu - lambda * tail(k - 1, mu);
    let lo = if k == 2 { 1e-300_f64.max(1e-12 * lambda) } else { argmin };
    if f(lambda) == 0.0 {
        return Ok(lambda);
    }
    Ok(bisect(f, lo, lambda))
}

/// Classification of the largest zero of l on (0, 1].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RootKind {
    /// Transversal zero with l' > 0.
    Supercritical,
    /// Tangential zero (double root).
    Critical,
    /// l(1) = 0.
    Boundary,
    /// l > 0 on (0, 1]; p̂ = 0.
    Subcritical,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PHat {
    pub p: f64,
    pub kind: RootKind,
}

/// Largest p ≤ 1 with l(p) = 0 for the thinned law of `dist`.
pub fn p_hat_of(dist: &DegreeDistribution, k: usize) -> Result<PHat> {
    check_k(k)?;
    let l = |p: f64| degree::bhl(dist, k, p).2;
    let dl = |p: f64| degree::bhl_deriv(dist, k, p).2;
    if l(1.0).abs() < 1e-12 {
        return Ok(PHat { p: 1.0, kind: RootKind::Boundary });
    }
    let step = 1e-3;
    let mut hi = 1.0;
    let mut l_hi = l(hi);
    let mut d_hi = dl(hi);
    let n_steps = (1.0 / step) as usize;
    for i in 1..n_steps {
        let p = 1.0 - i as f64 * step;
        let lp = l(p);
        if (lp < 0.0) != (l_hi < 0.0) {
            let root = bisect(l, p, hi);
            return Ok(PHat { p: root, kind: RootKind::Supercritical });
        }
        let dp = dl(p);
        if d_hi > 0.0 && dp <= 0.0 && l_hi > 0.0 {
            // Local minimum of l inside (p, hi).
            let pm = bisect(dl, p, hi);
            let lm = l(pm);
            if lm.abs() < 1e-10 {
                return Ok(PHat { p: pm, kind: RootKind::Critical });
            }
            if lm < 0.0 {
                let root = bisect(l, pm, hi);
                return Ok(PHat { p: root, kind: RootKind::Supercritical });
            }
        }
        hi = p;
        l_hi = lp;
        d_hi = dp;
    }
    Ok(PHat { p: 0.0, kind: RootKind::Subcritical })
}

/// Unique minimizer p̄ of l on [δ₀, 1] and the minimum l(p̄).
pub fn p_bar_of(dist: &DegreeDistribution, k: usize, delta0: f64) -> Result<(f64, f64)> {
    if k < 3 {
        return domain(format!("p_bar requires k >= 3, got {k}"));
    }
    if !(delta0 > 0.0 && delta0 < 1.0) {
        return domain(format!("delta0 must lie in (0,1), got {delta0}"));
    }
    let l = |p: f64| degree::bhl(dist, k, p).2;
    let dl = |p: f64| degree::bhl_deriv(dist, k, p).2;
    let g = 2000usize;
    let grid: Vec<f64> = (0..=g).map(|i| delta0 + (1.0 - delta0) * i as f64 / g as f64).collect();
    let vals: Vec<f64> = grid.iter().map(|&p| l(p)).collect();
    let imin = (0..=g).min_by(|&a, &b| vals[a].total_cmp(&vals[b])).unwrap();
    // Any other grid-local minimum of (numerically) equal depth is a degeneracy.
    let scale = vals.iter().fold(0.0f64, |a, v| a.max(v.abs())).max(1e-300);
    for i in 1..g {
        if (i as i64 - imin as i64).abs() > 2
            && vals[i] <= vals[i - 1]
            && vals[i] <= vals[i + 1]
            && (vals[i] - vals[imin]).abs() <= 1e-12 * scale
        {
            return Err(Error::Degenerate(format!(
                "l has minima of equal depth near {} and {}",
                grid[imin], grid[i]
            )));
        }
    }
    let lo = grid[imin.saturating_sub(1)];
    let hi = grid[(imin + 1).min(g)];
    let pm = if dl(lo) < 0.0 && dl(hi) > 0.0 {
        bisect(dl, lo, hi)
    } else {
        golden_min(&l, lo, hi)
    };
    Ok((pm, l(pm)))
}

fn golden_min<F: Fn(f64) -> f64>(f: &F, mut a: f64, mut b: f64) -> f64 {
    let r = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    for _ in 0..200 {
        if f(c) < f(d) {
            b = d;
        } else {
            a = c;
        }
        c = b - r * (b - a);
        d = a + r * (b - a);
        if (b - a).abs() < 1e-15 {
            break;
        }
    }
    0.5 * (a + b)
}

/// Constants at p̂ for the Poisson law Po(λ).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LocalConstants {
    pub mu_hat: f64,
    pub p_hat: f64,
    /// l'(p̂).
    pub alpha: f64,
    /// l''(p̂).
    pub beta: f64,
    /// (μ̂ − k + 2)π_{k−2}(μ̂).
    pub beta_hat: f64,
    /// Infinite (reported as `None`) at the threshold.
    pub a_v: Option<f64>,
    pub a_e: Option<f64>,
}

pub fn local_constants(k: usize, lambda: f64) -> Result<LocalConstants> {
    check_k(k)?;
    let (ck, _) = compute_ck(k)?;
    let mu = mu_k(k, lambda)?;
    let ki = k as i64;
    let psi = tail(k - 1, mu);
    let pk2 = pmf_i(ki - 2, mu);
    let pk3 = pmf_i(ki - 3, mu);
    let denom = psi - mu * pk2;
    let alpha = lambda * denom;
    let beta = 2.0 * lambda - 2.0 * lambda * lambda * pk2 - lambda * lambda * mu * (pk3 - pk2);
    let beta_hat = (mu - ki as f64 + 2.0) * pk2;
    let critical = (lambda - ck).abs() <= 1e-9;
    let (a_v, a_e) = if denom > 0.0 && !critical {
        (Some(pmf_i(ki - 1, mu) / denom), Some((psi + mu * pk2) / denom))
    } else if critical {
        (None, None)
    } else {
        return Err(Error::Criticality(format!(
            "psi_(k-1)(mu) - mu*pi_(k-2)(mu) = {denom} <= 0 at lambda = {lambda}"
        )));
    };
    Ok(LocalConstants { mu_hat: mu, p_hat: mu / lambda, alpha, beta, beta_hat, a_v, a_e })
}

/// Summary of the threshold picture at (k, λ).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdProfile {
    pub k: usize,
    pub c_k: f64,
    pub mu_hat: f64,
    pub p_hat: f64,
    pub alpha: f64,
    pub beta: f64,
    pub beta_hat: f64,
    pub t_hat: f64,
}

pub fn threshold_profile(k: usize, lambda: f64) -> Result<ThresholdProfile> {
    let (c_k, _) = compute_ck(k)?;
    let lc = local_constants(k, lambda)?;
    Ok(ThresholdProfile {
        k,
        c_k,
        mu_hat: lc.mu_hat,
        p_hat: lc.p_hat,
        alpha: lc.alpha,
        beta: lc.beta,
        beta_hat: lc.beta_hat,
        t_hat: -lc.p_hat.ln(),
    })
}

/// Limit of v(Core₂)/n: (1 − T)(1 − T/λ) with T < 1 solving Te^{−T} = λe^{−λ}.
pub fn two_core_fraction(lambda: f64) -> Result<f64> {
    if !(lambda > 1.0 && lambda.is_finite()) {
        return domain(format!("two-core fraction needs lambda > 1, got {lambda}"));
    }
    let target = lambda * (-lambda).exp();
    let t = bisect(|t| t * (-t).exp() - target, 0.0, 1.0);
    Ok((1.0 - t) * (1.0 - t / lambda))
}
