//! Poisson point probabilities π_j(μ), tails ψ_j(μ) = P(Po(μ) ≥ j), and the
//! Poisson forms of the thinning functions b, h, l.

use crate::error::{domain, Result};

/// A Poisson law with the given mean.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PoissonModel {
    pub lambda: f64,
}

impl PoissonModel {
    pub fn new(lambda: f64) -> Result<Self> {
        if !(lambda.is_finite() && lambda >= 0.0) {
            return domain(format!("Poisson mean must be finite and >= 0, got {lambda}"));
        }
        Ok(Self { lambda })
    }

    pub fn pmf(&self, j: usize) -> f64 {
        pmf(j, self.lambda)
    }

    pub fn tail(&self, j: usize) -> f64 {
        tail(j, self.lambda)
    }
}

fn check_mu(mu: f64) -> Result<()> {
    if !(mu.is_finite() && mu >= 0.0) {
        return domain(format!("Poisson mean must be finite and >= 0, got {mu}"));
    }
    Ok(())
}

/// π_j(μ), checked.
pub fn pois_pmf(j: i64, mu: f64) -> Result<f64> {
    if j < 0 {
        return domain(format!("negative index {j}"));
    }
    check_mu(mu)?;
    Ok(pmf(j as usize, mu))
}

/// ψ_j(μ), checked.
pub fn pois_tail(j: i64, mu: f64) -> Result<f64> {
    if j < 0 {
        return domain(format!("negative index {j}"));
    }
    check_mu(mu)?;
    Ok(tail(j as usize, mu))
}

/// π_j(μ). Direct product for small arguments, log-gamma otherwise.
pub fn pmf(j: usize, mu: f64) -> f64 {
    if mu == 0.0 {
        return if j == 0 { 1.0 } else { 0.0 };
    }
    if j <= 30 && mu <= 30.0 {
        let mut v = (-mu).exp();
        for i in 1..=j {
            v *= mu / i as f64;
        }
        v
    } else if j == 0 {
        (-mu).exp()
    } else {
        // Saddle-point form: π_j(μ) = exp(−stirlerr(j) − bd0(j, μ)) / √(2πj).
        let x = j as f64;
        (-stirlerr(j) - bd0(x, mu)).exp() / (2.0 * std::f64::consts::PI * x).sqrt()
    }
}

/// ln j! − ln(√(2πj)(j/e)^j).
fn stirlerr(j: usize) -> f64 {
    let x = j as f64;
    if j <= 15 {
        let mut f = 1.0f64;
        for i in 2..=j {
            f *= i as f64;
        }
        f.ln() - (x + 0.5) * x.ln() + x - 0.5 * (2.0 * std::f64::consts::PI).ln()
    } else {
        const S0: f64 = 1.0 / 12.0;
        const S1: f64 = 1.0 / 360.0;
        const S2: f64 = 1.0 / 1260.0;
        const S3: f64 = 1.0 / 1680.0;
        const S4: f64 = 1.0 / 1188.0;
        let nn = x * x;
        (S0 - (S1 - (S2 - (S3 - S4 / nn) / nn) / nn) / nn) / x
    }
}

/// x ln(x/m) + m − x without cancellation when x ≈ m.
fn bd0(x: f64, m: f64) -> f64 {
    if (x - m).abs() < 0.1 * (x + m) {
        let v = (x - m) / (x + m);
        let mut s = (x - m) * v;
        let mut ej = 2.0 * x * v;
        let v2 = v * v;
        for i in 1..1000 {
            ej *= v2;
            let s1 = s + ej / (2 * i + 1) as f64;
            if s1 == s {
                return s1;
            }
            s = s1;
        }
        s
    } else {
        x * (x / m).ln() + m - x
    }
}

/// π_j(μ) with π_j ≡ 0 for negative j; convenient in formulas using π_{k−2}, π_{k−3}.
pub fn pmf_i(j: i64, mu: f64) -> f64 {
    if j < 0 {
        0.0
    } else {
        pmf(j as usize, mu)
    }
}

/// ψ_j(μ) = Σ_{i≥j} π_i(μ).
pub fn tail(j: usize, mu: f64) -> f64 {
    if j == 0 {
        return 1.0;
    }
    if mu == 0.0 {
        return 0.0;
    }
    if (j as f64) > mu {
        // Upward sum from the mode side; terms decrease monotonically.
        let mut term = pmf(j, mu);
        let mut sum = term;
        let mut i = j;
        loop {
            i += 1;
            term *= mu / i as f64;
            sum += term;
            if term < 1e-17 * sum || term == 0.0 {
                break;
            }
        }
        sum.min(1.0)
    } else {
        // Complement of the head, Kahan-compensated.
        let mut sum = 0.0f64;
        let mut c = 0.0f64;
        let mut term = pmf(0, mu);
        let mut first = true;
        for i in 0..j {
            if !first {
                term *= mu / i as f64;
            }
            first = false;
            let y = term - c;
            let t = sum + y;
            c = (t - sum) - y;
            sum = t;
        }
        // For large μ the starting term underflows; fall back to log-space terms.
        if pmf(0, mu) == 0.0 {
            sum = 0.0;
            c = 0.0;
            for i in 0..j {
                let y = pmf(i, mu) - c;
                let t = sum + y;
                c = (t - sum) - y;
                sum = t;
            }
        }
        (1.0 - sum).clamp(0.0, 1.0)
    }
}

/// ψ_j(μ) with ψ_j ≡ 1 for j ≤ 0.
pub fn tail_i(j: i64, mu: f64) -> f64 {
    if j <= 0 {
        1.0
    } else {
        tail(j as usize, mu)
    }
}

/// (b, h, l) of a Po(λ) degree law thinned to probability p.
pub fn pois_bhl(k: usize, lambda: f64, p: f64) -> Result<(f64, f64, f64)> {
    if k < 2 {
        return domain(format!("k must be >= 2, got {k}"));
    }
    if !(lambda > 0.0 && lambda.is_finite()) {
        return domain(format!("lambda must be positive, got {lambda}"));
    }
    if !(0.0..=1.0).contains(&p) {
        return domain(format!("p must lie in [0,1], got {p}"));
    }
    Ok(bhl(k, lambda, p))
}

pub(crate) fn bhl(k: usize, lambda: f64, p: f64) -> (f64, f64, f64) {
    let mu = lambda * p;
    let b = tail(k, mu);
    let h = mu * tail(k - 1, mu);
    let l = lambda * p * p - h;
    (b, h, l)
}

/// q'_j(p) = λ π_{j−1}(λp) for a Po(λ) law.
pub fn pois_q_deriv(j: usize, lambda: f64, p: f64) -> Result<f64> {
    if j < 1 {
        return domain("j must be >= 1");
    }
    if !(lambda >= 0.0 && lambda.is_finite()) || !(0.0..=1.0).contains(&p) {
        return domain(format!("bad arguments lambda={lambda}, p={p}"));
    }
    Ok(q_deriv(j, lambda, p))
}

pub(crate) fn q_deriv(j: usize, lambda: f64, p: f64) -> f64 {
    lambda * pmf(j - 1, lambda * p)
}
