//! Degree laws, degree sequences, the binomial thinning kernel β_lr and the
//! thinned-degree functions q_j, b, h, l.

use crate::error::{domain, Error, Result};
use crate::poisson;
use rand::Rng;
use statrs::function::gamma::ln_gamma;

/// A probability law (p_r) on degrees 0..=max_degree.
///
/// Laws built by [`DegreeDistribution::poisson`] remember their mean so that
/// Poisson closed forms can be used downstream.
#[derive(Debug, Clone, PartialEq)]
pub struct DegreeDistribution {
    probs: Vec<f64>,
    mean: f64,
    poisson: Option<f64>,
}

impl DegreeDistribution {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return domain("empty degree law");
        }
        if probs.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
            return domain("degree probabilities must be finite and nonnegative");
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return domain(format!("degree probabilities sum to {total}, not 1"));
        }
        if probs[0] >= 1.0 {
            return domain("p_0 = 1 is excluded");
        }
        let mut probs = probs;
        while probs.len() > 1 && *probs.last().unwrap() == 0.0 {
            probs.pop();
        }
        let mean = probs.iter().enumerate().map(|(r, p)| r as f64 * p).sum();
        Ok(Self { probs, mean, poisson: None })
    }

    /// Po(λ) truncated at the smallest R with P(Po(λ) > R) < 1e-14, renormalized.
    pub fn poisson(lambda: f64) -> Result<Self> {
        if !(lambda > 0.0 && lambda.is_finite()) {
            return domain(format!("Poisson mean must be positive, got {lambda}"));
        }
        let mut r = 0usize;
        while poisson::tail(r + 1, lambda) >= 1e-14 {
            r += 1;
        }
        let mut probs: Vec<f64> = (0..=r).map(|j| poisson::pmf(j, lambda)).collect();
        let total: f64 = probs.iter().sum();
        probs.iter_mut().for_each(|p| *p /= total);
        let mut d = Self::new(probs)?;
        d.poisson = Some(lambda);
        Ok(d)
    }

    /// Point mass at degree `d`.
    pub fn point_mass(d: usize) -> Result<Self> {
        let mut probs = vec![0.0; d + 1];
        probs[d] = 1.0;
        Self::new(probs)
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn prob(&self, r: usize) -> f64 {
        self.probs.get(r).copied().unwrap_or(0.0)
    }

    pub fn max_degree(&self) -> usize {
        self.probs.len() - 1
    }

    /// λ = E D.
    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// The Poisson mean if this law is a Poisson truncation.
    pub fn poisson_lambda(&self) -> Option<f64> {
        self.poisson
    }

    /// P(D ≥ j).
    pub fn tail(&self, j: usize) -> f64 {
        self.probs.iter().skip(j).sum()
    }

    /// Draws one degree by inversion.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        for (r, p) in self.probs.iter().enumerate() {
            acc += p;
            if u < acc {
                return r;
            }
        }
        self.max_degree()
    }
}

/// Vertex degrees d_0..d_{n−1} with their counts u_r.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DegreeSequence {
    degrees: Vec<usize>,
    counts: Vec<usize>,
    two_m: usize,
}

impl DegreeSequence {
    pub fn from_degrees(degrees: Vec<usize>) -> Result<Self> {
        let two_m: usize = degrees.iter().sum();
        if !two_m.is_multiple_of(2) {
            return domain(format!("degree sum {two_m} is odd"));
        }
        let maxd = degrees.iter().copied().max().unwrap_or(0);
        let mut counts = vec![0usize; maxd + 1];
        for &d in &degrees {
            counts[d] += 1;
        }
        Ok(Self { degrees, counts, two_m })
    }

    /// Vertices are laid out in increasing degree order.
    pub fn from_counts(counts: &[usize]) -> Result<Self> {
        let degrees = counts
            .iter()
            .enumerate()
            .flat_map(|(r, &u)| std::iter::repeat_n(r, u))
            .collect();
        Self::from_degrees(degrees)
    }

    /// n i.i.d. draws from `dist`; while the sum is odd, one uniformly chosen
    /// vertex is redrawn.
    pub fn sample_iid<R: Rng + ?Sized>(dist: &DegreeDistribution, n: usize, rng: &mut R) -> Result<Self> {
        if n == 0 {
            return domain("n must be positive");
        }
        let mut degrees: Vec<usize> = (0..n).map(|_| dist.sample(rng)).collect();
        let mut sum: usize = degrees.iter().sum();
        let mut guard = 0;
        while sum % 2 == 1 {
            let i = rng.random_range(0..n);
            sum -= degrees[i];
            degrees[i] = dist.sample(rng);
            sum += degrees[i];
            guard += 1;
            if guard > 1_000_000 {
                return Err(Error::Domain("cannot reach an even degree sum".into()));
            }
        }
        Self::from_degrees(degrees)
    }

    /// Deterministic sequence with u_r = round(n p_r) for r ≥ 1 and u_0 taking
    /// up the slack. An odd sum is repaired by moving one vertex from degree 1
    /// to degree 2 (or, failing that, adding one to the smallest positive degree class).
    pub fn rounded(dist: &DegreeDistribution, n: usize) -> Result<Self> {
        let mut counts: Vec<usize> = (0..=dist.max_degree())
            .map(|r| (n as f64 * dist.prob(r)).round() as usize)
            .collect();
        let pos: usize = counts[1..].iter().sum();
        if pos > n {
            // Rounding overshoot; trim the most populous class.
            let r = (1..counts.len()).max_by_key(|&r| counts[r]).unwrap();
            counts[r] -= pos - n;
        }
        counts[0] = n - counts[1..].iter().sum::<usize>();
        let sum: usize = counts.iter().enumerate().map(|(r, u)| r * u).sum();
        if sum % 2 == 1 {
            if counts.len() > 2 && counts[1] > 0 {
                counts[1] -= 1;
                counts[2] += 1;
            } else if counts[0] > 0 {
                counts[0] -= 1;
                counts[1] += 1;
            } else {
                return domain("cannot repair parity");
            }
        }
        Self::from_counts(&counts)
    }

    pub fn degrees(&self) -> &[usize] {
        &self.degrees
    }

    /// u_r for r = 0..=max degree.
    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    pub fn n(&self) -> usize {
        self.degrees.len()
    }

    pub fn two_m(&self) -> usize {
        self.two_m
    }

    pub fn m(&self) -> usize {
        self.two_m / 2
    }
}

/// β_lr(p) = P(Bin(l, p) = r).
pub fn binom_pmf(l: usize, r: usize, p: f64) -> Result<f64> {
    if r > l {
        return domain(format!("r = {r} exceeds l = {l}"));
    }
    if !(0.0..=1.0).contains(&p) {
        return domain(format!("p must lie in [0,1], got {p}"));
    }
    Ok(beta(l, r, p))
}

pub(crate) fn beta(l: usize, r: usize, p: f64) -> f64 {
    if r > l {
        return 0.0;
    }
    if p == 0.0 {
        return if r == 0 { 1.0 } else { 0.0 };
    }
    if p == 1.0 {
        return if r == l { 1.0 } else { 0.0 };
    }
    if l <= 60 {
        binom_coef(l, r) * p.powi(r as i32) * (1.0 - p).powi((l - r) as i32)
    } else {
        let lc = ln_gamma(l as f64 + 1.0) - ln_gamma(r as f64 + 1.0) - ln_gamma((l - r) as f64 + 1.0);
        (lc + r as f64 * p.ln() + (l - r) as f64 * (1.0 - p).ln()).exp()
    }
}

/// C(n, r) as a float.
pub fn binom_coef(n: usize, r: usize) -> f64 {
    if r > n {
        return 0.0;
    }
    let r = r.min(n - r);
    let mut c = 1.0f64;
    for i in 0..r {
        c = c * (n - i) as f64 / (i + 1) as f64;
    }
    c.round_if_small()
}

trait RoundIfSmall {
    fn round_if_small(self) -> Self;
}

impl RoundIfSmall for f64 {
    // Exact integers up to 2^53 come out of the product with tiny drift.
    fn round_if_small(self) -> f64 {
        if self < 9.0e15 {
            self.round()
        } else {
            self
        }
    }
}

/// Row β_{l,0..=l}(p).
pub(crate) fn beta_row(l: usize, p: f64) -> Vec<f64> {
    (0..=l).map(|r| beta(l, r, p)).collect()
}

/// q_j(p) = P(X_p ≥ j).
pub fn q_j(dist: &DegreeDistribution, j: usize, p: f64) -> f64 {
    let mut s = 0.0;
    for (l, &pl) in dist.probs().iter().enumerate() {
        if pl == 0.0 || l < j {
            continue;
        }
        let row = beta_row(l, p);
        s += pl * row[j..].iter().sum::<f64>();
    }
    s
}

/// q'_j(p) = Σ_{l≥j} p_l · l · β_{l−1,j−1}(p).
pub fn q_j_deriv(dist: &DegreeDistribution, j: usize, p: f64) -> Result<f64> {
    if j < 1 {
        return domain("j must be >= 1");
    }
    Ok(q_deriv(dist, j, p))
}

pub(crate) fn q_deriv(dist: &DegreeDistribution, j: usize, p: f64) -> f64 {
    dist.probs()
        .iter()
        .enumerate()
        .skip(j)
        .map(|(l, &pl)| pl * l as f64 * beta(l - 1, j - 1, p))
        .sum()
}

/// q''_j(p) = Σ_l p_l l(l−1)(β_{l−2,j−2} − β_{l−2,j−1}).
pub(crate) fn q_deriv2(dist: &DegreeDistribution, j: usize, p: f64) -> f64 {
    dist.probs()
        .iter()
        .enumerate()
        .skip(2.max(j))
        .map(|(l, &pl)| {
            let a = if j >= 2 { beta(l - 2, j - 2, p) } else { 0.0 };
            let b = if j >= 1 { beta(l - 2, j - 1, p) } else { 0.0 };
            pl * (l * (l - 1)) as f64 * (a - b)
        })
        .sum()
}

/// (b, h, l) for the law thinned to probability p.
pub fn bhl(dist: &DegreeDistribution, k: usize, p: f64) -> (f64, f64, f64) {
    let mut b = 0.0;
    let mut h = 0.0;
    for (l, &pl) in dist.probs().iter().enumerate() {
        if pl == 0.0 || l < k {
            continue;
        }
        for r in k..=l {
            let w = pl * beta(l, r, p);
            b += w;
            h += r as f64 * w;
        }
    }
    (b, h, dist.mean() * p * p - h)
}

/// Derivatives (b', h', l') at p, using h = k q_k + Σ_{j>k} q_j.
pub fn bhl_deriv(dist: &DegreeDistribution, k: usize, p: f64) -> (f64, f64, f64) {
    let b1 = q_deriv(dist, k, p);
    let mut h1 = k as f64 * b1;
    for j in k + 1..=dist.max_degree() {
        h1 += q_deriv(dist, j, p);
    }
    (b1, h1, 2.0 * dist.mean() * p - h1)
}

/// l''(p).
pub fn l_second(dist: &DegreeDistribution, k: usize, p: f64) -> f64 {
    let mut h2 = k as f64 * q_deriv2(dist, k, p);
    for j in k + 1..=dist.max_degree() {
        h2 += q_deriv2(dist, j, p);
    }
    2.0 * dist.mean() - h2
}

/// The law D_n of a uniformly chosen vertex degree.
pub fn empirical_dist(seq: &DegreeSequence) -> Result<DegreeDistribution> {
    let n = seq.n();
    if n == 0 {
        return domain("empty degree sequence");
    }
    let probs: Vec<f64> = seq.counts().iter().map(|&u| u as f64 / n as f64).collect();
    // Renormalize away the rounding in the division.
    let total: f64 = probs.iter().sum();
    DegreeDistribution::new(probs.into_iter().map(|p| p / total).collect())
}

/// (b̌, ȟ, ľ)(t) = (b, h, l)(e^{−t}).
pub fn log_time_curves(dist: &DegreeDistribution, k: usize, t: f64) -> Result<(f64, f64, f64)> {
    if !(t >= 0.0) {
        return domain(format!("t must be >= 0, got {t}"));
    }
    Ok(bhl(dist, k, (-t).exp()))
}

/// n⁻¹ Σ_r u_r A^r.
pub fn condition_report(seq: &DegreeSequence, a: f64) -> Result<f64> {
    if !(a > 1.0) {
        return domain(format!("A must exceed 1, got {a}"));
    }
    if seq.n() == 0 {
        return domain("empty degree sequence");
    }
    let s: f64 = seq
        .counts()
        .iter()
        .enumerate()
        .map(|(r, &u)| u as f64 * a.powi(r as i32))
        .sum();
    Ok(s / seq.n() as f64)
}
