//! Limit covariances: the process kernel σ_{νκ}(x) of the balls-and-bins
//! process, the degree-fluctuation kernel σ*_{νκ}(p) for G(n,p) and G(n,m),
//! and the assembled variances of the core size.

use crate::degree::{self, binom_coef, DegreeDistribution};
use crate::error::{domain, Result};
use crate::poisson::{self, pmf, tail};
use crate::quadrature::{integrate, QuadOptions};
use crate::threshold::{compute_ck, local_constants, mu_k};
use serde::{Deserialize, Serialize};
use std::collections::HashMap;

/// Index of B, H, L in the 3×3 matrices.
pub const B: usize = 0;
pub const H: usize = 1;
pub const L: usize = 2;

pub type Mat3 = [[f64; 3]; 3];

/// The random graph model whose degree fluctuations enter σ*.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Model {
    Gnp,
    Gnm,
}

impl std::fmt::Display for Model {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Model::Gnp => "gnp",
            Model::Gnm => "gnm",
        })
    }
}

impl std::str::FromStr for Model {
    type Err = crate::Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "gnp" => Ok(Model::Gnp),
            "gnm" => Ok(Model::Gnm),
            _ => Err(crate::Error::Config(format!("unknown model '{s}' (expected gnp or gnm)"))),
        }
    }
}

/// Numerical knobs of the kernel evaluation.
#[derive(Debug, Clone, Copy)]
pub struct CovOptions {
    /// Relative tolerance of each ∫_x^1 integral.
    pub quad_rel_tol: f64,
    /// A j-series stops after three consecutive terms below this fraction of the sum.
    pub series_rel: f64,
    /// Sums over r, s > k stop once a full row adds less than this fraction.
    pub sum_rel: f64,
    /// Hard cap on series indices.
    pub max_index: usize,
}

impl Default for CovOptions {
    fn default() -> Self {
        Self { quad_rel_tol: 1e-12, series_rel: 1e-14, sum_rel: 1e-13, max_index: 400 }
    }
}

/// σ_{νκ}(x) for ν, κ ∈ {B, H, L}.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProcessCovariances {
    pub x: f64,
    pub entries: Mat3,
}

/// σ*_{νκ}(p) for ν, κ ∈ {B, H, L}.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StarCovariances {
    pub p: f64,
    pub model: Model,
    pub entries: Mat3,
}

fn sym(bb: f64, bh: f64, hh: f64, bl: f64, hl: f64, ll: f64) -> Mat3 {
    [[bb, bh, bl], [bh, hh, hl], [bl, hl, ll]]
}

fn check_x(x: f64) -> Result<()> {
    if !(x > 0.0 && x <= 1.0) {
        return domain(format!("x must lie in (0,1], got {x}"));
    }
    Ok(())
}

/// σ_WW(x) = 2λ(x² − x⁴).
pub fn sigma_ww(x: f64, lambda: f64) -> f64 {
    2.0 * lambda * (x * x - x.powi(4))
}

/// σ_rW(x); the Poisson closed form r·π_r(λx)(1 − x²) when `dist` is a Poisson law.
pub fn sigma_rw(r: usize, x: f64, dist: &DegreeDistribution) -> f64 {
    match dist.poisson_lambda() {
        Some(lam) => r as f64 * pmf(r, lam * x) * (1.0 - x * x),
        None => sigma_rw_series(r, x, dist),
    }
}

/// σ_rW(x) = r x^r (1 − x²) Σ_{l≥r} p_l C(l,r)(1 − x)^{l−r}, for any law.
pub fn sigma_rw_series(r: usize, x: f64, dist: &DegreeDistribution) -> f64 {
    let s: f64 = (r..=dist.max_degree())
        .map(|l| dist.prob(l) * binom_coef(l, r) * (1.0 - x).powi((l - r) as i32))
        .sum();
    r as f64 * x.powi(r as i32) * (1.0 - x * x) * s
}

/// Evaluator for σ_rs(x) that caches ∫_x^1 (p−x)^{2j−e} p^{−2j} q'_j(p) dp by (j, e = r+s).
pub struct KernelEvaluator<'a> {
    dist: &'a DegreeDistribution,
    x: f64,
    opts: CovOptions,
    cache: HashMap<(usize, usize), f64>,
}

impl<'a> KernelEvaluator<'a> {
    pub fn new(dist: &'a DegreeDistribution, x: f64, opts: CovOptions) -> Result<Self> {
        check_x(x)?;
        Ok(Self { dist, x, opts, cache: HashMap::new() })
    }

    fn q_deriv(&self, j: usize, p: f64) -> f64 {
        match self.dist.poisson_lambda() {
            Some(lam) => poisson::q_deriv(j, lam, p),
            None => degree::q_deriv(self.dist, j, p),
        }
    }

    fn integral(&mut self, j: usize, e: usize) -> f64 {
        if let Some(v) = self.cache.get(&(j, e)) {
            return *v;
        }
        let x = self.x;
        let pow = (2 * j - e) as i32;
        let twoj = (2 * j) as i32;
        let opts = QuadOptions { rel_tol: self.opts.quad_rel_tol, ..QuadOptions::default() };
        let v = integrate(|p| (p - x).powi(pow) * p.powi(-twoj) * self.q_deriv(j, p), x, 1.0, opts).value;
        self.cache.insert((j, e), v);
        v
    }

    /// σ_rs(x) for k ≤ r, s (symmetric in r, s).
    pub fn sigma_rs(&mut self, r: usize, s: usize) -> f64 {
        let (r, s) = if r <= s { (r, s) } else { (s, r) };
        if self.x == 1.0 || r == 0 {
            return 0.0;
        }
        let finite_top = if self.dist.poisson_lambda().is_some() { usize::MAX } else { self.dist.max_degree() };
        let mut sum = 0.0;
        let mut small = 0;
        let mut j = s;
        while j <= finite_top && j <= self.opts.max_index {
            let c = binom_coef(j - 1, r - 1) * binom_coef(j - 1, s - 1);
            let term = c * self.integral(j, r + s);
            sum += term;
            if term.abs() < self.opts.series_rel * sum.abs() || term == 0.0 {
                small += 1;
                if small >= 3 {
                    break;
                }
            } else {
                small = 0;
            }
            j += 1;
        }
        self.x.powi((r + s) as i32) * sum
    }
}

/// σ_rs(x) for r, s ≥ 1.
pub fn sigma_rs(r: usize, s: usize, x: f64, dist: &DegreeDistribution) -> Result<f64> {
    Ok(KernelEvaluator::new(dist, x, CovOptions::default())?.sigma_rs(r, s))
}

/// Upper index beyond which degree classes carry no mass worth summing.
fn top_index(dist: &DegreeDistribution, opts: &CovOptions) -> usize {
    match dist.poisson_lambda() {
        Some(lam) => {
            let mut r = dist.max_degree();
            while tail(r + 1, lam) > 1e-30 && r < opts.max_index {
                r += 1;
            }
            r
        }
        None => dist.max_degree(),
    }
}

/// Assembled σ_{νκ}(x). Meaningful on x ∈ [p̂, 1]: past t̂ = −ln p̂ the
/// process has stopped, and the formulas need not give a covariance there.
pub fn process_sigma(k: usize, x: f64, dist: &DegreeDistribution) -> Result<ProcessCovariances> {
    process_sigma_with(k, x, dist, CovOptions::default())
}

pub fn process_sigma_with(
    k: usize,
    x: f64,
    dist: &DegreeDistribution,
    opts: CovOptions,
) -> Result<ProcessCovariances> {
    if k < 1 {
        return domain("k must be >= 1");
    }
    check_x(x)?;
    if x == 1.0 {
        return Ok(ProcessCovariances { x, entries: [[0.0; 3]; 3] });
    }
    let lam = dist.mean();
    let kf = k as f64;
    let top = top_index(dist, &opts);
    let mut ev = KernelEvaluator::new(dist, x, opts)?;

    let skk = ev.sigma_rs(k, k);
    let mut s_kr = 0.0;
    for r in k + 1..=top {
        let v = ev.sigma_rs(k, r);
        s_kr += v;
        if v.abs() < opts.sum_rel * s_kr.abs() {
            break;
        }
    }
    // Triangular sweep over r ≤ s, doubling off-diagonal terms.
    let mut s_rs = 0.0;
    for r in k + 1..=top {
        let mut row = ev.sigma_rs(r, r);
        for s in r + 1..=top {
            let v = ev.sigma_rs(r, s);
            row += 2.0 * v;
            if v.abs() < opts.sum_rel * row.abs() {
                break;
            }
        }
        s_rs += row;
        if row.abs() < opts.sum_rel * s_rs.abs() {
            break;
        }
    }
    let s_kw = sigma_rw(k, x, dist);
    let mut s_rw = 0.0;
    for r in k + 1..=top {
        let v = sigma_rw(r, x, dist);
        s_rw += v;
        if v.abs() < opts.sum_rel * s_rw.abs() && r > lam as usize + 1 {
            break;
        }
    }
    let ww = sigma_ww(x, lam);

    let bb = skk;
    let bh = kf * skk + s_kr;
    let hh = kf * kf * skk + 2.0 * kf * s_kr + s_rs;
    let bl = s_kw - bh;
    let hl = kf * s_kw + s_rw - hh;
    let ll = ww - 2.0 * kf * s_kw - 2.0 * s_rw + hh;
    Ok(ProcessCovariances { x, entries: sym(bb, bh, hh, bl, hl, ll) })
}

/// φ_rs: limiting covariance of the normalized vertex counts of degrees r and s.
pub fn phi_rs(r: usize, s: usize, lambda: f64, model: Model) -> f64 {
    let sign = match model {
        Model::Gnp => 1.0,
        Model::Gnm => -1.0,
    };
    let (pr, ps) = (pmf(r, lambda), pmf(s, lambda));
    let cross = pr * ps * (sign * (r as f64 - lambda) * (s as f64 - lambda) / lambda - 1.0);
    if r == s {
        cross + pr
    } else {
        cross
    }
}

/// Degree cutoff for the star sums.
fn star_top(lambda: f64) -> usize {
    let mut r = 1;
    while tail(r + 1, lambda) > 1e-18 {
        r += 1;
    }
    r
}

pub fn star_sigma(k: usize, p: f64, lambda: f64, model: Model) -> Result<StarCovariances> {
    if !(0.0..=1.0).contains(&p) {
        return domain(format!("p must lie in [0,1], got {p}"));
    }
    if !(lambda > 0.0 && lambda.is_finite()) {
        return domain(format!("lambda must be positive, got {lambda}"));
    }
    let top = star_top(lambda);
    let phi: Vec<Vec<f64>> = (0..=top)
        .map(|l| (0..=top).map(|r| phi_rs(l, r, lambda, model)).collect())
        .collect();
    let beta: Vec<Vec<f64>> = (0..=top)
        .map(|l| (0..=top).map(|i| if i <= l { degree::beta(l, i, p) } else { 0.0 }).collect())
        .collect();

    // ψ_ij = Σ_{l≥i} Σ_{r≥j} β_li β_rj φ_lr, for i, j ≥ k.
    let idx: Vec<usize> = (k..=top).collect();
    let mut psi = vec![vec![0.0; idx.len()]; idx.len()];
    for (a, &i) in idx.iter().enumerate() {
        for (c, &j) in idx.iter().enumerate().skip(a) {
            let mut s = 0.0;
            for l in i..=top {
                let bli = beta[l][i];
                if bli == 0.0 {
                    continue;
                }
                for r in j..=top {
                    s += bli * beta[r][j] * phi[l][r];
                }
            }
            psi[a][c] = s;
            psi[c][a] = s;
        }
    }
    // ψ_iW = p² Σ_{l≥i} Σ_{r≥1} β_li r φ_lr; identically 0 for G(n,m).
    let psi_w: Vec<f64> = idx
        .iter()
        .map(|&i| match model {
            Model::Gnm => 0.0,
            Model::Gnp => {
                let mut s = 0.0;
                for l in i..=top {
                    for r in 1..=top {
                        s += beta[l][i] * r as f64 * phi[l][r];
                    }
                }
                p * p * s
            }
        })
        .collect();
    let ww = match model {
        Model::Gnp => 2.0 * p.powi(4) * lambda,
        Model::Gnm => 0.0,
    };

    let (mut bb, mut bh, mut hh) = (0.0, 0.0, 0.0);
    for (a, &i) in idx.iter().enumerate() {
        for (c, &j) in idx.iter().enumerate() {
            let v = psi[a][c];
            bb += v;
            bh += i as f64 * v;
            hh += (i * j) as f64 * v;
        }
    }
    let sw: f64 = psi_w.iter().sum();
    let isw: f64 = idx.iter().zip(&psi_w).map(|(&i, v)| i as f64 * v).sum();
    let bl = sw - bh;
    let hl = isw - hh;
    let ll = ww - 2.0 * isw + hh;
    Ok(StarCovariances { p, model, entries: sym(bb, bh, hh, bl, hl, ll) })
}

/// Limit quantities for the size of the k-core.
///
/// Above threshold the variance fields are set and `sigma_sq`/`sigma_k_sq`
/// are `None`; at the threshold it is the other way round.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VarianceReport {
    pub k: usize,
    pub lambda: f64,
    pub model: Model,
    pub mu_hat: f64,
    pub p_hat: f64,
    pub a_v: Option<f64>,
    pub a_e: Option<f64>,
    pub sigma_hat: Mat3,
    pub var_zv: Option<f64>,
    pub var_ze: Option<f64>,
    pub cov_zvze: Option<f64>,
    pub sigma_sq: Option<f64>,
    pub sigma_k_sq: Option<f64>,
}

fn add(a: &Mat3, b: &Mat3) -> Mat3 {
    let mut out = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            out[i][j] = a[i][j] + b[i][j];
        }
    }
    out
}

/// σ̂ = σ(p̂; Po(λ)) + σ*(p̂) and the resulting (Var Z_v, Var Z_e, Cov).
pub fn assemble_supercritical(k: usize, lambda: f64, model: Model) -> Result<VarianceReport> {
    let (ck, _) = compute_ck(k)?;
    if !(lambda > ck) || (lambda - ck).abs() <= 1e-9 {
        return domain(format!("lambda = {lambda} is not above c_{k} = {ck}"));
    }
    let lc = local_constants(k, lambda)?;
    let (a_v, a_e) = (lc.a_v.unwrap(), lc.a_e.unwrap());
    let dist = DegreeDistribution::poisson(lambda)?;
    let proc_ = process_sigma(k, lc.p_hat, &dist)?;
    let star = star_sigma(k, lc.p_hat, lambda, model)?;
    let s = add(&proc_.entries, &star.entries);
    let var_zv = s[B][B] - 2.0 * a_v * s[B][L] + a_v * a_v * s[L][L];
    let var_ze = 0.25 * (s[H][H] - 2.0 * a_e * s[H][L] + a_e * a_e * s[L][L]);
    let cov = 0.5 * (s[B][H] - a_e * s[B][L] - a_v * s[H][L] + a_v * a_e * s[L][L]);
    Ok(VarianceReport {
        k,
        lambda,
        model,
        mu_hat: lc.mu_hat,
        p_hat: lc.p_hat,
        a_v: Some(a_v),
        a_e: Some(a_e),
        sigma_hat: s,
        var_zv: Some(var_zv),
        var_ze: Some(var_ze),
        cov_zvze: Some(cov),
        sigma_sq: None,
        sigma_k_sq: None,
    })
}

/// σ² = σ_LL(p̂) + σ*_LL(p̂) at λ = c_k, and σ_k² = σ²/(4p̂⁴).
pub fn assemble_critical(k: usize, model: Model) -> Result<VarianceReport> {
    if k < 3 {
        return domain(format!("the critical window needs k >= 3, got {k}"));
    }
    let (ck, _) = compute_ck(k)?;
    let mu = mu_k(k, ck)?;
    let p_hat = tail(k - 1, mu);
    let dist = DegreeDistribution::poisson(ck)?;
    let proc_ = process_sigma(k, p_hat, &dist)?;
    let star = star_sigma(k, p_hat, ck, model)?;
    let s = add(&proc_.entries, &star.entries);
    let sigma_sq = s[L][L];
    Ok(VarianceReport {
        k,
        lambda: ck,
        model,
        mu_hat: mu,
        p_hat,
        a_v: None,
        a_e: None,
        sigma_hat: s,
        var_zv: None,
        var_ze: None,
        cov_zvze: None,
        sigma_sq: Some(sigma_sq),
        sigma_k_sq: Some(sigma_sq / (4.0 * p_hat.powi(4))),
    })
}

/// Eigenvalues of a symmetric 3×3 matrix, ascending (trigonometric method).
pub fn sym3_eigenvalues(a: &Mat3) -> [f64; 3] {
    let p1 = a[0][1].powi(2) + a[0][2].powi(2) + a[1][2].powi(2);
    let q = (a[0][0] + a[1][1] + a[2][2]) / 3.0;
    if p1 == 0.0 {
        let mut e = [a[0][0], a[1][1], a[2][2]];
        e.sort_by(f64::total_cmp);
        return e;
    }
    let p2 = (a[0][0] - q).powi(2) + (a[1][1] - q).powi(2) + (a[2][2] - q).powi(2) + 2.0 * p1;
    let p = (p2 / 6.0).sqrt();
    let mut bm = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            bm[i][j] = (a[i][j] - if i == j { q } else { 0.0 }) / p;
        }
    }
    let det = bm[0][0] * (bm[1][1] * bm[2][2] - bm[1][2] * bm[2][1])
        - bm[0][1] * (bm[1][0] * bm[2][2] - bm[1][2] * bm[2][0])
        + bm[0][2] * (bm[1][0] * bm[2][1] - bm[1][1] * bm[2][0]);
    let r = (det / 2.0).clamp(-1.0, 1.0);
    let phi = r.acos() / 3.0;
    let e1 = q + 2.0 * p * phi.cos();
    let e3 = q + 2.0 * p * (phi + 2.0 * std::f64::consts::PI / 3.0).cos();
    let e2 = 3.0 * q - e1 - e3;
    let mut e = [e1, e2, e3];
    e.sort_by(f64::total_cmp);
    e
}

pub fn is_symmetric(a: &Mat3) -> bool {
    a[0][1] == a[1][0] && a[0][2] == a[2][0] && a[1][2] == a[2][1]
}
