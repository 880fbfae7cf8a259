//! Monte Carlo experiments that test the limit theorems against the theory
//! engine, with pass/fail verdicts.
//!
//! Every replicate `i` draws from its own stream (`rng::replicate_rng`), and
//! results are collected in replicate order before any reduction, so a
//! report depends only on the `ExperimentSpec`, never on the worker count.

use crate::covariance::{assemble_critical, assemble_supercritical, process_sigma, Mat3, Model, B, H, L};
use crate::degree::{bhl, bhl_deriv, empirical_dist, DegreeDistribution, DegreeSequence};
use crate::error::{Error, Result};
use crate::graph::{config_model, gnm, gnp, simple_graph, EdgeProcess, Multigraph, DEFAULT_MAX_TRIES};
use crate::peel::{emergence_edge_count, peel_core, peel_process, CoreResult};
use crate::poisson::{pmf, tail};
use crate::rng::{replicate_rng, ChaCha8Rng};
use crate::stats::{gaussian_fit, normal_cdf, sample_stats, SampleStats};
use crate::threshold::{compute_ck, mu_k, p_bar_of, p_hat_of, two_core_fraction, RootKind};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt::Write as _;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Theorem {
    /// Law of large numbers for the core size.
    Lln,
    /// Joint Gaussian limit above the threshold.
    Clt,
    /// Nonemptiness probability inside the critical window.
    Window,
    /// Edge count at which the core appears in the random graph process.
    Emergence,
    /// Covariances of the balls-and-bins process.
    Trajectory,
    /// Gaussian limit for a fixed supercritical degree sequence.
    Degseq,
    /// Nonemptiness for a fixed critical degree sequence.
    DegseqCritical,
}

impl Theorem {
    pub const ALL: [Theorem; 7] = [
        Theorem::Lln,
        Theorem::Clt,
        Theorem::Window,
        Theorem::Emergence,
        Theorem::Trajectory,
        Theorem::Degseq,
        Theorem::DegseqCritical,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Theorem::Lln => "lln",
            Theorem::Clt => "clt",
            Theorem::Window => "window",
            Theorem::Emergence => "emergence",
            Theorem::Trajectory => "trajectory",
            Theorem::Degseq => "degseq",
            Theorem::DegseqCritical => "degseq-critical",
        }
    }

    pub fn default_model(self) -> GraphModel {
        match self {
            Theorem::Trajectory | Theorem::Degseq | Theorem::DegseqCritical => GraphModel::Config,
            _ => GraphModel::Gnm,
        }
    }
}

impl std::fmt::Display for Theorem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Theorem {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Theorem::ALL
            .into_iter()
            .find(|t| t.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Config(format!("unknown experiment {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GraphModel {
    Gnp,
    Gnm,
    /// Configuration multigraph.
    Config,
    /// Configuration model conditioned on being simple.
    ConfigSimple,
}

impl GraphModel {
    pub fn name(self) -> &'static str {
        match self {
            GraphModel::Gnp => "gnp",
            GraphModel::Gnm => "gnm",
            GraphModel::Config => "config",
            GraphModel::ConfigSimple => "config-simple",
        }
    }

    fn random_graph_model(self) -> Option<Model> {
        match self {
            GraphModel::Gnp => Some(Model::Gnp),
            GraphModel::Gnm => Some(Model::Gnm),
            _ => None,
        }
    }
}

impl std::fmt::Display for GraphModel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for GraphModel {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        [GraphModel::Gnp, GraphModel::Gnm, GraphModel::Config, GraphModel::ConfigSimple]
            .into_iter()
            .find(|m| m.name().eq_ignore_ascii_case(s) || m.name().replace('-', "_") == s.to_ascii_lowercase())
            .ok_or_else(|| Error::Config(format!("unknown graph model {s:?}")))
    }
}

/// A fully resolved experiment.
///
/// `tolerance` overrides the tolerance of the primary verdict, in that
/// verdict's own units: a multiple of the standard error for moment checks,
/// a relative error for the emergence variance, and an absolute error for
/// nonemptiness frequencies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub theorem: Theorem,
    pub k: usize,
    pub lambda: Option<f64>,
    pub gamma: Option<f64>,
    pub model: GraphModel,
    pub n: usize,
    pub replicates: usize,
    pub seed: u64,
    pub grid: Vec<f64>,
    /// Guard for window-type nonemptiness calls: nonempty iff e_core > δn.
    pub delta: f64,
    pub tolerance: Option<f64>,
    /// Bootstrap resamples for covariance standard errors.
    pub bootstrap: usize,
}

impl ExperimentSpec {
    pub fn new(theorem: Theorem, k: usize, n: usize, replicates: usize, seed: u64) -> Self {
        Self {
            theorem,
            k,
            lambda: None,
            gamma: None,
            model: theorem.default_model(),
            n,
            replicates,
            seed,
            grid: Vec::new(),
            delta: 1e-3,
            tolerance: None,
            bootstrap: 500,
        }
    }

    pub fn with_lambda(mut self, lambda: f64) -> Self {
        self.lambda = Some(lambda);
        self
    }

    pub fn with_gamma(mut self, gamma: f64) -> Self {
        self.gamma = Some(gamma);
        self
    }

    pub fn with_model(mut self, model: GraphModel) -> Self {
        self.model = model;
        self
    }

    pub fn with_grid(mut self, grid: Vec<f64>) -> Self {
        self.grid = grid;
        self
    }

    pub fn with_tolerance(mut self, tol: f64) -> Self {
        self.tolerance = Some(tol);
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.replicates < 2 {
            return bad(format!("replicates must be >= 2, got {}", self.replicates));
        }
        if self.n < 10 {
            return bad(format!("n must be >= 10, got {}", self.n));
        }
        if self.k < 2 {
            return bad(format!("k must be >= 2, got {}", self.k));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return bad(format!("delta must lie in (0,1), got {}", self.delta));
        }
        if self.bootstrap < 2 {
            return bad(format!("bootstrap must be >= 2, got {}", self.bootstrap));
        }
        if let Some(t) = self.tolerance {
            if !(t > 0.0 && t.is_finite()) {
                return bad(format!("tolerance must be positive, got {t}"));
            }
        }
        let t = self.theorem;
        if matches!(t, Theorem::Window | Theorem::Emergence | Theorem::DegseqCritical) && self.k < 3 {
            return bad(format!("{t} experiments require k >= 3, got k = {}", self.k));
        }
        let needs_lambda = matches!(t, Theorem::Lln | Theorem::Clt | Theorem::Trajectory | Theorem::Degseq);
        match self.lambda {
            None if needs_lambda => return bad(format!("{t} experiments need lambda")),
            Some(l) if !(l > 0.0 && l.is_finite()) => return bad(format!("lambda must be positive, got {l}")),
            _ => {}
        }
        if t == Theorem::Window && self.gamma.is_none() {
            return bad("window experiments need gamma".into());
        }
        if let Some(g) = self.gamma {
            if !g.is_finite() {
                return bad(format!("gamma must be finite, got {g}"));
            }
        }
        let model_ok = match t {
            Theorem::Lln => true,
            Theorem::Clt | Theorem::Window => self.model.random_graph_model().is_some(),
            Theorem::Emergence => self.model == GraphModel::Gnm,
            Theorem::Trajectory => self.model == GraphModel::Config,
            Theorem::Degseq | Theorem::DegseqCritical => {
                matches!(self.model, GraphModel::Config | GraphModel::ConfigSimple)
            }
        };
        if !model_ok {
            return bad(format!("model {} is not available for {t} experiments", self.model));
        }
        if t == Theorem::Trajectory {
            if self.grid.is_empty() {
                return bad("trajectory experiments need a nonempty grid".into());
            }
            if self.grid.iter().any(|x| !(*x > 0.0 && x.is_finite())) || self.grid.windows(2).any(|w| w[0] >= w[1]) {
                return bad("grid must be positive and strictly increasing".into());
            }
        }
        Ok(())
    }
}

/// One comparison between an observation and a theoretical value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub name: String,
    pub passed: bool,
    pub observed: f64,
    pub expected: f64,
    /// Absolute tolerance actually applied.
    pub tolerance: f64,
    /// How the tolerance was derived.
    pub rule: String,
}

impl Verdict {
    /// Passes iff |observed − expected| ≤ tolerance (NaN fails).
    pub fn within(name: &str, observed: f64, expected: f64, tolerance: f64, rule: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            passed: (observed - expected).abs() <= tolerance,
            observed,
            expected,
            tolerance,
            rule: rule.into(),
        }
    }

    /// Passes iff observed ≤ bound.
    pub fn at_most(name: &str, observed: f64, bound: f64, rule: impl Into<String>) -> Self {
        Self { name: name.into(), passed: observed <= bound, observed, expected: bound, tolerance: 0.0, rule: rule.into() }
    }

    /// Passes iff observed ≥ bound.
    pub fn at_least(name: &str, observed: f64, bound: f64, rule: impl Into<String>) -> Self {
        Self { name: name.into(), passed: observed >= bound, observed, expected: bound, tolerance: 0.0, rule: rule.into() }
    }
}

/// Empirical vs theoretical 3×3 covariance of (B, H, L) fluctuations at one time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRow {
    pub t: f64,
    /// Argument e^{−min(t, t̂)} of the theoretical covariance.
    pub x: f64,
    /// Fraction of replicates already stopped at t.
    pub stopped: f64,
    pub empirical: Mat3,
    pub theory: Mat3,
    pub se: Mat3,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub spec: ExperimentSpec,
    pub columns: Vec<String>,
    pub stats: Option<SampleStats>,
    pub theory: BTreeMap<String, f64>,
    pub diagnostics: BTreeMap<String, f64>,
    pub verdicts: Vec<Verdict>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub trajectory: Vec<TrajectoryRow>,
    /// Raw replicate observables, one row per replicate (CSV only).
    #[serde(skip)]
    pub raw: Vec<Vec<f64>>,
}

impl ExperimentReport {
    fn new(spec: &ExperimentSpec, columns: &[&str]) -> Self {
        Self {
            spec: spec.clone(),
            columns: columns.iter().map(|s| s.to_string()).collect(),
            stats: None,
            theory: BTreeMap::new(),
            diagnostics: BTreeMap::new(),
            verdicts: Vec::new(),
            trajectory: Vec::new(),
            raw: Vec::new(),
        }
    }

    pub fn passed(&self) -> bool {
        !self.verdicts.is_empty() && self.verdicts.iter().all(|v| v.passed)
    }

    pub fn verdict(&self, name: &str) -> Option<&Verdict> {
        self.verdicts.iter().find(|v| v.name == name)
    }

    /// Flat CSV of the raw replicate observables.
    pub fn raw_csv(&self) -> String {
        let mut out = String::from("replicate,");
        out.push_str(&self.columns.join(","));
        out.push('\n');
        for (i, row) in self.raw.iter().enumerate() {
            let _ = write!(out, "{i}");
            for x in row {
                let _ = write!(out, ",{x}");
            }
            out.push('\n');
        }
        out
    }

    fn theory(&mut self, key: &str, v: f64) {
        self.theory.insert(key.into(), v);
    }

    fn diag(&mut self, key: &str, v: f64) {
        self.diagnostics.insert(key.into(), v);
    }
}

/// Runs the experiment named by `spec.theorem`.
pub fn run(spec: &ExperimentSpec) -> Result<ExperimentReport> {
    spec.validate()?;
    match spec.theorem {
        Theorem::Lln => run_lln(spec),
        Theorem::Clt => run_clt_supercritical(spec),
        Theorem::Window => run_threshold_window(spec),
        Theorem::Emergence => run_emergence(spec),
        Theorem::Trajectory => run_trajectory(spec),
        Theorem::Degseq => run_degseq(spec),
        Theorem::DegseqCritical => run_degseq_critical(spec),
    }
}

fn for_each_replicate<T, F>(spec: &ExperimentSpec, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(u64, &mut ChaCha8Rng) -> Result<T> + Sync,
{
    (0..spec.replicates as u64)
        .into_par_iter()
        .map(|i| f(i, &mut replicate_rng(spec.seed, i)))
        .collect()
}

/// Edge count of G(n, m) at average degree λ.
fn edges_for(n: usize, lambda: f64) -> usize {
    (lambda * n as f64 / 2.0).round() as usize
}

/// Sampler for the random graph of `model` with asymptotic average degree λ.
struct GraphSampler {
    model: GraphModel,
    n: usize,
    lambda: f64,
    dist: Option<DegreeDistribution>,
}

impl GraphSampler {
    fn new(model: GraphModel, n: usize, lambda: f64) -> Result<Self> {
        let dist = match model {
            GraphModel::Config | GraphModel::ConfigSimple => Some(DegreeDistribution::poisson(lambda)?),
            _ => None,
        };
        if model == GraphModel::Gnp && lambda > n as f64 {
            return Err(Error::Config(format!("lambda = {lambda} gives p > 1 at n = {n}")));
        }
        Ok(Self { model, n, lambda, dist })
    }

    /// Average degree of the finite-n graph: 2m/n for G(n,m), np for G(n,p).
    fn lambda_n(&self) -> f64 {
        match self.model {
            GraphModel::Gnm => 2.0 * edges_for(self.n, self.lambda) as f64 / self.n as f64,
            _ => self.lambda,
        }
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> Result<Multigraph> {
        match self.model {
            GraphModel::Gnm => gnm(self.n, edges_for(self.n, self.lambda), rng),
            GraphModel::Gnp => gnp(self.n, self.lambda / self.n as f64, rng),
            GraphModel::Config | GraphModel::ConfigSimple => {
                let seq = DegreeSequence::sample_iid(self.dist.as_ref().unwrap(), self.n, rng)?;
                sample_on(&seq, self.model, rng)
            }
        }
    }
}

fn sample_on(seq: &DegreeSequence, model: GraphModel, rng: &mut ChaCha8Rng) -> Result<Multigraph> {
    if model == GraphModel::ConfigSimple {
        Ok(simple_graph(seq, rng, DEFAULT_MAX_TRIES)?.0)
    } else {
        config_model(seq, rng)
    }
}

fn column(data: &[Vec<f64>], j: usize) -> Vec<f64> {
    data.iter().map(|r| r[j]).collect()
}

fn mean_of(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

/// Checks mean n_kj/n against its limit for j = k..=k+5.
fn histogram_verdicts(report: &mut ExperimentReport, cores: &[CoreResult], n: usize, limit: impl Fn(usize) -> f64) {
    let k = report.spec.k;
    for j in k..=k + 5 {
        let frac = mean_of(&cores.iter().map(|c| *c.degree_hist.get(j).unwrap_or(&0) as f64 / n as f64).collect::<Vec<_>>());
        report.verdicts.push(Verdict::within(&format!("core_degree_{j}"), frac, limit(j), 0.01, "absolute 0.01"));
    }
}

fn binomial_tolerance(spec: &ExperimentSpec, target: f64) -> (f64, String) {
    match spec.tolerance {
        Some(t) => (t, format!("absolute {t}")),
        None => {
            let se = (target * (1.0 - target) / spec.replicates as f64).sqrt();
            (4.0 * se, "4 binomial standard errors".into())
        }
    }
}

fn se_multiplier(spec: &ExperimentSpec, default: f64) -> f64 {
    spec.tolerance.unwrap_or(default)
}

/// KS bound for marginal normality: the asymptotic 1% critical value, but no
/// tighter than 0.06.
fn ks_bound(replicates: usize) -> f64 {
    (1.628 / (replicates as f64).sqrt()).max(0.06)
}

pub fn run_lln(spec: &ExperimentSpec) -> Result<ExperimentReport> {
    spec.validate()?;
    let (k, n) = (spec.k, spec.n);
    let lambda = spec.lambda.unwrap();
    let (ck, _) = compute_ck(k)?;
    let sampler = GraphSampler::new(spec.model, n, lambda)?;
    let cores = for_each_replicate(spec, |_, rng| Ok(peel_core(&sampler.sample(rng)?, k)))?;
    let nf = n as f64;
    let mut report = ExperimentReport::new(spec, &["v/n", "e/n"]);
    report.raw = cores.iter().map(|c| vec![c.v_core as f64 / nf, c.e_core as f64 / nf]).collect();
    let stats = sample_stats(&["v/n", "e/n"], &report.raw, spec.bootstrap, spec.seed);
    report.theory("c_k", ck);
    let empty = cores.iter().filter(|c| c.is_empty()).count() as f64 / cores.len() as f64;
    report.diag("empty_fraction", empty);

    if lambda - ck <= 1e-9 && lambda >= ck {
        return Err(Error::Config(format!(
            "lambda = {lambda} sits at the threshold c_{k}; use a window experiment"
        )));
    }
    if lambda < ck {
        if k == 2 {
            // Below λ = 1 the 2-core is made of O(1) short cycles.
            let bound = spec.tolerance.unwrap_or(50.0);
            let max_e = cores.iter().map(|c| c.e_core).max().unwrap() as f64;
            report.verdicts.push(Verdict::at_most(
                "e_core_bounded",
                max_e,
                bound,
                format!("max e_core over replicates <= {bound}"),
            ));
        } else {
            let max_v = column(&report.raw, 0).into_iter().fold(0.0, f64::max);
            report.verdicts.push(Verdict::at_most(
                "core_empty_whp",
                max_v,
                spec.delta,
                format!("max v/n over replicates <= delta = {}", spec.delta),
            ));
        }
        report.stats = Some(stats);
        return Ok(report);
    }

    let mu = mu_k(k, lambda)?;
    let (tv, te) = (tail(k, mu), mu * mu / (2.0 * lambda));
    report.theory("mu_hat", mu);
    report.theory("v/n", tv);
    report.theory("e/n", te);
    let c = se_multiplier(spec, 4.0);
    let rule = format!("{c} standard errors");
    report.verdicts.push(Verdict::within("v/n", stats.mean[0], tv, c * stats.se_mean[0], rule.clone()));
    report.verdicts.push(Verdict::within("e/n", stats.mean[1], te, c * stats.se_mean[1], rule));
    histogram_verdicts(&mut report, &cores, n, |j| pmf(j, mu));
    if k == 2 {
        let target = two_core_fraction(lambda)?;
        report.theory("two_core_fraction", target);
        report.verdicts.push(Verdict::within("two_core_fraction", stats.mean[0], target, 0.01, "absolute 0.01"));
    }
    report.stats = Some(stats);
    Ok(report)
}

pub fn run_clt_supercritical(spec: &ExperimentSpec) -> Result<ExperimentReport> {
    spec.validate()?;
    let (k, n) = (spec.k, spec.n);
    let lambda = spec.lambda.unwrap();
    let model = spec.model.random_graph_model().unwrap();
    let (ck, _) = compute_ck(k)?;
    if lambda <= ck {
        return Err(Error::Config(format!("clt experiments need lambda > c_{k} = {ck}, got {lambda}")));
    }
    let theory = assemble_supercritical(k, lambda, model)?;
    let sampler = GraphSampler::new(spec.model, n, lambda)?;
    let lambda_n = sampler.lambda_n();
    let mu_n = mu_k(k, lambda_n)?;
    let (cv, ce) = (tail(k, mu_n) * n as f64, 0.5 * mu_n * tail(k - 1, mu_n) * n as f64);
    let rn = (n as f64).sqrt();
    let cores = for_each_replicate(spec, |_, rng| Ok(peel_core(&sampler.sample(rng)?, k)))?;

    let cols = ["z_v", "z_e"];
    let mut report = ExperimentReport::new(spec, &cols);
    report.raw = cores.iter().map(|c| vec![(c.v_core as f64 - cv) / rn, (c.e_core as f64 - ce) / rn]).collect();
    let stats = sample_stats(&cols, &report.raw, spec.bootstrap, spec.seed);
    let (var_v, var_e, cov) = (theory.var_zv.unwrap(), theory.var_ze.unwrap(), theory.cov_zvze.unwrap());
    report.theory("lambda_n", lambda_n);
    report.theory("mu_hat_n", mu_n);
    report.theory("var_zv", var_v);
    report.theory("var_ze", var_e);
    report.theory("cov_zvze", cov);

    let c = se_multiplier(spec, 3.0);
    let rule = format!("{c} bootstrap standard errors");
    report.verdicts.push(Verdict::within("var_zv", stats.cov[0][0], var_v, c * stats.se_cov[0][0], rule.clone()));
    report.verdicts.push(Verdict::within("var_ze", stats.cov[1][1], var_e, c * stats.se_cov[1][1], rule.clone()));
    report.verdicts.push(Verdict::within("cov_zvze", stats.cov[0][1], cov, c * stats.se_cov[0][1], rule));
    let ksb = ks_bound(spec.replicates);
    for (j, name) in ["ks_z_v", "ks_z_e"].iter().enumerate() {
        report.verdicts.push(Verdict::at_most(name, stats.ks[j].unwrap_or(f64::NAN), ksb, format!("KS <= {ksb:.4}")));
    }
    let corr = stats.cov[0][1] / (stats.cov[0][0] * stats.cov[1][1]).sqrt();
    report.diag("correlation", corr);
    report.diag("mean_z_v", stats.mean[0]);
    report.diag("mean_z_e", stats.mean[1]);
    report.verdicts.push(Verdict::at_most("correlation_not_degenerate", corr.abs(), 1.0 - 1e-9, "|corr| < 1"));
    report.stats = Some(stats);
    Ok(report)
}

pub fn run_threshold_window(spec: &ExperimentSpec) -> Result<ExperimentReport> {
    spec.validate()?;
    let (k, n) = (spec.k, spec.n);
    let gamma = spec.gamma.unwrap();
    let model = spec.model.random_graph_model().unwrap();
    let (ck, _) = compute_ck(k)?;
    let crit = assemble_critical(k, model)?;
    let sigma = crit.sigma_sq.unwrap().sqrt();
    let (p_hat, mu) = (crit.p_hat, crit.mu_hat);
    let target = normal_cdf(p_hat * p_hat * gamma / sigma);
    let nf = n as f64;
    let rn = nf.sqrt();
    // λ_n − c_k = γ n^{−1/2}; for G(n,m) this is m = round(c_k n/2 + γ n^{1/2}/2).
    let (lambda_n, graph_model) = match model {
        Model::Gnm => {
            let m = (ck * nf / 2.0 + gamma * rn / 2.0).round();
            (2.0 * m / nf, GraphModel::Gnm)
        }
        Model::Gnp => (ck + gamma / rn, GraphModel::Gnp),
    };
    let sampler = GraphSampler::new(graph_model, n, lambda_n)?;
    let cores = for_each_replicate(spec, |_, rng| Ok(peel_core(&sampler.sample(rng)?, k)))?;

    let scale = nf.powf(0.75);
    let (cv, ce) = (tail(k, mu) * nf, 0.5 * mu * tail(k - 1, mu) * nf);
    let guard = |c: &CoreResult| c.e_core as f64 > spec.delta * nf;
    let cols = ["nonempty", "literal_nonempty", "v_fluct", "e_fluct"];
    let mut report = ExperimentReport::new(spec, &cols);
    report.raw = cores
        .iter()
        .map(|c| {
            vec![
                guard(c) as u8 as f64,
                !c.is_empty() as u8 as f64,
                (c.v_core as f64 - cv) / scale,
                (c.e_core as f64 - ce) / scale,
            ]
        })
        .collect();
    report.theory("c_k", ck);
    report.theory("lambda_n", lambda_n);
    report.theory("p_hat", p_hat);
    report.theory("sigma", sigma);
    report.theory("probability", target);

    let freq = mean_of(&column(&report.raw, 0));
    let (tol, rule) = binomial_tolerance(spec, target);
    report.verdicts.push(Verdict::within("nonempty_frequency", freq, target, tol, rule));
    let agree = report.raw.iter().filter(|r| r[0] == r[1]).count() as f64 / cores.len() as f64;
    report.verdicts.push(Verdict::at_least("guard_agreement", agree, 0.99, "guard agrees with literal nonemptiness in >= 99%"));

    // Conditional fluctuations line up with (π_{k−1}(μ̂), p̂).
    let cond: Vec<Vec<f64>> = report.raw.iter().filter(|r| r[0] == 1.0).map(|r| vec![r[2], r[3]]).collect();
    report.diag("nonempty_count", cond.len() as f64);
    let direction = pmf(k - 1, mu) / p_hat;
    report.theory("direction_ratio", direction);
    if cond.len() >= 10 {
        let sxy: f64 = cond.iter().map(|r| r[0] * r[1]).sum();
        let syy: f64 = cond.iter().map(|r| r[1] * r[1]).sum();
        let slope = sxy / syy;
        report.verdicts.push(Verdict::within(
            "direction_ratio",
            slope,
            direction,
            0.2 * direction,
            "20% relative (corrections are O(n^{-1/4}))",
        ));
        let stats = sample_stats(&["v_fluct", "e_fluct"], &cond, spec.bootstrap, spec.seed);
        report.diag("conditional_correlation", stats.cov[0][1] / (stats.cov[0][0] * stats.cov[1][1]).sqrt());
        report.stats = Some(stats);
    }
    Ok(report)
}

pub fn run_emergence(spec: &ExperimentSpec) -> Result<ExperimentReport> {
    spec.validate()?;
    let (k, n) = (spec.k, spec.n);
    let (ck, _) = compute_ck(k)?;
    let crit = assemble_critical(k, Model::Gnm)?;
    let target = crit.sigma_k_sq.unwrap();
    let nf = n as f64;
    let counts = for_each_replicate(spec, |i, _| {
        let mut process = EdgeProcess::with_rng(n, spec.seed, replicate_rng(spec.seed, i))?;
        emergence_edge_count(&mut process, k)
    })?;
    let mut report = ExperimentReport::new(spec, &["M", "z"]);
    report.raw = counts.iter().map(|&m| vec![m as f64, (m as f64 - ck * nf / 2.0) / nf.sqrt()]).collect();
    let z = column(&report.raw, 1);
    let fit = gaussian_fit(&z);
    report.theory("c_k", ck);
    report.theory("sigma_k_sq", target);
    let rel = spec.tolerance.unwrap_or(0.15);
    report.verdicts.push(Verdict::within("variance", fit.var, target, rel * target, format!("{}% relative", rel * 100.0)));
    let se = (fit.var / z.len() as f64).sqrt();
    report.verdicts.push(Verdict::within("mean", fit.mean, 0.0, 4.0 * se, "4 standard errors"));
    let ksb = ks_bound(spec.replicates);
    report.verdicts.push(Verdict::at_most("ks", fit.ks.unwrap_or(f64::NAN), ksb, format!("KS <= {ksb:.4}")));
    report.stats = Some(sample_stats(&["z"], &z.iter().map(|x| vec![*x]).collect::<Vec<_>>(), spec.bootstrap, spec.seed));
    Ok(report)
}

/// Supercritical Poisson law and its p̂, rejecting anything else.
fn supercritical_hat(dist: &DegreeDistribution, k: usize, what: &str) -> Result<f64> {
    let ph = p_hat_of(dist, k)?;
    if ph.kind != RootKind::Supercritical {
        return Err(Error::Config(format!("{what} is not supercritical for k = {k} ({:?})", ph.kind)));
    }
    Ok(ph.p)
}

pub fn run_trajectory(spec: &ExperimentSpec) -> Result<ExperimentReport> {
    spec.validate()?;
    let (k, n) = (spec.k, spec.n);
    let lambda = spec.lambda.unwrap();
    let dist = DegreeDistribution::poisson(lambda)?;
    let p_hat = supercritical_hat(&dist, k, "the degree law")?;
    let t_hat = -p_hat.ln();
    let seq = DegreeSequence::rounded(&dist, n)?;
    let dist_n = empirical_dist(&seq)?;
    let grid = spec.grid.clone();
    let nf = n as f64;
    let rn = nf.sqrt();
    let runs = for_each_replicate(spec, |_, rng| Ok(peel_process(&seq, k, &grid, false, rng)?.0))?;

    // Stopped processes, centered at t ∧ τ.
    let mut cols = Vec::new();
    for t in &grid {
        for name in ["B", "H", "L"] {
            cols.push(format!("{name}@{t}"));
        }
    }
    let col_refs: Vec<&str> = cols.iter().map(String::as_str).collect();
    let mut report = ExperimentReport::new(spec, &col_refs);
    report.raw = runs
        .iter()
        .map(|tr| {
            let mut row = Vec::with_capacity(3 * grid.len());
            for (i, &t) in grid.iter().enumerate() {
                let (b, h, l) = bhl(&dist_n, k, (-t.min(tr.tau)).exp());
                row.push((tr.b[i] as f64 - nf * b) / rn);
                row.push((tr.h[i] as f64 - nf * h) / rn);
                row.push((tr.l[i] as f64 - nf * l) / rn);
            }
            row
        })
        .collect();
    report.theory("p_hat", p_hat);
    report.theory("t_hat", t_hat);
    report.diag("mean_tau", mean_of(&runs.iter().map(|r| r.tau).collect::<Vec<_>>()));

    let c = se_multiplier(spec, 3.0);
    let rule = format!("{c} bootstrap standard errors");
    // Column order within each time block is B, H, L, matching the covariance indices.
    for (i, &t) in grid.iter().enumerate() {
        let block: Vec<Vec<f64>> = report.raw.iter().map(|r| r[3 * i..3 * i + 3].to_vec()).collect();
        let st = sample_stats(&["B", "H", "L"], &block, spec.bootstrap, spec.seed.wrapping_add(i as u64));
        let x = (-t.min(t_hat)).exp();
        let theory = process_sigma(k, x, &dist)?.entries;
        let mut row = TrajectoryRow {
            t,
            x,
            stopped: runs.iter().filter(|r| r.tau <= t).count() as f64 / runs.len() as f64,
            empirical: [[0.0; 3]; 3],
            theory,
            se: [[0.0; 3]; 3],
        };
        for a in 0..3 {
            for b in 0..3 {
                row.empirical[a][b] = st.cov[a][b];
                row.se[a][b] = st.se_cov[a][b];
            }
        }
        for (name, a, b) in [("BB", B, B), ("LL", L, L), ("BH", B, H)] {
            report.verdicts.push(Verdict::within(
                &format!("sigma_{name}@{t}"),
                row.empirical[a][b],
                theory[a][b],
                c * row.se[a][b],
                rule.clone(),
            ));
        }
        report.trajectory.push(row);
    }
    Ok(report)
}

/// Fixed supercritical sequence u_r = round(n π_r(λ)).
pub fn run_degseq(spec: &ExperimentSpec) -> Result<ExperimentReport> {
    spec.validate()?;
    let (k, n) = (spec.k, spec.n);
    let lambda = spec.lambda.unwrap();
    let dist = DegreeDistribution::poisson(lambda)?;
    let p_hat = supercritical_hat(&dist, k, "the degree law")?;
    let seq = DegreeSequence::rounded(&dist, n)?;
    let dist_n = empirical_dist(&seq)?;
    let p_hat_n = supercritical_hat(&dist_n, k, "the constructed sequence")?;
    let (b_n, h_n, _) = bhl(&dist_n, k, p_hat_n);
    let sig = process_sigma(k, p_hat, &dist)?.entries;
    let (db, dh, alpha) = bhl_deriv(&dist, k, p_hat);
    let (cb, chh) = (db / alpha, dh / alpha);
    let var_v = sig[B][B] - 2.0 * cb * sig[B][L] + cb * cb * sig[L][L];
    let var_e = 0.25 * (sig[H][H] - 2.0 * chh * sig[H][L] + chh * chh * sig[L][L]);
    let cov = 0.5 * (sig[B][H] - chh * sig[B][L] - cb * sig[H][L] + cb * chh * sig[L][L]);

    let nf = n as f64;
    let rn = nf.sqrt();
    let cores = for_each_replicate(spec, |_, rng| Ok(peel_core(&sample_on(&seq, spec.model, rng)?, k)))?;
    let cols = ["z_v", "z_e"];
    let mut report = ExperimentReport::new(spec, &cols);
    report.raw = cores
        .iter()
        .map(|c| vec![(c.v_core as f64 - b_n * nf) / rn, (c.e_core as f64 - 0.5 * h_n * nf) / rn])
        .collect();
    let stats = sample_stats(&cols, &report.raw, spec.bootstrap, spec.seed);
    report.theory("p_hat", p_hat);
    report.theory("p_hat_n", p_hat_n);
    report.theory("var_zv", var_v);
    report.theory("var_ze", var_e);
    report.theory("cov_zvze", cov);
    let c = se_multiplier(spec, 3.0);
    let rule = format!("{c} bootstrap standard errors");
    report.verdicts.push(Verdict::within("var_zv", stats.cov[0][0], var_v, c * stats.se_cov[0][0], rule.clone()));
    report.verdicts.push(Verdict::within("var_ze", stats.cov[1][1], var_e, c * stats.se_cov[1][1], rule.clone()));
    report.verdicts.push(Verdict::within("cov_zvze", stats.cov[0][1], cov, c * stats.se_cov[0][1], rule));
    let mu = lambda * p_hat;
    histogram_verdicts(&mut report, &cores, n, |j| pmf(j, mu));
    report.stats = Some(stats);
    Ok(report)
}

/// Fixed sequence rounded from Po(λ), by default λ = c_k, or
/// λ = c_k + γn^{−1/2} when γ is given.
pub fn run_degseq_critical(spec: &ExperimentSpec) -> Result<ExperimentReport> {
    spec.validate()?;
    let (k, n) = (spec.k, spec.n);
    let nf = n as f64;
    let (ck, _) = compute_ck(k)?;
    let lambda = match (spec.gamma, spec.lambda) {
        (Some(g), _) => ck + g / nf.sqrt(),
        (None, Some(l)) => l,
        (None, None) => ck,
    };
    let limit = DegreeDistribution::poisson(ck)?;
    let p_hat = mu_k(k, ck)? / ck;
    let seq = DegreeSequence::rounded(&DegreeDistribution::poisson(lambda)?, n)?;
    let dist_n = empirical_dist(&seq)?;
    let (p_bar, l_bar) = p_bar_of(&dist_n, k, 0.5 * p_hat)?;
    let zeta = nf.sqrt() * l_bar;
    let sigma = process_sigma(k, p_hat, &limit)?.entries[L][L].sqrt();
    let target = normal_cdf(-zeta / sigma);

    let cores = for_each_replicate(spec, |_, rng| Ok(peel_core(&sample_on(&seq, spec.model, rng)?, k)))?;
    let guard = |c: &CoreResult| c.e_core as f64 > spec.delta * nf;
    let mut report = ExperimentReport::new(spec, &["nonempty", "literal_nonempty", "v/n", "e/n"]);
    report.raw = cores
        .iter()
        .map(|c| vec![guard(c) as u8 as f64, !c.is_empty() as u8 as f64, c.v_core as f64 / nf, c.e_core as f64 / nf])
        .collect();
    report.theory("lambda", lambda);
    report.theory("p_hat", p_hat);
    report.theory("p_bar_n", p_bar);
    report.theory("zeta", zeta);
    report.theory("sigma", sigma);
    report.theory("probability", target);
    let freq = mean_of(&column(&report.raw, 0));
    let (tol, rule) = binomial_tolerance(spec, target);
    report.verdicts.push(Verdict::within("nonempty_frequency", freq, target, tol, rule));
    let agree = report.raw.iter().filter(|r| r[0] == r[1]).count() as f64 / cores.len() as f64;
    report.diag("guard_agreement", agree);
    report.stats = Some(sample_stats(&["v/n", "e/n"], &column_pairs(&report.raw, 2, 3), spec.bootstrap, spec.seed));
    Ok(report)
}

fn column_pairs(data: &[Vec<f64>], a: usize, b: usize) -> Vec<Vec<f64>> {
    data.iter().map(|r| vec![r[a], r[b]]).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(theorem: Theorem, k: usize) -> ExperimentSpec {
        let mut s = ExperimentSpec::new(theorem, k, 2000, 40, 11);
        s.bootstrap = 50;
        s
    }

    #[test]
    fn validation() {
        assert!(matches!(small(Theorem::Window, 2).with_gamma(0.0).validate(), Err(Error::Config(_))));
        assert!(matches!(small(Theorem::Lln, 3).validate(), Err(Error::Config(_))));
        let mut s = small(Theorem::Lln, 3).with_lambda(4.0);
        s.replicates = 1;
        assert!(s.validate().is_err());
        assert!(small(Theorem::Clt, 3).with_lambda(4.0).with_model(GraphModel::Config).validate().is_err());
        assert!(small(Theorem::Trajectory, 3).with_lambda(4.0).validate().is_err());
        assert!(small(Theorem::Trajectory, 3).with_lambda(4.0).with_grid(vec![0.2, 0.1]).validate().is_err());
        assert!(small(Theorem::Trajectory, 3).with_lambda(4.0).with_grid(vec![0.1, 0.2]).validate().is_ok());
    }

    #[test]
    fn names_round_trip() {
        for t in Theorem::ALL {
            assert_eq!(t.name().parse::<Theorem>().unwrap(), t);
            assert_eq!(serde_json::to_string(&t).unwrap(), format!("\"{}\"", t.name()));
        }
        assert_eq!("config_simple".parse::<GraphModel>().unwrap(), GraphModel::ConfigSimple);
    }

    #[test]
    fn verdict_nan_fails() {
        assert!(!Verdict::within("x", f64::NAN, 0.0, 1.0, "").passed);
        assert!(!Verdict::at_most("x", f64::NAN, 1.0, "").passed);
    }

    #[test]
    fn subcritical_lln_is_empty() {
        let r = run(&small(Theorem::Lln, 3).with_lambda(2.0)).unwrap();
        assert!(r.passed(), "{:?}", r.verdicts);
        assert_eq!(r.diagnostics["empty_fraction"], 1.0);
    }

    #[test]
    fn supercritical_lln_small() {
        let r = run(&small(Theorem::Lln, 3).with_lambda(5.0)).unwrap();
        let v = r.verdict("v/n").unwrap();
        assert!((v.observed - v.expected).abs() < 0.02);
    }

    #[test]
    fn threshold_rejected_by_lln() {
        let (ck, _) = compute_ck(3).unwrap();
        assert!(matches!(run(&small(Theorem::Lln, 3).with_lambda(ck)), Err(Error::Config(_))));
    }

    #[test]
    fn deterministic_across_pools() {
        let spec = small(Theorem::Clt, 3).with_lambda(4.0);
        let a = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap().install(|| run(&spec).unwrap());
        let b = rayon::ThreadPoolBuilder::new().num_threads(3).build().unwrap().install(|| run(&spec).unwrap());
        assert_eq!(a.raw, b.raw);
        assert_eq!(a.stats, b.stats);
        assert_eq!(a.raw_csv(), b.raw_csv());
    }

    #[test]
    fn trajectory_near_zero_is_small() {
        let spec = small(Theorem::Trajectory, 3).with_lambda(4.0).with_grid(vec![0.001, 0.1]);
        let r = run(&spec).unwrap();
        let row = &r.trajectory[0];
        for a in 0..3 {
            for b in 0..3 {
                assert!(row.empirical[a][b].abs() < 0.05, "{:?}", row.empirical);
                assert!(row.theory[a][b].abs() < 0.01);
            }
        }
    }

    #[test]
    fn report_json_round_trips() {
        let r = run(&small(Theorem::Emergence, 3)).unwrap();
        let s = crate::io::to_json_12(&r).unwrap();
        let back: ExperimentReport = serde_json::from_str(&s).unwrap();
        assert_eq!(crate::io::to_json_12(&back).unwrap(), s);
    }
}
