//! `kcore-lab`: theory values, peeling, graph generation and Monte Carlo
//! experiments for k-cores of random graphs.

mod config;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use config::{parse_grid, resolve, resolve_seed, FileConfig};
use kcore_lab::covariance::{assemble_critical, assemble_supercritical, Model, VarianceReport};
use kcore_lab::degree::DegreeSequence;
use kcore_lab::experiment::{self, ExperimentReport, ExperimentSpec, GraphModel, Theorem};
use kcore_lab::graph::{config_model, gnm, gnp, simple_graph, Multigraph, DEFAULT_MAX_TRIES};
use kcore_lab::io::{fmt6, parse_degree_sequence, parse_edge_list, to_json_12, trajectory_csv, write_edge_list};
use kcore_lab::peel::{peel_core, peel_process, CoreResult};
use kcore_lab::poisson::tail;
use kcore_lab::rng::rng_from_seed;
use kcore_lab::threshold::compute_ck;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

const EXIT_RUNTIME: u8 = 1;
const EXIT_EMPTY_CORE: u8 = 2;
const EXIT_VERDICT: u8 = 3;

#[derive(Parser, Debug)]
#[command(name = "kcore-lab", version, about = "k-core limit theory and Monte Carlo checks")]
struct Cli {
    /// Worker threads for replicates (default: available parallelism).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Flat key=value file; command-line flags take precedence.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Print JSON instead of a console table.
    #[arg(long, global = true)]
    json: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Threshold constants and limiting variances.
    Theory(TheoryArgs),
    /// k-core of a graph from a file or a generator.
    Peel(PeelArgs),
    /// Write a random graph as an edge list.
    Generate(GenerateArgs),
    /// Run a Monte Carlo experiment and compare with theory.
    Experiment(ExperimentArgs),
    /// Summarize experiment JSON reports.
    Report(ReportArgs),
}

#[derive(Args, Debug)]
struct TheoryArgs {
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    lambda: Option<f64>,
    /// Evaluate at λ = c_k.
    #[arg(long)]
    critical: bool,
    /// gnm or gnp.
    #[arg(long)]
    model: Option<String>,
}

#[derive(Args, Debug)]
struct GraphSource {
    /// Edge-list file ("n m" header, then "u v" lines).
    input: Option<PathBuf>,
    /// G(n, m) with the given n and m.
    #[arg(long, num_args = 2, value_names = ["N", "M"])]
    gnm: Option<Vec<String>>,
    /// G(n, p) with the given n and p.
    #[arg(long, num_args = 2, value_names = ["N", "P"])]
    gnp: Option<Vec<String>>,
    /// Configuration model on a degree-sequence file.
    #[arg(long)]
    degrees: Option<PathBuf>,
    /// Condition the configuration model on simplicity.
    #[arg(long)]
    simple: bool,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args, Debug)]
struct PeelArgs {
    #[command(flatten)]
    source: GraphSource,
    #[arg(long)]
    k: Option<usize>,
    /// Run the balls-and-bins process (needs --degrees) and write its trajectory CSV here.
    #[arg(long)]
    trajectory: Option<PathBuf>,
    /// Trajectory sampling times, "a:step:b" or "t1,t2,...".
    #[arg(long)]
    grid: Option<String>,
}

#[derive(Args, Debug)]
struct GenerateArgs {
    #[command(flatten)]
    source: GraphSource,
    /// Output file (default: stdout).
    #[arg(long, short)]
    output: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct ExperimentArgs {
    /// lln | clt | window | emergence | trajectory | degseq | degseq-critical
    name: String,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    gamma: Option<f64>,
    /// gnp | gnm | config | config-simple
    #[arg(long)]
    model: Option<String>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    reps: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    grid: Option<String>,
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long)]
    tolerance: Option<f64>,
    #[arg(long)]
    bootstrap: Option<usize>,
    /// Output prefix; writes PREFIX.json and PREFIX.csv.
    #[arg(long, short)]
    output: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct ReportArgs {
    /// Experiment JSON reports.
    #[arg(required = true)]
    files: Vec<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_RUNTIME)
        }
    }
}

fn run(cli: Cli) -> Result<u8> {
    let file = match &cli.config {
        Some(p) => FileConfig::load(p)?,
        None => FileConfig::default(),
    };
    let threads = resolve(cli.threads, &file, "threads")?;
    if let Some(t) = threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .map_err(|e| anyhow!("cannot start {t} worker threads: {e}"))?;
    }
    match cli.command {
        Command::Theory(a) => cmd_theory(a, &file, cli.json),
        Command::Peel(a) => cmd_peel(a, &file, cli.json),
        Command::Generate(a) => cmd_generate(a, &file),
        Command::Experiment(a) => cmd_experiment(a, &file, cli.json),
        Command::Report(a) => cmd_report(a, cli.json),
    }
}

fn print_json<T: Serialize>(value: &T) -> Result<()> {
    println!("{}", to_json_12(value)?);
    Ok(())
}

fn parse_model(s: &str) -> Result<Model> {
    s.parse::<Model>().map_err(|e| anyhow!("{e}"))
}

#[derive(Serialize, Deserialize)]
struct TheoryConfig {
    k: usize,
    lambda: Option<f64>,
    critical: bool,
    model: Model,
}

#[derive(Serialize, Deserialize)]
struct TheoryOutput {
    config: TheoryConfig,
    c_k: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    psi_k: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    note: Option<String>,
    #[serde(flatten, skip_serializing_if = "Option::is_none")]
    report: Option<VarianceReport>,
}

fn cmd_theory(a: TheoryArgs, file: &FileConfig, json: bool) -> Result<u8> {
    let k = resolve(a.k, file, "k")?.ok_or_else(|| anyhow!("--k is required"))?;
    let lambda = resolve(a.lambda, file, "lambda")?;
    let critical = a.critical || file.get::<bool>("critical")?.unwrap_or(false);
    let model = match a.model.as_deref().or(file.get_str("model")) {
        Some(s) => parse_model(s)?,
        None => Model::Gnm,
    };
    let (ck, _) = compute_ck(k)?;
    let config = TheoryConfig { k, lambda, critical, model };
    let mut out = TheoryOutput { config, c_k: ck, psi_k: None, note: None, report: None };
    if critical && lambda.is_some() {
        bail!("--critical and --lambda are mutually exclusive");
    }
    if k == 2 && lambda.is_none() {
        out.note = Some("c_2 = 1; the critical-window and emergence limits require k >= 3".into());
    } else if let Some(l) = lambda {
        if l <= ck {
            bail!(
                "lambda = {l} is not above the threshold c_{k} = {}; the core is empty whp there \
                 (use --critical for the threshold constants)",
                fmt6(ck)
            );
        }
        out.report = Some(assemble_supercritical(k, l, model)?);
    } else {
        out.report = Some(assemble_critical(k, model)?);
    }
    out.psi_k = out.report.as_ref().map(|r| tail(k, r.mu_hat));
    if json {
        print_json(&out)?;
        return Ok(0);
    }
    println!("k          {k}");
    println!("model      {model}");
    println!("c_k        {}", fmt6(ck));
    if let Some(r) = &out.report {
        let row = |name: &str, v: Option<f64>| {
            if let Some(v) = v {
                println!("{name:10} {}", fmt6(v));
            }
        };
        row("lambda", Some(r.lambda));
        row("mu_hat", Some(r.mu_hat));
        row("p_hat", Some(r.p_hat));
        row("psi_k", out.psi_k);
        row("a_v", r.a_v);
        row("a_e", r.a_e);
        row("Var(Z_v)", r.var_zv);
        row("Var(Z_e)", r.var_ze);
        row("Cov", r.cov_zvze);
        row("sigma^2", r.sigma_sq);
        row("sigma_k^2", r.sigma_k_sq);
    }
    if let Some(note) = &out.note {
        println!("note       {note}");
    }
    Ok(0)
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn two<T: std::str::FromStr>(v: &[String], what: &str) -> Result<(usize, T)>
where
    T::Err: std::fmt::Display,
{
    let n = v[0].parse::<usize>().map_err(|e| anyhow!("{what}: bad n {:?}: {e}", v[0]))?;
    let x = v[1].parse::<T>().map_err(|e| anyhow!("{what}: bad value {:?}: {e}", v[1]))?;
    Ok((n, x))
}

fn build_graph(src: &GraphSource, file: &FileConfig) -> Result<Multigraph> {
    let chosen = [src.input.is_some(), src.gnm.is_some(), src.gnp.is_some(), src.degrees.is_some()];
    if chosen.iter().filter(|b| **b).count() != 1 {
        bail!("give exactly one of: an edge-list file, --gnm N M, --gnp N P, --degrees FILE");
    }
    let mut rng = rng_from_seed(resolve_seed(src.seed, file)?);
    if let Some(p) = &src.input {
        return Ok(parse_edge_list(&read(p)?)?);
    }
    if let Some(v) = &src.gnm {
        let (n, m) = two::<usize>(v, "--gnm")?;
        return Ok(gnm(n, m, &mut rng)?);
    }
    if let Some(v) = &src.gnp {
        let (n, p) = two::<f64>(v, "--gnp")?;
        return Ok(gnp(n, p, &mut rng)?);
    }
    let seq = parse_degree_sequence(&read(src.degrees.as_ref().unwrap())?)?;
    if src.simple {
        Ok(simple_graph(&seq, &mut rng, DEFAULT_MAX_TRIES)?.0)
    } else {
        Ok(config_model(&seq, &mut rng)?)
    }
}

#[derive(Serialize)]
struct PeelOutput<'a> {
    n: usize,
    m: usize,
    k: usize,
    #[serde(flatten)]
    core: &'a CoreResult,
}

fn print_core(n: usize, m: usize, k: usize, core: &CoreResult, json: bool) -> Result<()> {
    if json {
        return print_json(&PeelOutput { n, m, k, core });
    }
    println!("{} {}", core.v_core, core.e_core);
    for (d, &c) in core.degree_hist.iter().enumerate().filter(|(_, c)| **c > 0) {
        println!("degree {d}: {c}");
    }
    Ok(())
}

fn cmd_peel(a: PeelArgs, file: &FileConfig, json: bool) -> Result<u8> {
    let k = resolve(a.k, file, "k")?.ok_or_else(|| anyhow!("--k is required"))?;
    let core = if let Some(out) = &a.trajectory {
        let Some(deg) = &a.source.degrees else {
            bail!("--trajectory needs --degrees (the process runs on a configuration model)");
        };
        let grid_spec = a.grid.as_deref().or(file.get_str("grid")).ok_or_else(|| anyhow!("--trajectory needs --grid"))?;
        let grid = parse_grid(grid_spec)?;
        let seq: DegreeSequence = parse_degree_sequence(&read(deg)?)?;
        let mut rng = rng_from_seed(resolve_seed(a.source.seed, file)?);
        let (tr, _) = peel_process(&seq, k, &grid, false, &mut rng)?;
        std::fs::write(out, trajectory_csv(&tr)).with_context(|| format!("writing {}", out.display()))?;
        print_core(seq.n(), seq.m(), k, &tr.final_core, json)?;
        tr.final_core
    } else {
        let g = build_graph(&a.source, file)?;
        let core = peel_core(&g, k);
        print_core(g.n, g.m(), k, &core, json)?;
        core
    };
    Ok(if core.is_empty() { EXIT_EMPTY_CORE } else { 0 })
}

fn cmd_generate(a: GenerateArgs, file: &FileConfig) -> Result<u8> {
    let g = build_graph(&a.source, file)?;
    let text = write_edge_list(&g);
    match a.output.or_else(|| file.get_str("output").map(PathBuf::from)) {
        Some(p) => std::fs::write(&p, text).with_context(|| format!("writing {}", p.display()))?,
        None => print!("{text}"),
    }
    Ok(0)
}

fn experiment_spec(a: &ExperimentArgs, file: &FileConfig) -> Result<ExperimentSpec> {
    let theorem: Theorem = a.name.parse()?;
    let k = resolve(a.k, file, "k")?.ok_or_else(|| anyhow!("--k is required"))?;
    let n = resolve(a.n, file, "n")?.unwrap_or(match theorem {
        Theorem::Window | Theorem::Emergence | Theorem::DegseqCritical => 10_000,
        _ => 100_000,
    });
    let reps = resolve(a.reps, file, "reps")?.unwrap_or(200);
    let mut spec = ExperimentSpec::new(theorem, k, n, reps, resolve_seed(a.seed, file)?);
    spec.lambda = resolve(a.lambda, file, "lambda")?;
    spec.gamma = resolve(a.gamma, file, "gamma")?;
    if let Some(m) = a.model.as_deref().or(file.get_str("model")) {
        spec.model = m.parse::<GraphModel>()?;
    }
    if let Some(g) = a.grid.as_deref().or(file.get_str("grid")) {
        spec.grid = parse_grid(g)?;
    }
    if let Some(d) = resolve(a.delta, file, "delta")? {
        spec.delta = d;
    }
    spec.tolerance = resolve(a.tolerance, file, "tolerance")?;
    if let Some(b) = resolve(a.bootstrap, file, "bootstrap")? {
        spec.bootstrap = b;
    }
    spec.validate()?;
    Ok(spec)
}

fn print_verdicts(r: &ExperimentReport) {
    println!(
        "{} k={} model={} n={} reps={} seed={}",
        r.spec.theorem, r.spec.k, r.spec.model, r.spec.n, r.spec.replicates, r.spec.seed
    );
    for (key, v) in &r.theory {
        println!("  theory {key:20} {}", fmt6(*v));
    }
    for (key, v) in &r.diagnostics {
        println!("  diag   {key:20} {}", fmt6(*v));
    }
    for row in &r.trajectory {
        println!("  t = {}  (x = {}, stopped {})", fmt6(row.t), fmt6(row.x), fmt6(row.stopped));
        for (name, i, j) in [("BB", 0, 0), ("BH", 0, 1), ("BL", 0, 2), ("HH", 1, 1), ("HL", 1, 2), ("LL", 2, 2)] {
            println!(
                "    sigma_{name}  empirical {:>12}  theory {:>12}  se {:>12}",
                fmt6(row.empirical[i][j]),
                fmt6(row.theory[i][j]),
                fmt6(row.se[i][j])
            );
        }
    }
    for v in &r.verdicts {
        println!(
            "  {} {:28} observed {:>12}  expected {:>12}  tolerance {:>12}  ({})",
            if v.passed { "PASS" } else { "FAIL" },
            v.name,
            fmt6(v.observed),
            fmt6(v.expected),
            fmt6(v.tolerance),
            v.rule
        );
    }
    println!("verdict: {}", if r.passed() { "PASS" } else { "FAIL" });
}

fn cmd_experiment(a: ExperimentArgs, file: &FileConfig, json: bool) -> Result<u8> {
    let spec = experiment_spec(&a, file)?;
    let report = experiment::run(&spec)?;
    let text = to_json_12(&report)?;
    if let Some(prefix) = a.output.clone().or_else(|| file.get_str("output").map(PathBuf::from)) {
        let json_path = prefix.with_extension("json");
        let csv_path = prefix.with_extension("csv");
        std::fs::write(&json_path, format!("{text}\n")).with_context(|| format!("writing {}", json_path.display()))?;
        std::fs::write(&csv_path, report.raw_csv()).with_context(|| format!("writing {}", csv_path.display()))?;
    }
    if json {
        println!("{text}");
    } else {
        print_verdicts(&report);
    }
    Ok(if report.passed() { 0 } else { EXIT_VERDICT })
}

#[derive(Serialize)]
struct ReportSummary {
    file: String,
    theorem: Theorem,
    passed: bool,
    failed: Vec<String>,
}

fn cmd_report(a: ReportArgs, json: bool) -> Result<u8> {
    let mut rows = Vec::new();
    for path in &a.files {
        let r: ExperimentReport =
            serde_json::from_str(&read(path)?).with_context(|| format!("parsing report {}", path.display()))?;
        rows.push(ReportSummary {
            file: path.display().to_string(),
            theorem: r.spec.theorem,
            passed: r.passed(),
            failed: r.verdicts.iter().filter(|v| !v.passed).map(|v| v.name.clone()).collect(),
        });
    }
    if json {
        print_json(&rows)?;
    } else {
        for r in &rows {
            let status = if r.passed { "PASS" } else { "FAIL" };
            println!("{status} {:16} {}  {}", r.theorem.to_string(), r.file, r.failed.join(","));
        }
    }
    Ok(if rows.iter().all(|r| r.passed) { 0 } else { EXIT_VERDICT })
}
