use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_kcore-lab"));
    c.env_remove("KCORE_LAB_SEED");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn json(o: &Output) -> serde_json::Value {
    serde_json::from_str(&stdout(o)).unwrap_or_else(|e| panic!("{e}: {}", stdout(o)))
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

#[test]
fn theory_critical_variance() {
    let o = run(&["theory", "--k", "3", "--critical", "--model", "gnm", "--json"]);
    assert!(o.status.success());
    let v = json(&o);
    assert!((v["sigma_k_sq"].as_f64().unwrap() - 0.763).abs() < 0.001);
    assert!((v["c_k"].as_f64().unwrap() - 3.35).abs() < 0.01);
    assert_eq!(v["config"]["k"], 3);
}

#[test]
fn theory_json_round_trips() {
    let o = run(&["theory", "--k", "3", "--lambda", "4", "--json"]);
    let text = stdout(&o);
    let v: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(format!("{}\n", serde_json::to_string_pretty(&v).unwrap()), text);
    let (mu, p) = (v["mu_hat"].as_f64().unwrap(), v["p_hat"].as_f64().unwrap());
    assert!((p - mu / 4.0).abs() < 1e-11);
    for key in ["a_v", "a_e", "var_zv", "var_ze", "cov_zvze", "psi_k"] {
        assert!(v[key].is_number(), "{key}");
    }
}

#[test]
fn theory_k2_note() {
    let o = run(&["theory", "--k", "2"]);
    assert!(o.status.success());
    let s = stdout(&o);
    assert!(s.contains("c_k        1\n"), "{s}");
    assert!(s.contains("k >= 3"));
}

#[test]
fn theory_subcritical_is_explained() {
    let o = run(&["theory", "--k", "3", "--lambda", "2"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("not above the threshold"));
}

#[test]
fn peel_files() {
    let dir = tempfile::tempdir().unwrap();
    let k4 = write(dir.path(), "k4.txt", "4 6\n0 1\n0 2\n0 3\n1 2\n1 3\n2 3\n");
    let o = run(&["peel", &k4, "--k", "3"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o).lines().next().unwrap(), "4 6");

    let path = write(dir.path(), "path.txt", "4 3\n0 1\n1 2\n2 3\n");
    assert_eq!(run(&["peel", &path, "--k", "2"]).status.code(), Some(2));

    let bad = write(dir.path(), "bad.txt", "4 3\n0 1\n1 x\n2 3\n");
    let o = run(&["peel", &bad, "--k", "2"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 3"));
}

#[test]
fn peel_gnm_matches_theory() {
    let o = run(&["peel", "--gnm", "100000", "200000", "--k", "3", "--seed", "7", "--json"]);
    let v = json(&o);
    let frac = v["v_core"].as_f64().unwrap() / 1e5;
    // ψ_3(μ_3(4)) from the theory subcommand
    let t = json(&run(&["theory", "--k", "3", "--lambda", "4", "--json"]));
    assert!((frac - t["psi_k"].as_f64().unwrap()).abs() < 0.01, "{frac}");
}

#[test]
fn generate_is_reproducible_and_peelable() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.txt");
    let b = dir.path().join("b.txt");
    for p in [&a, &b] {
        let o = run(&["generate", "--gnm", "500", "1000", "--seed", "3", "-o", p.to_str().unwrap()]);
        assert!(o.status.success());
    }
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    let from_file = run(&["peel", a.to_str().unwrap(), "--k", "3"]);
    let direct = run(&["peel", "--gnm", "500", "1000", "--seed", "3", "--k", "3"]);
    assert_eq!(stdout(&from_file), stdout(&direct));
}

#[test]
fn trajectory_export() {
    let dir = tempfile::tempdir().unwrap();
    let deg = write(dir.path(), "deg.txt", "counts\n2 100\n3 300\n4 200\n5 100\n");
    let out = dir.path().join("traj.csv");
    let o = run(&["peel", "--degrees", &deg, "--k", "3", "--grid", "0.1:0.1:0.5", "--trajectory", out.to_str().unwrap()]);
    assert!(matches!(o.status.code(), Some(0) | Some(2)));
    let csv = std::fs::read_to_string(out).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "t,L,H,B");
    assert_eq!(lines.len(), 1 + 5 + 3);
    assert!(lines[6].starts_with("tau,"));
    assert!(lines[7].starts_with("v_core,"));
    assert!(lines[8].starts_with("e_core,"));
}

#[test]
fn lln_subcritical_verdict() {
    let o = run(&["experiment", "lln", "--k", "3", "--lambda", "2", "--n", "5000", "--reps", "4", "--json"]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let v = json(&o);
    assert_eq!(v["verdicts"][0]["name"], "core_empty_whp");
    assert_eq!(v["verdicts"][0]["passed"], true);
}

#[test]
fn window_needs_k3() {
    let o = run(&["experiment", "window", "--k", "2", "--gamma", "0"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("k >= 3"));
}

#[test]
fn failed_verdict_exit_code() {
    // An absurdly tight tolerance must fail the variance verdict.
    let o = run(&["experiment", "emergence", "--k", "3", "--n", "300", "--reps", "20", "--tolerance", "1e-9"]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stdout(&o).contains("FAIL variance"));
}

#[test]
fn experiment_outputs_independent_of_threads() {
    let dir = tempfile::tempdir().unwrap();
    let mut texts = Vec::new();
    for threads in ["1", "3"] {
        let prefix = dir.path().join(format!("run{threads}"));
        let o = run(&[
            "--threads", threads, "experiment", "clt", "--k", "3", "--lambda", "4", "--n", "3000", "--reps", "30",
            "--bootstrap", "50", "--seed", "9", "-o", prefix.to_str().unwrap(),
        ]);
        assert!(matches!(o.status.code(), Some(0) | Some(3)));
        let j = std::fs::read(prefix.with_extension("json")).unwrap();
        let c = std::fs::read(prefix.with_extension("csv")).unwrap();
        texts.push((j, c, stdout(&o)));
    }
    assert_eq!(texts[0], texts[1]);
    let v: serde_json::Value = serde_json::from_slice(&texts[0].0).unwrap();
    assert_eq!(v["spec"]["seed"], 9);
    assert_eq!(v["spec"]["bootstrap"], 50);
    assert_eq!(v["spec"]["delta"], 0.001);
}

#[test]
fn config_file_and_flag_precedence() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "run.cfg", "# experiment\nk=3\nlambda=2\nn=2000\nreps=3\nseed=5\n");
    let v = json(&run(&["--config", &cfg, "experiment", "lln", "--json"]));
    assert_eq!(v["spec"]["seed"], 5);
    assert_eq!(v["spec"]["replicates"], 3);
    let v = json(&run(&["--config", &cfg, "experiment", "lln", "--reps", "4", "--json"]));
    assert_eq!(v["spec"]["replicates"], 4);
    let bad = write(dir.path(), "bad.cfg", "colour=blue\n");
    assert_eq!(run(&["--config", &bad, "theory", "--k", "3"]).status.code(), Some(1));
}

#[test]
fn seed_environment_default() {
    let get = |env: Option<&str>, flag: Option<&str>| {
        let mut c = bin();
        c.args(["generate", "--gnm", "50", "60"]);
        if let Some(s) = flag {
            c.args(["--seed", s]);
        }
        if let Some(e) = env {
            c.env("KCORE_LAB_SEED", e);
        }
        stdout(&c.output().unwrap())
    };
    assert_eq!(get(Some("42"), None), get(None, Some("42")));
    assert_ne!(get(Some("42"), None), get(None, None));
    assert_eq!(get(Some("42"), Some("1")), get(None, None));
}

#[test]
fn report_aggregates() {
    let dir = tempfile::tempdir().unwrap();
    let prefix = dir.path().join("lln");
    let o = run(&["experiment", "lln", "--k", "3", "--lambda", "2", "--n", "2000", "--reps", "3", "-o", prefix.to_str().unwrap()]);
    assert!(o.status.success());
    let path = prefix.with_extension("json");
    let o = run(&["report", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).starts_with("PASS lln"));
    let csv = std::fs::read_to_string(prefix.with_extension("csv")).unwrap();
    assert_eq!(csv.lines().next().unwrap(), "replicate,v/n,e/n");
    assert_eq!(csv.lines().count(), 4);
}

#[test]
fn trajectory_experiment_table() {
    let o = run(&[
        "experiment", "trajectory", "--k", "3", "--lambda", "4", "--n", "2000", "--reps", "20", "--bootstrap", "20",
        "--grid", "0.05,0.1", "--json",
    ]);
    assert!(matches!(o.status.code(), Some(0) | Some(3)));
    let v = json(&o);
    let rows = v["trajectory"].as_array().unwrap();
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[1]["t"], 0.1);
    assert_eq!(rows[1]["theory"].as_array().unwrap().len(), 3);
}
