//! End-to-end checks of the `gibbsfield` binary: exit codes, output files
//! and determinism.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use gibbsfield::codec;
use gibbsfield_cli::config;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_gibbsfield"));
    c.env_remove("GIBBSFIELD_OUTPUT_DIR");
    c
}

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("spawn gibbsfield")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn write_config(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

const SMALL: &str = "experiment = \"exponential\"\nseed = 9\ndim = 2\nreplicas = 300\nn = [1]\n\n[model]\npreset = \"bernoulli\"\np = 0.5\n";

#[test]
fn help_exits_zero() {
    let o = run(&["run", "--help"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("Usage"));
    assert_eq!(run(&["--version"]).status.code(), Some(0));
}

#[test]
fn bad_usage_exits_one() {
    assert_eq!(run(&[]).status.code(), Some(1));
    assert_eq!(run(&["frobnicate"]).status.code(), Some(1));
    let o = run(&["run", "/nonexistent/config.toml"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn negative_replicas_exit_one_without_output() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "bad.toml",
        &SMALL.replace("replicas = 300", "replicas = -300"),
    );
    let out = dir.path().join("out");
    let o = run(&["run", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("bad.toml:4:"), "{}", stderr(&o));
    assert!(!out.exists() || fs::read_dir(&out).unwrap().next().is_none());
}

#[test]
fn identical_runs_write_identical_json() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "small.toml", SMALL);
    let mut docs = Vec::new();
    for (i, workers) in ["1", "2", "1"].iter().enumerate() {
        let out = dir.path().join(format!("out{i}"));
        let o = run(&[
            "run",
            &cfg,
            "--workers",
            workers,
            "--out",
            out.to_str().unwrap(),
        ]);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
        docs.push(fs::read(out.join("exponential.json")).unwrap());
        let csv = fs::read_to_string(out.join("exponential.survival.csv")).unwrap();
        assert!(csv.starts_with("# v"));
    }
    assert!(docs.windows(2).all(|w| w[0] == w[1]));
    let doc: serde_json::Value = serde_json::from_slice(&docs[0]).unwrap();
    assert_eq!(doc["config"]["replicas"], 300);
    assert_eq!(doc["config_hash"].as_str().unwrap().len(), 64);
}

#[test]
fn failed_tolerance_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "small.toml", SMALL);
    let out = dir.path().join("out");
    let o = run(&[
        "run",
        &cfg,
        "--set",
        "tolerance.sup_gap=1e-9",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    assert!(out.join("exponential.json").exists());
}

#[test]
fn output_dir_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "rate.toml",
        &fs::read_to_string(configs().join("rate.toml")).unwrap(),
    );
    let out = dir.path().join("env-out");
    let o = bin()
        .args(["run", &cfg])
        .env("GIBBSFIELD_OUTPUT_DIR", &out)
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(out.join("rate.json").exists());
    assert!(out.join("rate.rate.csv").exists());
}

#[test]
fn shipped_configs_validate() {
    let mut seen = 0;
    for entry in fs::read_dir(configs()).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "toml") {
            config::load(&path, &[]).unwrap_or_else(|e| panic!("{e}"));
            seen += 1;
        }
    }
    assert!(seen >= 8);
}

#[test]
fn unknown_suite_exits_one() {
    let o = run(&["verify", "everything"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("unknown suite"));
}

#[test]
fn oracle_suite_passes() {
    let o = run(&["verify", "oracle", "--workers", "2"]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let out = stdout(&o);
    assert_eq!(
        out.lines().filter(|l| l.starts_with("PASS")).count(),
        3,
        "{out}"
    );
}

#[test]
fn wrong_glauber_beta_fails_the_tv_criterion() {
    let o = run(&["verify", "oracle", "--fixture-glauber-beta", "0.35"]);
    assert_eq!(o.status.code(), Some(2));
    let out = stdout(&o);
    assert!(out.lines().any(|l| l.starts_with("FAIL   2")), "{out}");
    assert!(out.lines().any(|l| l.starts_with("PASS   1")), "{out}");
}

#[test]
fn sample_dumps_decodable_configurations() {
    let cfg = configs().join("entropy.toml");
    let cfg = cfg.to_str().unwrap();
    let a = run(&["sample", cfg, "--side", "4"]);
    assert_eq!(a.status.code(), Some(0), "{}", stderr(&a));
    let c = codec::configuration_from_text(&stdout(&a)).unwrap();
    assert_eq!(c.values().len(), 16);
    let b = run(&["sample", cfg, "--side", "4"]);
    assert_eq!(a.stdout, b.stdout);
    let other = run(&["sample", cfg, "--side", "4", "--replica", "1"]);
    assert_ne!(a.stdout, other.stdout);

    let ising = configs().join("ising_repetition.toml");
    let j = run(&[
        "sample",
        ising.to_str().unwrap(),
        "--side",
        "3",
        "--torus",
        "--format",
        "json",
    ]);
    assert_eq!(j.status.code(), Some(0), "{}", stderr(&j));
    let c = codec::configuration_from_json(stdout(&j).trim()).unwrap();
    assert!(c.domain().is_torus());
    assert_eq!(c.values().len(), 9);
    assert_eq!(run(&["sample", cfg, "--side", "0"]).status.code(), Some(1));
}

#[test]
fn oracle_tables() {
    let cfg = configs().join("hitting_oracle.toml");
    let cfg = cfg.to_str().unwrap();
    let s = run(&["oracle", cfg]);
    assert_eq!(s.status.code(), Some(0), "{}", stderr(&s));
    let doc: serde_json::Value = serde_json::from_slice(&s.stdout).unwrap();
    assert!((doc["entropy"].as_f64().unwrap() - std::f64::consts::LN_2).abs() < 1e-12);

    let p = run(&["oracle", cfg, "--table", "pattern"]);
    assert_eq!(p.status.code(), Some(0), "{}", stderr(&p));
    let total: f64 = stdout(&p)
        .lines()
        .skip_while(|l| l.starts_with('#'))
        .skip(1)
        .map(|l| l.rsplit(',').next().unwrap().parse::<f64>().unwrap())
        .sum();
    assert!((total - 1.0).abs() < 1e-12);

    let h = run(&["oracle", cfg, "--table", "hitting", "--cap", "2"]);
    assert_eq!(h.status.code(), Some(0), "{}", stderr(&h));
    let last: f64 = stdout(&h)
        .lines()
        .last()
        .unwrap()
        .split(',')
        .nth(1)
        .unwrap()
        .parse()
        .unwrap();
    assert!(last > 0.0 && last <= 1.0);
}

#[test]
fn dobrushin_report() {
    let cfg = configs().join("ising_repetition.toml");
    let o = run(&["dobrushin", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).contains("satisfied"));
    let hot = run(&[
        "dobrushin",
        cfg.to_str().unwrap(),
        "--set",
        "model.beta=2.0",
    ]);
    assert!(stdout(&hot).contains("violated"), "{}", stdout(&hot));
}
