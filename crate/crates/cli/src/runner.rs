//! Executes one configured experiment and writes its outputs.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use gibbsfield::exact::entropy;
use gibbsfield::lattice::Pattern;
use gibbsfield::laws::{self, FieldGen, HitRecord, RowStatus, SurvivalCurve};
use gibbsfield::Result;
use serde::Serialize;

use crate::config::{ExperimentKind, Resolved};

pub const VERSION: &str = concat!("v", env!("CARGO_PKG_VERSION"));

/// Environment variable naming the default output directory.
pub const OUTPUT_DIR_VAR: &str = "GIBBSFIELD_OUTPUT_DIR";

#[derive(Clone, Debug, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl Check {
    fn at_most(name: impl Into<String>, value: f64, tolerance: f64) -> Self {
        Self {
            name: name.into(),
            value,
            tolerance,
            passed: value <= tolerance,
        }
    }
}

/// Everything an experiment produced, before it is written out.
#[derive(Debug)]
pub struct Outcome {
    pub result: serde_json::Value,
    /// `(suffix, contents)` of each CSV file.
    pub csv: Vec<(String, String)>,
    pub checks: Vec<Check>,
    /// Human summary as `(label, value)` rows.
    pub summary: Vec<(String, String)>,
}

impl Outcome {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

#[derive(Serialize)]
struct Envelope<'a> {
    version: &'a str,
    config_hash: &'a str,
    experiment: &'a str,
    config: serde_json::Value,
    passed: bool,
    checks: &'a [Check],
    result: &'a serde_json::Value,
}

/// Output of a completed run.
#[derive(Debug)]
pub struct Report {
    pub outcome: Outcome,
    pub files: Vec<PathBuf>,
}

/// Runs the experiment on `workers` threads (default: all cores) and writes
/// `<stem>.json` plus one CSV per table into `out_dir`.
pub fn run(r: &Resolved, workers: Option<usize>, out_dir: &Path) -> anyhow::Result<Report> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.unwrap_or(0))
        .build()?;
    let outcome = pool.install(|| execute(r))?;
    let files = write_outputs(r, &outcome, out_dir)?;
    Ok(Report { outcome, files })
}

/// The result JSON document for `outcome`.
pub fn result_json(r: &Resolved, outcome: &Outcome) -> anyhow::Result<String> {
    let config: toml::Value = toml::from_str(&r.canonical)?;
    let env = Envelope {
        version: VERSION,
        config_hash: &r.hash,
        experiment: r.config.experiment.name(),
        config: serde_json::to_value(config)?,
        passed: outcome.passed(),
        checks: &outcome.checks,
        result: &outcome.result,
    };
    Ok(serde_json::to_string_pretty(&env)? + "\n")
}

fn write_outputs(r: &Resolved, outcome: &Outcome, dir: &Path) -> anyhow::Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let stem = r.stem();
    let mut files = vec![(dir.join(format!("{stem}.json")), result_json(r, outcome)?)];
    for (suffix, body) in &outcome.csv {
        let header = format!("# {VERSION} config {}\n", r.hash);
        files.push((dir.join(format!("{stem}.{suffix}.csv")), header + body));
    }
    for (path, body) in &files {
        write_atomic(path, body.as_bytes())?;
    }
    Ok(files.into_iter().map(|f| f.0).collect())
}

/// Writes through a temporary file in the same directory and renames it
/// into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let dir = path
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or(Path::new("."));
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

/// Aligned two-column text.
pub fn format_summary(rows: &[(String, String)], checks: &[Check]) -> String {
    let width = rows
        .iter()
        .map(|r| r.0.len())
        .chain(checks.iter().map(|c| c.name.len()))
        .max()
        .unwrap_or(0);
    let mut out = String::new();
    for (k, v) in rows {
        let _ = writeln!(out, "{k:<width$}  {v}");
    }
    for c in checks {
        let verdict = if c.passed { "PASS" } else { "FAIL" };
        let _ = writeln!(
            out,
            "{:<width$}  {verdict}  {:.6} (tolerance {})",
            c.name, c.value, c.tolerance
        );
    }
    out
}

fn field_gen(r: &Resolved, model: gibbsfield::model::Model) -> FieldGen {
    let mut g = FieldGen::new(model, r.config.seed);
    g.burn_in = r.config.sampler.burn_in;
    g.allow_non_dobrushin = r.config.sampler.allow_non_dobrushin;
    g
}

fn target_pattern(r: &Resolved, gen: &FieldGen) -> Result<Pattern> {
    let n = r.n();
    match &r.config.pattern {
        Some(v) => Pattern::new(r.config.dim, n, gen.model.alphabet(), v.clone()),
        None => laws::random_pattern(gen, n, 0),
    }
}

fn curve_csv(c: &SurvivalCurve) -> String {
    let mut buf = Vec::new();
    c.write_csv(&mut buf).expect("writing to memory");
    String::from_utf8(buf).expect("ascii")
}

fn records_csv(records: &[HitRecord]) -> String {
    let mut s = String::from(HitRecord::CSV_HEADER);
    s.push('\n');
    for rec in records {
        s.push_str(&rec.csv_line());
        s.push('\n');
    }
    s
}

fn kv(k: &str, v: impl std::fmt::Display) -> (String, String) {
    (k.to_string(), v.to_string())
}

fn json<T: Serialize>(v: &T) -> Result<serde_json::Value> {
    Ok(serde_json::to_value(v)?)
}

/// Runs the configured experiment on the current rayon pool.
pub fn execute(r: &Resolved) -> Result<Outcome> {
    let c = &r.config;
    let tol = &c.tolerance;
    let gen = field_gen(r, r.model());
    let mut checks = Vec::new();
    let mut summary = vec![
        kv("experiment", c.experiment.name()),
        kv("model", gen.model.label()),
    ];
    let (result, csv) = match c.experiment {
        ExperimentKind::Exponential => {
            let mut p =
                laws::ExponentialParams::new(gen.clone(), target_pattern(r, &gen)?, c.replicas);
            p.lambda_replicas = c.limits.lambda_replicas.unwrap_or(p.lambda_replicas);
            p.gamma = c.limits.gamma;
            p.t_max = c.grid.t_max;
            p.t_step = c.grid.t_step;
            p.unit_lambda = c.limits.unit_lambda;
            p.max_cap = c.limits.max_cap;
            p.z = c.limits.z;
            let res = laws::exponential_law_experiment(&p)?;
            summary.extend([
                kv("pattern", &res.pattern_hash),
                kv("Pr(A)", res.pattern_probability.value),
                kv("lambda", res.lambda.value),
                kv("cap", res.cap),
                kv(
                    "sup gap",
                    format!("{:.5} at t = {:.2}", res.sup_gap, res.sup_gap_t),
                ),
            ]);
            if let Some(t) = tol.sup_gap {
                checks.push(Check::at_most("sup_gap", res.sup_gap, t));
            }
            let csv = vec![
                ("survival".into(), curve_csv(&res.curve)),
                ("records".into(), records_csv(&res.records)),
            ];
            (json(&res)?, csv)
        }
        ExperimentKind::Repetition => {
            let mut p = laws::RepetitionParams::new(gen.clone(), r.n(), c.replicas);
            p.lambda_replicas = c.limits.lambda_replicas.unwrap_or(p.lambda_replicas);
            p.gamma = c.limits.gamma;
            p.t_max = c.grid.t_max;
            p.t_step = c.grid.t_step;
            p.unit_lambda = c.limits.unit_lambda;
            p.max_cap = c.limits.max_cap;
            p.z = c.limits.z;
            let res = laws::repetition_law_experiment(&p)?;
            summary.extend([
                kv("lambda", res.lambda.value),
                kv("bad fraction", res.bad_fraction),
                kv(
                    "sup gap",
                    format!("{:.5} at t = {:.2}", res.sup_gap, res.sup_gap_t),
                ),
            ]);
            if let Some(m) = &res.bad_mass {
                summary.push(kv("exact bad mass", m.value));
            }
            if let Some(t) = tol.sup_gap {
                checks.push(Check::at_most("sup_gap", res.sup_gap, t));
            }
            let csv = vec![
                ("survival".into(), curve_csv(&res.curve)),
                ("records".into(), records_csv(&res.records)),
            ];
            (json(&res)?, csv)
        }
        ExperimentKind::Entropy | ExperimentKind::Waiting => {
            let mut p = laws::LogTimeParams::new(c.n.clone(), c.replicas);
            p.max_cap = c.limits.max_cap;
            p.cap_factor = c.limits.cap_factor.unwrap_or(p.cap_factor);
            p.z = c.limits.z;
            let res = if c.experiment == ExperimentKind::Entropy {
                laws::entropy_via_repetition(&gen, &p)?
            } else {
                let q_gen = field_gen(r, r.model_q().expect("validated"));
                laws::waiting_time_experiment(&q_gen, &gen, &p)?
            };
            summary.push(kv(
                "target",
                format!("{:.6} ({})", res.target.value, res.target.provenance),
            ));
            let mut csv = String::from("n,cap,mean,ci,censored_fraction,relative_error,status\n");
            for row in &res.rows {
                let status = match &row.status {
                    RowStatus::Ok => "ok",
                    RowStatus::Censored => "censored",
                    RowStatus::Infeasible(_) => "infeasible",
                };
                let shown = match &row.status {
                    RowStatus::Infeasible(why) => format!("infeasible: {why}"),
                    _ => format!("{:.5} +- {:.5} ({status})", row.mean, row.ci),
                };
                summary.push(kv(&format!("n = {}", row.n), shown));
                let _ = writeln!(
                    csv,
                    "{},{},{},{},{},{},{status}",
                    row.n, row.cap, row.mean, row.ci, row.censored_fraction, row.relative_error
                );
            }
            if let (Some(t), Some(row)) = (tol.relative, res.largest_feasible()) {
                checks.push(Check::at_most(
                    format!("relative_error(n={})", row.n),
                    row.relative_error,
                    t,
                ));
            }
            (json(&res)?, vec![("rows".into(), csv)])
        }
        ExperimentKind::Clt => {
            let mut p = laws::CltParams::new(gen.clone(), r.n(), c.replicas);
            p.statistic = c.clt.statistic;
            p.fd_step = c.clt.fd_step;
            p.max_residual = c.clt.max_residual;
            p.cap = c.limits.cap.unwrap_or(c.limits.max_cap);
            let res = laws::clt_experiment(&p)?;
            summary.extend([
                kv("variance", res.variance),
                kv("theta^2", res.theta_squared.value),
                kv("relative error", res.relative_error),
            ]);
            if let Some(ks) = &res.ks {
                summary.push(kv(
                    "KS",
                    format!("D = {:.4}, p = {:.4}", ks.statistic, ks.p_value),
                ));
            }
            if let Some(t) = tol.relative {
                checks.push(Check::at_most(
                    "variance_relative_error",
                    res.relative_error,
                    t,
                ));
            }
            let mut csv = String::from("replica,value\n");
            for (i, v) in res.standardized.iter().enumerate() {
                let _ = writeln!(csv, "{i},{v}");
            }
            (json(&res)?, vec![("standardized".into(), csv)])
        }
        ExperimentKind::Ldp => {
            let q_gen = match r.model_q() {
                Some(m) => field_gen(r, m),
                None => gen.clone(),
            };
            let mut p = laws::CumulantParams::new(q_gen, gen.clone(), c.n.clone(), c.replicas);
            p.q_grid = c.grid.q.clone();
            p.max_cap = c.limits.max_cap;
            p.cap_factor = c.limits.cap_factor.unwrap_or(p.cap_factor);
            p.standard_fact_max_n = c.limits.standard_fact_max_n;
            p.z = c.limits.z;
            let res = laws::ldp_cumulant(&p)?;
            let mut csv = String::from("n,q,w_hat,ci,predicted,gap\n");
            for row in &res.rows {
                for (i, q) in res.q.iter().enumerate() {
                    let pred = res.predicted[i].map_or(String::new(), |v| v.to_string());
                    let gap = row.gap[i].map_or(String::new(), |v| v.to_string());
                    let _ = writeln!(
                        csv,
                        "{},{q},{},{},{pred},{gap}",
                        row.n, row.w_hat[i], row.ci[i]
                    );
                    if let (Some(t), Some(rel)) = (tol.relative, row.relative_gap[i]) {
                        checks.push(Check::at_most(
                            format!("relative_gap(n={},q={q})", row.n),
                            rel,
                            t,
                        ));
                    }
                }
                summary.push(kv(
                    &format!("n = {} censored", row.n),
                    row.censored_fraction,
                ));
            }
            if let Some(g) = res.continuity_gap {
                summary.push(kv("continuity gap at q = -1", g));
            }
            (json(&res)?, vec![("cumulant".into(), csv)])
        }
        ExperimentKind::Rate => {
            let s = entropy(&gen.model)?;
            let u_grid = c
                .grid
                .u
                .clone()
                .unwrap_or_else(|| (-6..=6).map(|i| s + 0.05 * i as f64).collect());
            let res = laws::rate_function(&laws::RateParams::new(gen.model.clone(), u_grid))?;
            summary.extend([
                kv("entropy", res.entropy.value),
                kv("convex on grid", res.convex_on_grid),
                kv("u0 (approximate)", res.u0),
            ]);
            let mut csv = String::from("u,rate,argmax_q,at_boundary\n");
            for pt in &res.points {
                let _ = writeln!(
                    csv,
                    "{},{},{},{}",
                    pt.u, pt.rate, pt.argmax_q, pt.at_boundary
                );
            }
            (json(&res)?, vec![("rate".into(), csv)])
        }
        ExperimentKind::Lambda => {
            let patterns: Vec<Pattern> = (0..c.patterns as u64)
                .map(|i| {
                    let n = c.n[i as usize % c.n.len()];
                    laws::random_pattern(&gen, n, i)
                })
                .collect::<Result<_>>()?;
            let rows = laws::lambda_survey(&gen, &patterns, c.replicas, c.limits.gamma)?;
            let mut csv = String::from("pattern_hash,n,pattern_probability,lambda,t,k,survival\n");
            for row in &rows {
                let e = &row.estimate;
                let _ = writeln!(
                    csv,
                    "{},{},{},{},{},{},{}",
                    row.pattern_hash,
                    row.n,
                    row.pattern_probability,
                    e.lambda,
                    e.t,
                    e.k,
                    e.survival
                );
            }
            let lo = rows
                .iter()
                .map(|r| r.estimate.lambda)
                .fold(f64::INFINITY, f64::min);
            let hi = rows.iter().map(|r| r.estimate.lambda).fold(0.0, f64::max);
            summary.push(kv("lambda range", format!("[{lo:.4}, {hi:.4}]")));
            (json(&rows)?, vec![("lambda".into(), csv)])
        }
        ExperimentKind::HittingOracle => {
            let a = target_pattern(r, &gen)?;
            let cap = c.limits.cap.unwrap_or(2);
            let (rows, table) =
                laws::hitting_oracle_comparison(&gen, &a, cap, c.replicas, tol.sigmas)?;
            let mut csv = String::from("k,monte_carlo,exact,se,within\n");
            for row in &rows {
                let _ = writeln!(
                    csv,
                    "{},{},{},{},{}",
                    row.k, row.monte_carlo, row.exact, row.se, row.within
                );
                let z = if row.se > 0.0 {
                    (row.monte_carlo - row.exact).abs() / row.se
                } else if row.monte_carlo == row.exact {
                    0.0
                } else {
                    f64::INFINITY
                };
                checks.push(Check::at_most(
                    format!("standard_errors(k={})", row.k),
                    z,
                    tol.sigmas,
                ));
            }
            summary.push(kv("states enumerated", table.states));
            (
                serde_json::json!({ "rows": json(&rows)?, "exact": json(&table)? }),
                vec![("oracle".into(), csv)],
            )
        }
        ExperimentKind::Factorization => {
            let a = target_pattern(r, &gen)?;
            let p = laws::FactorizationParams {
                gen: gen.clone(),
                pattern: a,
                side: c.factorization.side,
                deltas: c.factorization.deltas.clone(),
                k: c.factorization.cubes,
                replicas: c.replicas,
            };
            let res = laws::factorization_experiment(&p)?;
            let mut csv = String::from("delta,lhs,rhs,gap,ci\n");
            for row in &res.rows {
                let f = &row.result;
                let _ = writeln!(csv, "{},{},{},{},{}", row.delta, f.lhs, f.rhs, f.gap, f.ci);
            }
            summary.push(kv("monotone where separated", res.monotone_where_separated));
            (json(&res)?, vec![("factorization".into(), csv)])
        }
        ExperimentKind::StrongApproximation => {
            let rows =
                laws::strong_approximation(&gen, &c.n, c.replicas, c.limits.eps, c.limits.max_cap)?;
            let mut csv = String::from("n,lo,hi,inside_fraction,censored_fraction\n");
            for row in &rows {
                let _ = writeln!(
                    csv,
                    "{},{},{},{},{}",
                    row.n, row.window.0, row.window.1, row.inside_fraction, row.censored_fraction
                );
                summary.push(kv(&format!("n = {} inside", row.n), row.inside_fraction));
            }
            (json(&rows)?, vec![("strong_approximation".into(), csv)])
        }
    };
    Ok(Outcome {
        result,
        csv,
        checks,
        summary,
    })
}
