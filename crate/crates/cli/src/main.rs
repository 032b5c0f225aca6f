use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand, ValueEnum};
use gibbsfield::codec;
use gibbsfield::dobrushin::{check_dobrushin, check_high_temperature};
use gibbsfield::exact::{
    bad_pattern_mass, brute_force_hitting_law, entropy, marginal_table, pressure, relative_entropy,
};
use gibbsfield::lattice::{Cube, LatticeVector, Pattern};
use gibbsfield::model::ModelKind;
use gibbsfield::sampler::{sample, SampleDomain, SamplerSpec};
use gibbsfield_cli::config::{self, Resolved};
use gibbsfield_cli::runner::{self, OUTPUT_DIR_VAR};
use gibbsfield_cli::verify::{self, Suite};

/// Rare-pattern statistics for lattice Gibbs random fields.
#[derive(Parser)]
#[command(name = "gibbsfield", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct ConfigArgs {
    /// Experiment configuration (TOML).
    config: PathBuf,
    /// Override a configuration value, e.g. `--set limits.max_cap=512`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a configuration file.
    Run {
        #[command(flatten)]
        cfg: ConfigArgs,
        /// Worker threads; defaults to the available parallelism.
        #[arg(long)]
        workers: Option<usize>,
        /// Output directory; defaults to `output.dir`, then $GIBBSFIELD_OUTPUT_DIR, then `results`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a built-in acceptance suite.
    Verify {
        /// oracle, exponential, entropy, clt, ldp or all.
        suite: String,
        #[arg(long)]
        workers: Option<usize>,
        /// Run the Glauber chain at a different beta (mutation fixture).
        #[arg(long, hide = true)]
        fixture_glauber_beta: Option<f64>,
    },
    /// Dump one sampled configuration of the configured model.
    Sample {
        #[command(flatten)]
        cfg: ConfigArgs,
        /// Side length `L` of the sampled cube or torus.
        #[arg(long)]
        side: usize,
        /// Sample on the periodic `L^d` torus instead of `C_{L-1}`.
        #[arg(long)]
        torus: bool,
        #[arg(long, default_value_t = 0)]
        replica: u64,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
        /// Write to a file instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Dump an exact table for the configured model.
    Oracle {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long, value_enum, default_value_t = Table::Summary)]
        table: Table,
        /// Window cap for the hitting law.
        #[arg(long, default_value_t = 2)]
        cap: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print the Dobrushin and high-temperature condition reports.
    Dobrushin {
        #[command(flatten)]
        cfg: ConfigArgs,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Text,
    Json,
}

#[derive(Clone, Copy, ValueEnum)]
enum Table {
    /// Pressure, entropy and related constants (JSON).
    Summary,
    /// Exact law of every pattern on `C_n` (CSV).
    Pattern,
    /// Exact hitting law of the configured pattern (CSV).
    Hitting,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match dispatch(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn emit(out: Option<&Path>, text: &str) -> anyhow::Result<()> {
    match out {
        Some(p) => runner::write_atomic(p, text.as_bytes())
            .with_context(|| format!("writing {}", p.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn load(cfg: &ConfigArgs) -> anyhow::Result<Resolved> {
    Ok(config::load(&cfg.config, &cfg.overrides)?)
}

fn dispatch(cmd: Command) -> anyhow::Result<ExitCode> {
    match cmd {
        Command::Run { cfg, workers, out } => {
            let r = load(&cfg)?;
            let dir = out
                .or_else(|| r.config.output.dir.clone())
                .or_else(|| std::env::var_os(OUTPUT_DIR_VAR).map(PathBuf::from))
                .unwrap_or_else(|| PathBuf::from("results"));
            let report = runner::run(&r, workers, &dir)?;
            print!(
                "{}",
                runner::format_summary(&report.outcome.summary, &report.outcome.checks)
            );
            for f in &report.files {
                println!("wrote {}", f.display());
            }
            Ok(if report.outcome.passed() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(2)
            })
        }
        Command::Verify {
            suite,
            workers,
            fixture_glauber_beta,
        } => {
            let suite: Suite = suite.parse().map_err(anyhow::Error::msg)?;
            let opts = verify::Options {
                glauber_beta: fixture_glauber_beta,
            };
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(workers.unwrap_or(0))
                .build()?;
            let (rows, table) = pool.install(|| verify::run_suite(suite, &opts));
            print!("{table}");
            Ok(if rows.iter().all(|r| r.passed) {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(2)
            })
        }
        Command::Sample {
            cfg,
            side,
            torus,
            replica,
            format,
            out,
        } => {
            let r = load(&cfg)?;
            if side == 0 {
                anyhow::bail!("--side must be positive");
            }
            let domain = if torus {
                SampleDomain::Torus { len: side }
            } else {
                SampleDomain::Cube { side: side - 1 }
            };
            let mut spec = SamplerSpec::new(r.model(), domain, r.config.seed);
            spec.replica = replica;
            spec.burn_in = r.config.sampler.burn_in;
            spec.allow_non_dobrushin = r.config.sampler.allow_non_dobrushin;
            let s = sample(&spec)?;
            for w in &s.meta.warnings {
                eprintln!("warning: {w}");
            }
            let text = match format {
                Format::Text => codec::configuration_to_text(&s.config),
                Format::Json => codec::configuration_to_json(&s.config) + "\n",
            };
            emit(out.as_deref(), &text)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Oracle {
            cfg,
            table,
            cap,
            out,
        } => {
            let r = load(&cfg)?;
            let model = r.model();
            let text = match table {
                Table::Summary => {
                    let p = pressure(model.interaction())?;
                    let mut doc = serde_json::json!({
                        "model": model.label(),
                        "pressure": p,
                        "entropy": entropy(&model)?,
                    });
                    if let Some(q) = r.model_q() {
                        doc["relative_entropy_q_p"] = relative_entropy(&q, &model)?.into();
                    }
                    if matches!(model.kind(), ModelKind::Iid { .. }) {
                        if let Some(&n) = r.config.n.first() {
                            doc["bad_pattern_mass"] = bad_pattern_mass(&model, n)?.into();
                        }
                    }
                    serde_json::to_string_pretty(&doc)? + "\n"
                }
                Table::Pattern => {
                    let n = *r
                        .config
                        .n
                        .first()
                        .context("`n` is required for the pattern table")?;
                    let d = model.dim();
                    let sites: Vec<LatticeVector> = Cube::at_origin(d, n).sites().collect();
                    let probs = marginal_table(&model, &sites, None)?;
                    let mut s = String::from("index,pattern,probability\n");
                    for (i, (a, p)) in Pattern::all(d, n, model.alphabet()).zip(&probs).enumerate()
                    {
                        let symbols: String = a
                            .values()
                            .iter()
                            .map(|v| v.to_string())
                            .collect::<Vec<_>>()
                            .join(" ");
                        s.push_str(&format!("{i},{symbols},{p}\n"));
                    }
                    s
                }
                Table::Hitting => {
                    let n = *r
                        .config
                        .n
                        .first()
                        .context("`n` is required for the hitting table")?;
                    let values = r
                        .config
                        .pattern
                        .clone()
                        .context("`pattern` is required for the hitting table")?;
                    let a = Pattern::new(model.dim(), n, model.alphabet(), values)?;
                    let t = brute_force_hitting_law(&model, &a, cap)?;
                    let mut buf = Vec::new();
                    t.write_csv(&mut buf)?;
                    String::from_utf8(buf)?
                }
            };
            emit(out.as_deref(), &text)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Dobrushin { cfg } => {
            let r = load(&cfg)?;
            let u = r.model().interaction().clone();
            let dob = check_dobrushin(&u)?;
            let ht = check_high_temperature(&u)?;
            println!(
                "dobrushin row sum      {:.6}  {}",
                dob.row_sum,
                if dob.satisfied {
                    "satisfied"
                } else {
                    "violated"
                }
            );
            for (y, g) in &dob.row {
                println!("  gamma(0, {y:?})  {g:.6}");
            }
            println!(
                "high-temperature sum   {:.6}  {}",
                ht.lhs,
                if ht.satisfied {
                    "satisfied"
                } else {
                    "violated"
                }
            );
            Ok(ExitCode::SUCCESS)
        }
    }
}
