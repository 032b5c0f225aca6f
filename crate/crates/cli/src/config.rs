//! Experiment configuration: a TOML file, optional `--set key.path=value`
//! overrides, and validation with line-anchored errors.

use std::path::PathBuf;

use gibbsfield::laws::CltStatistic;
use gibbsfield::model::{Model, ModelSpec};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("{origin}:{line}: {msg}")]
    AtLine {
        origin: String,
        line: usize,
        msg: String,
    },
    #[error("{origin}: {msg}")]
    Plain { origin: String, msg: String },
    #[error("bad override `{0}`: expected key.path=value")]
    Override(String),
    #[error("cannot read {path}: {source}")]
    Read {
        path: String,
        source: std::io::Error,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    Exponential,
    Repetition,
    Entropy,
    Waiting,
    Clt,
    Ldp,
    Rate,
    Lambda,
    HittingOracle,
    Factorization,
    StrongApproximation,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::Exponential => "exponential",
            Self::Repetition => "repetition",
            Self::Entropy => "entropy",
            Self::Waiting => "waiting",
            Self::Clt => "clt",
            Self::Ldp => "ldp",
            Self::Rate => "rate",
            Self::Lambda => "lambda",
            Self::HittingOracle => "hitting_oracle",
            Self::Factorization => "factorization",
            Self::StrongApproximation => "strong_approximation",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    pub seed: u64,
    pub dim: usize,
    /// Replica count `M`.
    #[serde(default = "defaults::replicas")]
    pub replicas: usize,
    /// Pattern sizes; single-size experiments use the first entry.
    #[serde(default)]
    pub n: Vec<usize>,
    /// Target pattern, row-major symbols on `C_n`; drawn from the model
    /// when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pattern: Option<Vec<u8>>,
    /// Independent patterns for `lambda` surveys.
    #[serde(default = "defaults::patterns")]
    pub patterns: usize,
    pub model: ModelSpec,
    /// The `Q` model of waiting-time experiments.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model_q: Option<ModelSpec>,
    #[serde(default)]
    pub sampler: SamplerConfig,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default)]
    pub limits: LimitsConfig,
    #[serde(default)]
    pub clt: CltConfig,
    #[serde(default)]
    pub factorization: FactorizationConfig,
    #[serde(default)]
    pub tolerance: ToleranceConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

mod defaults {
    pub fn replicas() -> usize {
        1000
    }
    pub fn patterns() -> usize {
        10
    }
    pub fn t_max() -> f64 {
        4.0
    }
    pub fn t_step() -> f64 {
        0.01
    }
    pub fn q() -> Vec<f64> {
        vec![-2.0, -1.5, -1.0, -0.5, 0.0, 0.5, 1.0, 1.5]
    }
    pub fn max_cap() -> usize {
        4096
    }
    pub fn gamma() -> f64 {
        0.5
    }
    pub fn z() -> f64 {
        1.96
    }
    pub fn eps() -> f64 {
        4.0
    }
    pub fn fd_step() -> f64 {
        0.05
    }
    pub fn max_residual() -> f64 {
        1e-3
    }
    pub fn side() -> usize {
        2
    }
    pub fn deltas() -> Vec<usize> {
        vec![1, 2, 4, 8]
    }
    pub fn cubes() -> usize {
        2
    }
    pub fn sigmas() -> f64 {
        4.0
    }
    pub fn standard_fact_max_n() -> usize {
        3
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplerConfig {
    /// Glauber burn-in sweeps; default `100 L^2`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub burn_in: Option<usize>,
    #[serde(default)]
    pub allow_non_dobrushin: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    #[serde(default = "defaults::t_max")]
    pub t_max: f64,
    #[serde(default = "defaults::t_step")]
    pub t_step: f64,
    #[serde(default = "defaults::q")]
    pub q: Vec<f64>,
    /// Rate-function abscissae; defaults to `s - 0.3 ..= s + 0.3`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub u: Option<Vec<f64>>,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            t_max: defaults::t_max(),
            t_step: defaults::t_step(),
            q: defaults::q(),
            u: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LimitsConfig {
    /// Largest window cap `K`.
    #[serde(default = "defaults::max_cap")]
    pub max_cap: usize,
    /// Fixed cap for experiments that take one (hitting oracle, log-time CLT).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cap: Option<usize>,
    /// Required `V_K Pr_typ` when planning caps.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cap_factor: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda_replicas: Option<usize>,
    #[serde(default = "defaults::gamma")]
    pub gamma: f64,
    /// Rescale with `lambda = 1` instead of the estimate.
    #[serde(default)]
    pub unit_lambda: bool,
    #[serde(default = "defaults::z")]
    pub z: f64,
    /// Strong-approximation window parameter.
    #[serde(default = "defaults::eps")]
    pub eps: f64,
    #[serde(default = "defaults::standard_fact_max_n")]
    pub standard_fact_max_n: usize,
}

impl Default for LimitsConfig {
    fn default() -> Self {
        Self {
            max_cap: defaults::max_cap(),
            cap: None,
            cap_factor: None,
            lambda_replicas: None,
            gamma: defaults::gamma(),
            unit_lambda: false,
            z: defaults::z(),
            eps: defaults::eps(),
            standard_fact_max_n: defaults::standard_fact_max_n(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CltConfig {
    pub statistic: CltStatistic,
    #[serde(default = "defaults::fd_step")]
    pub fd_step: f64,
    #[serde(default = "defaults::max_residual")]
    pub max_residual: f64,
}

impl Default for CltConfig {
    fn default() -> Self {
        Self {
            statistic: CltStatistic::Surprisal,
            fd_step: defaults::fd_step(),
            max_residual: defaults::max_residual(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FactorizationConfig {
    #[serde(default = "defaults::side")]
    pub side: usize,
    #[serde(default = "defaults::deltas")]
    pub deltas: Vec<usize>,
    #[serde(default = "defaults::cubes")]
    pub cubes: usize,
}

impl Default for FactorizationConfig {
    fn default() -> Self {
        Self {
            side: defaults::side(),
            deltas: defaults::deltas(),
            cubes: defaults::cubes(),
        }
    }
}

/// Pass/fail thresholds; an absent threshold is not checked.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ToleranceConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sup_gap: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub relative: Option<f64>,
    /// Standard errors allowed by the hitting-oracle comparison.
    #[serde(default = "defaults::sigmas")]
    pub sigmas: f64,
}

impl Default for ToleranceConfig {
    fn default() -> Self {
        Self {
            sup_gap: None,
            relative: None,
            sigmas: defaults::sigmas(),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dir: Option<PathBuf>,
    /// File stem; defaults to the experiment name.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
}

/// A validated configuration together with its canonical text.
#[derive(Clone, Debug)]
pub struct Resolved {
    pub config: ExperimentConfig,
    /// Canonical TOML of the resolved configuration.
    pub canonical: String,
    pub hash: String,
}

impl Resolved {
    pub fn model(&self) -> Model {
        self.config.model.build(self.config.dim).expect("validated")
    }

    pub fn model_q(&self) -> Option<Model> {
        self.config
            .model_q
            .as_ref()
            .map(|m| m.build(self.config.dim).expect("validated"))
    }

    /// First pattern size.
    pub fn n(&self) -> usize {
        self.config.n[0]
    }

    pub fn stem(&self) -> String {
        self.config
            .output
            .name
            .clone()
            .unwrap_or_else(|| self.config.experiment.name().to_string())
    }
}

pub fn load(path: &std::path::Path, overrides: &[String]) -> Result<Resolved, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
        path: path.display().to_string(),
        source,
    })?;
    parse(&text, &path.display().to_string(), overrides)
}

/// Parses `text`, applies the overrides and validates the result. Error
/// lines refer to `text` unless overrides were given, in which case they
/// refer to the merged document.
pub fn parse(text: &str, origin: &str, overrides: &[String]) -> Result<Resolved, ConfigError> {
    let (doc, origin) = if overrides.is_empty() {
        (text.to_string(), origin.to_string())
    } else {
        let mut table: toml::Table =
            toml::from_str(text).map_err(|e| toml_error(text, origin, &e))?;
        for o in overrides {
            apply_override(&mut table, o)?;
        }
        let merged = toml::to_string(&table).map_err(|e| ConfigError::Plain {
            origin: origin.to_string(),
            msg: e.to_string(),
        })?;
        (merged, format!("{origin} (with overrides)"))
    };
    let config: ExperimentConfig =
        toml::from_str(&doc).map_err(|e| toml_error(&doc, &origin, &e))?;
    validate(&config).map_err(|(key, msg)| match locate(&doc, &key) {
        Some(line) => ConfigError::AtLine {
            origin: origin.clone(),
            line,
            msg: format!("`{key}`: {msg}"),
        },
        None => ConfigError::Plain {
            origin: origin.clone(),
            msg: format!("`{key}`: {msg}"),
        },
    })?;
    let canonical = toml::to_string(&config).map_err(|e| ConfigError::Plain {
        origin: origin.clone(),
        msg: e.to_string(),
    })?;
    let hash = hex::encode(Sha256::digest(canonical.as_bytes()));
    Ok(Resolved {
        config,
        canonical,
        hash,
    })
}

fn toml_error(text: &str, origin: &str, e: &toml::de::Error) -> ConfigError {
    let msg = e.message().trim().to_string();
    match e.span() {
        Some(span) => ConfigError::AtLine {
            origin: origin.to_string(),
            line: unknown_key_line(text, span.start, &msg)
                .unwrap_or_else(|| line_of(text, span.start)),
            msg,
        },
        None => ConfigError::Plain {
            origin: origin.to_string(),
            msg,
        },
    }
}

/// Tagged tables report unknown fields at the table header; find the key's
/// own line after it instead.
fn unknown_key_line(text: &str, from: usize, msg: &str) -> Option<usize> {
    let key = msg.strip_prefix("unknown field `")?.split('`').next()?;
    let start = line_of(text, from);
    text.lines()
        .enumerate()
        .skip(start - 1)
        .take_while(|(i, l)| *i + 1 == start || !l.trim_start().starts_with('['))
        .find(|(_, l)| {
            l.split_once('=')
                .is_some_and(|(k, _)| k.trim().trim_matches('"') == key)
        })
        .map(|(i, _)| i + 1)
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

fn apply_override(table: &mut toml::Table, spec: &str) -> Result<(), ConfigError> {
    let (path, raw) = spec
        .split_once('=')
        .ok_or_else(|| ConfigError::Override(spec.into()))?;
    let keys: Vec<&str> = path.trim().split('.').collect();
    if keys.iter().any(|k| k.is_empty()) {
        return Err(ConfigError::Override(spec.into()));
    }
    // Values are TOML literals; anything that does not parse is a string.
    let value = toml::from_str::<toml::Table>(&format!("v = {}", raw.trim()))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.trim().to_string()));
    let mut cur = table;
    for k in &keys[..keys.len() - 1] {
        let entry = cur
            .entry(k.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = entry
            .as_table_mut()
            .ok_or_else(|| ConfigError::Override(spec.into()))?;
    }
    cur.insert(keys[keys.len() - 1].to_string(), value);
    Ok(())
}

/// Line of `dotted` in `text`: a `key = ...` line under the matching
/// table header, or the header itself.
fn locate(text: &str, dotted: &str) -> Option<usize> {
    let mut header = String::new();
    let mut header_line = None;
    for (i, line) in text.lines().enumerate() {
        let t = line.trim();
        if let Some(h) = t.strip_prefix('[').and_then(|h| h.strip_suffix(']')) {
            header = h.trim_matches(|c| c == '[' || c == ']').trim().to_string();
            if header == dotted {
                header_line = header_line.or(Some(i + 1));
            }
            continue;
        }
        if let Some((k, _)) = t.split_once('=') {
            let k = k.trim().trim_matches('"');
            let full = if header.is_empty() {
                k.to_string()
            } else {
                format!("{header}.{k}")
            };
            if full == dotted {
                return Some(i + 1);
            }
        }
    }
    header_line.or_else(|| {
        dotted
            .rsplit_once('.')
            .and_then(|(parent, _)| locate(text, parent))
    })
}

fn validate(c: &ExperimentConfig) -> Result<(), (String, String)> {
    let err = |k: &str, m: String| Err((k.to_string(), m));
    if !(1..=gibbsfield::lattice::MAX_DIM).contains(&c.dim) {
        return err("dim", format!("dimension {} is outside 1..=3", c.dim));
    }
    if c.replicas == 0 {
        return err("replicas", "need at least one replica".into());
    }
    if let Err(e) = c.model.build(c.dim) {
        return err("model", e.to_string());
    }
    if let Some(q) = &c.model_q {
        if let Err(e) = q.build(c.dim) {
            return err("model_q", e.to_string());
        }
    }
    use ExperimentKind as K;
    let needs_n = !matches!(c.experiment, K::Rate | K::Factorization);
    if needs_n && c.n.is_empty() {
        return err("n", "no pattern size given".into());
    }
    if c.experiment == K::Waiting && c.model_q.is_none() {
        return err("model_q", "waiting-time experiments need a Q model".into());
    }
    if let Some(p) = &c.pattern {
        let n = c.n.first().copied().unwrap_or(0);
        let want = (n + 1).pow(c.dim as u32);
        if p.len() != want {
            return err(
                "pattern",
                format!("{} symbols given, C_{n} has {want} sites", p.len()),
            );
        }
    }
    if c.experiment == K::Factorization && c.pattern.is_none() {
        return err(
            "pattern",
            "the factorization diagnostic needs a pattern".into(),
        );
    }
    if !(c.grid.t_step > 0.0 && c.grid.t_max > 0.0 && c.grid.t_step <= c.grid.t_max) {
        return err("grid.t_step", "need 0 < t_step <= t_max".into());
    }
    if c.grid.q.iter().any(|q| !q.is_finite()) {
        return err("grid.q", "non-finite grid point".into());
    }
    if c.limits.max_cap == 0 || c.limits.cap == Some(0) {
        return err("limits.max_cap", "caps must be positive".into());
    }
    if !(c.limits.gamma > 0.0 && c.limits.gamma < 1.0) {
        return err("limits.gamma", "need 0 < gamma < 1".into());
    }
    if c.limits.z <= 0.0 {
        return err("limits.z", "need z > 0".into());
    }
    if c.experiment == K::StrongApproximation && c.n.iter().any(|&n| n < 2) {
        return err(
            "n",
            "the strong-approximation window is empty for n < 2".into(),
        );
    }
    if c.experiment == K::Factorization
        && (c.factorization.deltas.contains(&0) || c.factorization.cubes == 0)
    {
        return err(
            "factorization.deltas",
            "separations and cube count must be positive".into(),
        );
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = "experiment = \"entropy\"\nseed = 3\ndim = 2\nreplicas = 10\nn = [1, 2]\n\n[model]\npreset = \"bernoulli\"\np = 0.7\n";

    #[test]
    fn parses_and_hashes_canonically() {
        let a = parse(BASE, "t.toml", &[]).unwrap();
        let b = parse(&BASE.replace("seed = 3", "seed   =   3"), "t.toml", &[]).unwrap();
        assert_eq!(a.hash, b.hash);
        assert_eq!(a.config.limits.max_cap, 4096);
        let c = parse(BASE, "t.toml", &["seed=4".into()]).unwrap();
        assert_ne!(a.hash, c.hash);
    }

    #[test]
    fn negative_replicas_name_the_line() {
        let e = parse(
            &BASE.replace("replicas = 10", "replicas = -5"),
            "t.toml",
            &[],
        )
        .unwrap_err();
        assert!(e.to_string().starts_with("t.toml:4:"), "{e}");
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let e = parse(&format!("{BASE}colour = 1\n"), "t.toml", &[]).unwrap_err();
        assert!(e.to_string().starts_with("t.toml:10:"), "{e}");
    }

    #[test]
    fn semantic_errors_are_anchored() {
        let e = parse(&BASE.replace("p = 0.7", "p = 1.7"), "t.toml", &[]).unwrap_err();
        assert!(e.to_string().starts_with("t.toml:7:"), "{e}");
        let e = parse(&format!("{BASE}\n[limits]\ngamma = 2.0\n"), "t.toml", &[]).unwrap_err();
        assert!(e.to_string().starts_with("t.toml:12:"), "{e}");
    }

    #[test]
    fn overrides_set_nested_keys() {
        let r = parse(
            BASE,
            "t.toml",
            &["limits.max_cap=64".into(), "model.p=0.6".into()],
        )
        .unwrap();
        assert_eq!(r.config.limits.max_cap, 64);
        assert_eq!(r.config.model, ModelSpec::Bernoulli { p: 0.6 });
        assert!(parse(BASE, "t.toml", &["novalue".into()]).is_err());
        assert!(parse(BASE, "t.toml", &["replicas=-1".into()]).is_err());
    }
}
