//! Entropy and relative entropy from the growth of repetition and waiting
//! times, and the strong-approximation window for repetition times.

use rayon::prelude::*;
use serde::Serialize;

use super::exponential::initial_patterns;
use super::field::{FieldGen, SearchTarget};
use super::{mean_ci, sites, Target, CENSORING_LIMIT};
use crate::error::{Error, Result};
use crate::exact::{entropy, relative_entropy};
use crate::rng::Purpose;
use crate::sampler::SampleMeta;
use crate::stats::{placement_volume, Hit};

#[derive(Clone, Debug)]
pub struct LogTimeParams {
    pub n_range: Vec<usize>,
    pub replicas: usize,
    /// Largest admissible window cap.
    pub max_cap: usize,
    /// A cap is feasible when `V_cap Pr_typ >= cap_factor` fits under
    /// `max_cap`, with `Pr_typ = exp(-target (n+1)^d)`.
    pub cap_factor: f64,
    pub z: f64,
}

impl LogTimeParams {
    pub fn new(n_range: Vec<usize>, replicas: usize) -> Self {
        Self {
            n_range,
            replicas,
            max_cap: 4096,
            cap_factor: 5.0,
            z: 1.96,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "snake_case", tag = "status", content = "reason")]
pub enum RowStatus {
    Ok,
    /// Censoring above the limit; the mean is biased low.
    Censored,
    /// The required cap exceeds the admissible one.
    Infeasible(String),
}

#[derive(Clone, Debug, Serialize)]
pub struct LogTimeRow {
    pub n: usize,
    pub cap: usize,
    /// Mean of `(d / (n+1)^d) log T` with censored draws at the cap.
    pub mean: f64,
    pub ci: f64,
    pub censored_fraction: f64,
    pub relative_error: f64,
    pub status: RowStatus,
}

#[derive(Clone, Debug, Serialize)]
pub struct LogTimeResult {
    pub kind: String,
    pub target: Target,
    pub rows: Vec<LogTimeRow>,
    pub largest_feasible_n: Option<usize>,
    /// Whether `|mean - target|` shrinks along the feasible rows.
    pub trend_monotone: bool,
    pub sampler: SampleMeta,
}

impl LogTimeResult {
    pub fn row(&self, n: usize) -> Option<&LogTimeRow> {
        self.rows.iter().find(|r| r.n == n)
    }

    pub fn largest_feasible(&self) -> Option<&LogTimeRow> {
        self.largest_feasible_n.and_then(|n| self.row(n))
    }
}

/// Cap for rate `h`: `(required, cap)`, or the reason it is infeasible.
fn plan_cap(d: usize, n: usize, h: f64, p: &LogTimeParams) -> std::result::Result<usize, String> {
    let pr_typ = (-h * sites(d, n)).exp();
    let mut k = 1usize;
    while placement_volume(d, k) * pr_typ < p.cap_factor {
        k += 1;
        if k > p.max_cap {
            return Err(format!(
                "typical time needs a cap above {} (target rate {h:.4}, (n+1)^d = {})",
                p.max_cap,
                sites(d, n)
            ));
        }
    }
    Ok((8 * k).max(16).min(p.max_cap))
}

fn summarize(d: usize, n: usize, cap: usize, hits: &[Hit], target: f64, z: f64) -> LogTimeRow {
    let norm = d as f64 / sites(d, n);
    let xs: Vec<f64> = hits
        .iter()
        .map(|h| norm * (h.capped() as f64).ln())
        .collect();
    let (mean, ci) = mean_ci(&xs, z);
    let censored_fraction =
        hits.iter().filter(|h| h.is_censored()).count() as f64 / hits.len() as f64;
    LogTimeRow {
        n,
        cap,
        mean,
        ci,
        censored_fraction,
        relative_error: if target != 0.0 {
            (mean - target).abs() / target.abs()
        } else {
            mean.abs()
        },
        status: if censored_fraction > CENSORING_LIMIT {
            RowStatus::Censored
        } else {
            RowStatus::Ok
        },
    }
}

fn finish(
    kind: &str,
    target: Target,
    rows: Vec<LogTimeRow>,
    sampler: SampleMeta,
) -> Result<LogTimeResult> {
    let ok: Vec<&LogTimeRow> = rows.iter().filter(|r| r.status == RowStatus::Ok).collect();
    if ok.is_empty() {
        let reasons: Vec<String> = rows
            .iter()
            .map(|r| match &r.status {
                RowStatus::Infeasible(why) => format!("n={}: {why}", r.n),
                s => format!("n={}: {s:?}", r.n),
            })
            .collect();
        return Err(Error::DomainTooSmall(format!(
            "no feasible n: {}",
            reasons.join("; ")
        )));
    }
    let trend_monotone = ok
        .windows(2)
        .all(|w| (w[1].mean - target.value).abs() <= (w[0].mean - target.value).abs());
    Ok(LogTimeResult {
        kind: kind.into(),
        largest_feasible_n: ok.iter().map(|r| r.n).max(),
        target,
        rows,
        trend_monotone,
        sampler,
    })
}

fn infeasible(n: usize, why: String) -> LogTimeRow {
    LogTimeRow {
        n,
        cap: 0,
        mean: f64::NAN,
        ci: f64::NAN,
        censored_fraction: f64::NAN,
        relative_error: f64::NAN,
        status: RowStatus::Infeasible(why),
    }
}

/// Per-`n` means of `(d / (n+1)^d) log R_n` against the entropy.
pub fn entropy_via_repetition(gen: &FieldGen, p: &LogTimeParams) -> Result<LogTimeResult> {
    let d = gen.dim();
    let h = entropy(&gen.model)?;
    let target = Target::new("entropy", h, "exact-engine: entropy");
    let mut rows = Vec::new();
    let mut last_cap = 1;
    for &n in &p.n_range {
        let cap = match plan_cap(d, n, h, p) {
            Ok(c) => c,
            Err(why) => {
                rows.push(infeasible(n, why));
                continue;
            }
        };
        last_cap = cap;
        let hits: Vec<Hit> = (0..p.replicas as u64)
            .into_par_iter()
            .map(|r| gen.hit(r, SearchTarget::Own(n), cap).map(|(h, _)| h))
            .collect::<Result<_>>()?;
        rows.push(summarize(d, n, cap, &hits, h, p.z));
    }
    let meta = gen.meta(p.n_range.iter().copied().max().unwrap_or(0), last_cap)?;
    finish("entropy_via_repetition", target, rows, meta)
}

/// Per-`n` means of `(d / (n+1)^d) log W_n(xi, sigma)` with `xi ~ Q` and
/// `sigma ~ P` against `s(Q) + s(Q | P)`.
pub fn waiting_time_experiment(
    q_gen: &FieldGen,
    p_gen: &FieldGen,
    p: &LogTimeParams,
) -> Result<LogTimeResult> {
    let d = q_gen.dim();
    if p_gen.dim() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: p_gen.dim(),
        });
    }
    let q_gen = q_gen.clone().with_purpose(Purpose::FieldQ);
    let p_gen = p_gen.clone().with_purpose(Purpose::FieldP);
    let s_q = entropy(&q_gen.model)?;
    let rel = relative_entropy(&q_gen.model, &p_gen.model)?;
    let target = Target::new(
        "cross_entropy",
        s_q + rel,
        format!("exact-engine: s(Q) = {s_q} plus s(Q|P) = {rel}"),
    );
    let mut rows = Vec::new();
    let mut last_cap = 1;
    for &n in &p.n_range {
        let cap = match plan_cap(d, n, target.value, p) {
            Ok(c) => c,
            Err(why) => {
                rows.push(infeasible(n, why));
                continue;
            }
        };
        last_cap = cap;
        let hits: Vec<Hit> = (0..p.replicas as u64)
            .into_par_iter()
            .map(|r| {
                let a = q_gen.window(r, n)?.initial_pattern(n)?;
                p_gen.hit(r, SearchTarget::Pattern(&a), cap).map(|(h, _)| h)
            })
            .collect::<Result<_>>()?;
        rows.push(summarize(d, n, cap, &hits, target.value, p.z));
    }
    let meta = p_gen.meta(p.n_range.iter().copied().max().unwrap_or(0), last_cap)?;
    finish("waiting_time", target, rows, meta)
}

#[derive(Clone, Debug, Serialize)]
pub struct StrongApproximationRow {
    pub n: usize,
    /// `[-eps log n, log(eps log n)]`.
    pub window: (f64, f64),
    pub inside_fraction: f64,
    pub censored_fraction: f64,
}

/// Fraction of replicas with `log(R_n^d Pr(sigma_{C_n}))` inside the
/// strong-approximation window, for each `n >= 2`.
pub fn strong_approximation(
    gen: &FieldGen,
    n_range: &[usize],
    replicas: usize,
    eps: f64,
    max_cap: usize,
) -> Result<Vec<StrongApproximationRow>> {
    let d = gen.dim();
    n_range
        .iter()
        .map(|&n| {
            if n < 2 {
                return Err(Error::OutOfDomain("the window is empty for n < 2".into()));
            }
            let ln = (n as f64).ln();
            let window = (-eps * ln, (eps * ln).ln());
            let pats = initial_patterns(gen, n, 0..replicas as u64)?;
            let out: Vec<(bool, bool)> = pats
                .par_iter()
                .enumerate()
                .map(|(r, (_, pr))| {
                    // Cap where the upper edge of the window is certainly passed.
                    let reach = (window.1.exp() / pr).powf(1.0 / d as f64).ceil() as usize + 1;
                    let cap = reach.min(max_cap);
                    let (h, _) = gen.hit(r as u64, SearchTarget::Own(n), cap)?;
                    let v = d as f64 * (h.capped() as f64).ln() + pr.ln();
                    let inside = !h.is_censored() && v >= window.0 && v <= window.1;
                    Ok((inside, h.is_censored() && cap < reach))
                })
                .collect::<Result<_>>()?;
            let m = replicas as f64;
            Ok(StrongApproximationRow {
                n,
                window,
                inside_fraction: out.iter().filter(|o| o.0).count() as f64 / m,
                censored_fraction: out.iter().filter(|o| o.1).count() as f64 / m,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Model;

    #[test]
    fn single_symbol_field_has_zero_entropy_estimate() {
        let gen = FieldGen::new(Model::iid(2, &[1.0]).unwrap(), 0);
        let r = entropy_via_repetition(&gen, &LogTimeParams::new(vec![1, 2, 3], 20)).unwrap();
        for row in &r.rows {
            assert_eq!(row.mean, 0.0);
            assert_eq!(row.status, RowStatus::Ok);
        }
        assert_eq!(r.target.value, 0.0);
    }

    #[test]
    fn infeasible_sizes_are_reported() {
        let gen = FieldGen::new(Model::bernoulli(2, 0.5).unwrap(), 0);
        let mut p = LogTimeParams::new(vec![1, 9], 50);
        p.max_cap = 64;
        let r = entropy_via_repetition(&gen, &p).unwrap();
        assert_eq!(r.largest_feasible_n, Some(1));
        assert!(matches!(r.rows[1].status, RowStatus::Infeasible(_)));
        p.n_range = vec![9];
        assert!(entropy_via_repetition(&gen, &p).is_err());
    }

    #[test]
    fn equal_models_target_the_entropy() {
        let m = Model::bernoulli(2, 0.5).unwrap();
        let gen = FieldGen::new(m, 1);
        let r = waiting_time_experiment(&gen, &gen, &LogTimeParams::new(vec![1], 200)).unwrap();
        assert!((r.target.value - 2f64.ln()).abs() < 1e-12);
        assert_eq!(r.rows[0].status, RowStatus::Ok);
    }
}
