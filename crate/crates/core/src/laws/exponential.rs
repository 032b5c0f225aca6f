//! Exponential approximation of hitting and repetition times, the
//! Monte Carlo check against the exact hitting law, `lambda` surveys and
//! the factorization diagnostic.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::Serialize;

use super::field::{FieldGen, HitRecord, SearchTarget};
use super::survival::{Interval, SurvivalCurve};
use super::Target;
use crate::error::{Error, Result};
use crate::exact::{
    bad_pattern_mass, brute_force_hitting_law, exact_pattern_probability, HittingLawTable,
};
use crate::lattice::{Cube, LatticeVector, Pattern};
use crate::model::ModelKind;
use crate::rng::Purpose;
use crate::sampler::SampleMeta;
use crate::stats::{
    default_scale, factorization_diagnostic, is_badly_self_repeating, lambda_estimate,
    placement_volume, scale_for, Factorization, Hit, LambdaEstimate,
};

#[derive(Clone, Debug, Serialize)]
pub struct LambdaInfo {
    pub value: f64,
    /// `lambda = 1` was imposed instead of estimated.
    pub unit: bool,
    pub estimate: Option<LambdaEstimate>,
}

/// `Pr(A)` with its provenance.
pub fn pattern_probability_target(gen: &FieldGen, a: &Pattern) -> Result<Target> {
    let p = exact_pattern_probability(&gen.model, a, None)?;
    Ok(Target::new(
        "pattern_probability",
        p.value,
        format!("exact-engine: {}", p.method),
    ))
}

/// Runs `replicas` capped searches in parallel, in replica order.
fn hits(
    gen: &FieldGen,
    target: SearchTarget<'_>,
    cap: usize,
    replicas: std::ops::Range<u64>,
) -> Result<Vec<Hit>> {
    replicas
        .into_par_iter()
        .map(|r| gen.hit(r, target, cap).map(|(h, _)| h))
        .collect()
}

/// `lambda_{A,t}` at `t = f_A = floor(Pr(A)^-gamma)` from `replicas`
/// separate replicas, starting at replica `offset`.
pub fn estimate_lambda(
    gen: &FieldGen,
    a: &Pattern,
    pattern_probability: f64,
    replicas: usize,
    gamma: f64,
    offset: u64,
) -> Result<LambdaEstimate> {
    let d = gen.dim();
    let t = default_scale(pattern_probability, gamma);
    let k = scale_for(d, t);
    if k == 0 {
        return Err(Error::Uninformative(format!("t = {t} covers no placement")));
    }
    let g = gen.clone().with_purpose(Purpose::Lambda);
    let h = hits(
        &g,
        SearchTarget::Pattern(a),
        k,
        offset..offset + replicas as u64,
    )?;
    let alive = h.iter().filter(|h| h.is_censored()).count() as f64 / replicas as f64;
    lambda_estimate(d, t, pattern_probability, |_| alive)
}

#[derive(Clone, Debug)]
pub struct ExponentialParams {
    pub gen: FieldGen,
    pub pattern: Pattern,
    pub replicas: usize,
    pub lambda_replicas: usize,
    pub gamma: f64,
    pub t_max: f64,
    pub t_step: f64,
    pub unit_lambda: bool,
    /// Largest admissible window cap.
    pub max_cap: usize,
    pub z: f64,
}

impl ExponentialParams {
    pub fn new(gen: FieldGen, pattern: Pattern, replicas: usize) -> Self {
        Self {
            gen,
            pattern,
            replicas,
            lambda_replicas: 4 * replicas,
            gamma: 0.5,
            t_max: 4.0,
            t_step: 0.01,
            unit_lambda: false,
            max_cap: 4096,
            z: 1.96,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ExponentialResult {
    pub pattern_hash: String,
    pub n: usize,
    pub pattern_probability: Target,
    pub lambda: LambdaInfo,
    pub cap: usize,
    pub curve: SurvivalCurve,
    pub sup_gap: f64,
    pub sup_gap_t: f64,
    /// Confidence half-width of the curve where the sup-gap is attained.
    pub sup_gap_ci: f64,
    pub sampler: SampleMeta,
    #[serde(skip)]
    pub records: Vec<HitRecord>,
}

/// Smallest cap whose rescaled time reaches `t_end`.
fn cap_for(d: usize, scale: f64, t_end: f64, max_cap: usize) -> Result<usize> {
    let mut k = 1;
    while scale * placement_volume(d, k) < t_end {
        k += 1;
        if k > max_cap {
            return Err(Error::DomainTooSmall(format!(
                "rescaled time {t_end} needs a window cap above {max_cap}"
            )));
        }
    }
    Ok(k)
}

fn interval(d: usize, scale: f64, hit: Hit) -> Interval {
    match hit {
        Hit::Found(k) => Interval {
            lo: scale * placement_volume(d, k - 1),
            hi: scale * placement_volume(d, k),
            censored: false,
        },
        Hit::Censored(k) => Interval {
            lo: scale * placement_volume(d, k),
            hi: f64::INFINITY,
            censored: true,
        },
    }
}

/// Survival of `lambda Pr(A) V_{tau_A}` against `exp(-t)` for one pattern.
pub fn exponential_law_experiment(p: &ExponentialParams) -> Result<ExponentialResult> {
    let d = p.gen.dim();
    let a = &p.pattern;
    let pr = pattern_probability_target(&p.gen, a)?;
    let lambda = if p.unit_lambda {
        LambdaInfo {
            value: 1.0,
            unit: true,
            estimate: None,
        }
    } else {
        let e = estimate_lambda(&p.gen, a, pr.value, p.lambda_replicas, p.gamma, 0)?;
        LambdaInfo {
            value: e.lambda,
            unit: false,
            estimate: Some(e),
        }
    };
    let scale = lambda.value * pr.value;
    let cap = cap_for(d, scale, p.t_max + 1.0, p.max_cap)?;
    let h = hits(&p.gen, SearchTarget::Pattern(a), cap, 0..p.replicas as u64)?;
    let records: Vec<HitRecord> = h
        .iter()
        .enumerate()
        .map(|(r, &hit)| HitRecord::new(r as u64, a, hit, cap))
        .collect();
    let iv: Vec<Interval> = h.iter().map(|&hit| interval(d, scale, hit)).collect();
    let mut curve = SurvivalCurve::from_intervals(&iv, p.t_max, p.t_step, p.z);
    curve.lambda = lambda.value;
    curve.pattern_probability = pr.value;
    let (sup_gap, j) = curve.sup_gap();
    Ok(ExponentialResult {
        pattern_hash: a.hash_hex(),
        n: a.side(),
        pattern_probability: pr,
        lambda,
        cap,
        sup_gap,
        sup_gap_t: curve.t[j],
        sup_gap_ci: curve.ci[j],
        curve,
        sampler: p.gen.meta(a.side(), cap)?,
        records,
    })
}

#[derive(Clone, Debug)]
pub struct RepetitionParams {
    pub gen: FieldGen,
    pub n: usize,
    pub replicas: usize,
    pub lambda_replicas: usize,
    pub gamma: f64,
    pub t_max: f64,
    pub t_step: f64,
    pub unit_lambda: bool,
    pub max_cap: usize,
    pub z: f64,
}

impl RepetitionParams {
    pub fn new(gen: FieldGen, n: usize, replicas: usize) -> Self {
        Self {
            gen,
            n,
            replicas,
            lambda_replicas: 4 * replicas,
            gamma: 0.5,
            t_max: 4.0,
            t_step: 0.01,
            unit_lambda: false,
            max_cap: 4096,
            z: 1.96,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct RepetitionResult {
    pub n: usize,
    pub lambda: LambdaInfo,
    pub curve: SurvivalCurve,
    pub sup_gap: f64,
    pub sup_gap_t: f64,
    pub sup_gap_ci: f64,
    pub bad_count: usize,
    pub bad_fraction: f64,
    /// Exact `Pr(B_n)` when it can be enumerated.
    pub bad_mass: Option<Target>,
    pub sampler: SampleMeta,
    #[serde(skip)]
    pub records: Vec<HitRecord>,
}

/// Initial patterns of replicas `range` and their exact probabilities.
pub(super) fn initial_patterns(
    gen: &FieldGen,
    n: usize,
    range: std::ops::Range<u64>,
) -> Result<Vec<(Pattern, f64)>> {
    let patterns: Vec<Pattern> = range
        .into_par_iter()
        .map(|r| gen.window(r, n)?.initial_pattern(n))
        .collect::<Result<_>>()?;
    let mut probs: BTreeMap<Vec<u8>, f64> = BTreeMap::new();
    for a in &patterns {
        if !probs.contains_key(a.values()) {
            let v = exact_pattern_probability(&gen.model, a, None)?.value;
            probs.insert(a.values().to_vec(), v);
        }
    }
    Ok(patterns
        .into_iter()
        .map(|a| {
            let p = probs[a.values()];
            (a, p)
        })
        .collect())
}

/// Survival of the rescaled repetition time `lambda Pr(sigma_{C_n}) V_{R_n}`
/// given a good initial pattern.
///
/// `lambda` is pooled over the good patterns of separate replicas:
/// `-log(frac{R_n > k_i}) / mean_i(V_{k_i} Pr(A_i))` with
/// `k_i = scale_for(f_{A_i})`; it reduces to `lambda_estimate` when every
/// pattern has the same probability.
pub fn repetition_law_experiment(p: &RepetitionParams) -> Result<RepetitionResult> {
    let d = p.gen.dim();
    let n = p.n;
    let lambda = if p.unit_lambda {
        LambdaInfo {
            value: 1.0,
            unit: true,
            estimate: None,
        }
    } else {
        let g = p.gen.clone().with_purpose(Purpose::Lambda);
        let pats = initial_patterns(&g, n, 0..p.lambda_replicas as u64)?;
        let good: Vec<(u64, usize, f64)> = pats
            .iter()
            .enumerate()
            .filter(|(_, (a, _))| !is_badly_self_repeating(a))
            .map(|(r, (_, pr))| (r as u64, scale_for(d, default_scale(*pr, p.gamma)), *pr))
            .collect();
        if good.is_empty() {
            return Err(Error::Uninformative(
                "every lambda replica drew a bad pattern".into(),
            ));
        }
        if good.iter().any(|g| g.1 == 0) {
            return Err(Error::Uninformative(
                "pattern scale covers no placement".into(),
            ));
        }
        let alive: Vec<bool> = good
            .par_iter()
            .map(|&(r, k, _)| {
                g.hit(r, SearchTarget::Own(n), k)
                    .map(|(h, _)| h.is_censored())
            })
            .collect::<Result<_>>()?;
        let surv = alive.iter().filter(|&&b| b).count() as f64 / good.len() as f64;
        let exposure = good
            .iter()
            .map(|&(_, k, pr)| placement_volume(d, k) * pr)
            .sum::<f64>()
            / good.len() as f64;
        if !(surv > 0.0 && surv < 1.0) {
            return Err(Error::Uninformative(format!("pooled survival {surv}")));
        }
        let t = good
            .iter()
            .map(|&(_, _, pr)| default_scale(pr, p.gamma))
            .sum::<f64>()
            / good.len() as f64;
        let k =
            (good.iter().map(|g| g.1).sum::<usize>() as f64 / good.len() as f64).round() as usize;
        let value = -surv.ln() / exposure;
        LambdaInfo {
            value,
            unit: false,
            estimate: Some(LambdaEstimate {
                lambda: value,
                t,
                k,
                survival: surv,
                pattern_probability: exposure / placement_volume(d, k.max(1)),
            }),
        }
    };

    let pats = initial_patterns(&p.gen, n, 0..p.replicas as u64)?;
    let bad: Vec<bool> = pats
        .iter()
        .map(|(a, _)| is_badly_self_repeating(a))
        .collect();
    let bad_count = bad.iter().filter(|&&b| b).count();
    if bad_count == p.replicas {
        return Err(Error::Uninformative(
            "every replica drew a bad pattern".into(),
        ));
    }
    let caps: Vec<Option<usize>> = pats
        .iter()
        .zip(&bad)
        .map(|((_, pr), &b)| {
            if b {
                Ok(None)
            } else {
                cap_for(d, lambda.value * pr, p.t_max + 1.0, p.max_cap).map(Some)
            }
        })
        .collect::<Result<_>>()?;
    let found: Vec<Option<Hit>> = caps
        .par_iter()
        .enumerate()
        .map(|(r, cap)| match cap {
            Some(c) => p
                .gen
                .hit(r as u64, SearchTarget::Own(n), *c)
                .map(|(h, _)| Some(h)),
            None => Ok(None),
        })
        .collect::<Result<_>>()?;
    let mut iv = Vec::new();
    let mut records = Vec::new();
    for (r, h) in found.iter().enumerate() {
        if let (Some(h), Some(cap)) = (h, caps[r]) {
            iv.push(interval(d, lambda.value * pats[r].1, *h));
            records.push(HitRecord::new(r as u64, &pats[r].0, *h, cap));
        }
    }
    let mut curve = SurvivalCurve::from_intervals(&iv, p.t_max, p.t_step, p.z);
    curve.lambda = lambda.value;
    let good_pr: Vec<f64> = pats
        .iter()
        .zip(&bad)
        .filter(|(_, &b)| !b)
        .map(|((_, pr), _)| *pr)
        .collect();
    curve.pattern_probability = good_pr.iter().sum::<f64>() / good_pr.len() as f64;
    let (sup_gap, j) = curve.sup_gap();
    let max_cap = caps.iter().flatten().copied().max().unwrap_or(1);
    let q = p.gen.model.alphabet() as f64;
    let bad_mass = match p.gen.model.kind() {
        ModelKind::Iid { .. }
            if q.powi(((n + 1) as i32).pow(d as u32)) <= crate::exact::ENUMERATION_BUDGET =>
        {
            Some(Target::new(
                "bad_pattern_mass",
                bad_pattern_mass(&p.gen.model, n)?,
                "exact-engine: pattern enumeration",
            ))
        }
        _ => None,
    };
    Ok(RepetitionResult {
        n,
        lambda,
        sup_gap,
        sup_gap_t: curve.t[j],
        sup_gap_ci: curve.ci[j],
        curve,
        bad_count,
        bad_fraction: bad_count as f64 / p.replicas as f64,
        bad_mass,
        sampler: p.gen.meta(n, max_cap)?,
        records,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct OracleRow {
    pub k: usize,
    pub monte_carlo: f64,
    pub exact: f64,
    /// Binomial standard error at the exact probability.
    pub se: f64,
    pub within: bool,
}

/// Monte Carlo `Pr(tau_A <= k)` against the exhaustive hitting law, with
/// agreement required within `sigmas` binomial standard errors.
pub fn hitting_oracle_comparison(
    gen: &FieldGen,
    a: &Pattern,
    cap: usize,
    replicas: usize,
    sigmas: f64,
) -> Result<(Vec<OracleRow>, HittingLawTable)> {
    let table = brute_force_hitting_law(&gen.model, a, cap)?;
    let h = hits(gen, SearchTarget::Pattern(a), cap, 0..replicas as u64)?;
    let m = replicas as f64;
    let rows = (0..=cap)
        .map(|k| {
            let mc = h
                .iter()
                .filter(|h| h.value().is_some_and(|v| v <= k))
                .count() as f64
                / m;
            let exact = table.cdf[k];
            let se = (exact * (1.0 - exact) / m).sqrt();
            OracleRow {
                k,
                monte_carlo: mc,
                exact,
                se,
                within: (mc - exact).abs() <= sigmas * se + 1e-15,
            }
        })
        .collect();
    Ok((rows, table))
}

#[derive(Clone, Debug, Serialize)]
pub struct LambdaSurveyRow {
    pub pattern_hash: String,
    pub n: usize,
    pub pattern_probability: f64,
    pub estimate: LambdaEstimate,
}

/// `lambda` for each pattern from its own block of replicas.
pub fn lambda_survey(
    gen: &FieldGen,
    patterns: &[Pattern],
    replicas: usize,
    gamma: f64,
) -> Result<Vec<LambdaSurveyRow>> {
    patterns
        .iter()
        .enumerate()
        .map(|(j, a)| {
            let pr = pattern_probability_target(gen, a)?.value;
            let estimate = estimate_lambda(gen, a, pr, replicas, gamma, (j * replicas) as u64)?;
            Ok(LambdaSurveyRow {
                pattern_hash: a.hash_hex(),
                n: a.side(),
                pattern_probability: pr,
                estimate,
            })
        })
        .collect()
}

#[derive(Clone, Debug)]
pub struct FactorizationParams {
    pub gen: FieldGen,
    pub pattern: Pattern,
    /// Side of each test cube.
    pub side: usize,
    pub deltas: Vec<usize>,
    pub k: usize,
    pub replicas: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct FactorizationRow {
    pub delta: usize,
    pub result: Factorization,
}

#[derive(Clone, Debug, Serialize)]
pub struct FactorizationResult {
    pub rows: Vec<FactorizationRow>,
    /// Whether the gap decreases in `delta` between every pair of
    /// consecutive rows whose intervals separate.
    pub monotone_where_separated: bool,
    pub separated_pairs: usize,
    pub sampler: SampleMeta,
}

/// `k` cubes of side `side` along axis 0 at pairwise distance `delta`.
pub fn factorization_cubes(d: usize, side: usize, delta: usize, k: usize) -> Vec<Cube> {
    (0..k)
        .map(|i| {
            let mut origin = LatticeVector::zero(d);
            origin.set(0, (i * (side + delta)) as i64);
            Cube::new(origin, side)
        })
        .collect()
}

/// `Pr(A absent from k separated cubes)` against `Pr(A absent from one)^k`
/// for each separation.
pub fn factorization_experiment(p: &FactorizationParams) -> Result<FactorizationResult> {
    let d = p.gen.dim();
    if p.deltas.contains(&0) || p.k == 0 {
        return Err(Error::OutOfDomain(
            "separations and cube count must be positive".into(),
        ));
    }
    let span = p.k * (p.side + p.deltas.iter().copied().max().unwrap_or(1));
    let samples = (0..p.replicas as u64)
        .into_par_iter()
        .map(|r| p.gen.window(r, span))
        .collect::<Result<Vec<_>>>()?;
    let rows: Vec<FactorizationRow> = p
        .deltas
        .iter()
        .map(|&delta| {
            let cubes = factorization_cubes(d, p.side, delta, p.k);
            Ok(FactorizationRow {
                delta,
                result: factorization_diagnostic(&p.pattern, &samples, &cubes)?,
            })
        })
        .collect::<Result<_>>()?;
    let mut separated_pairs = 0;
    let mut monotone = true;
    for w in rows.windows(2) {
        let (a, b) = (&w[0].result, &w[1].result);
        if (a.gap - b.gap).abs() > a.ci + b.ci {
            separated_pairs += 1;
            monotone &= b.gap < a.gap;
        }
    }
    Ok(FactorizationResult {
        rows,
        monotone_where_separated: monotone,
        separated_pairs,
        sampler: p.gen.meta(0, span)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Model;

    #[test]
    fn cubes_are_at_the_requested_distance() {
        let c = factorization_cubes(2, 3, 2, 3);
        assert_eq!(c[0].distance(&c[1]), 2);
        assert_eq!(c[0].distance(&c[2]), 7);
    }

    #[test]
    fn survival_starts_at_one_and_decreases() {
        let gen = FieldGen::new(Model::bernoulli(2, 0.5).unwrap(), 5);
        let a = Pattern::new(2, 1, 2, vec![1, 0, 0, 0]).unwrap();
        let mut p = ExponentialParams::new(gen, a, 400);
        p.t_step = 0.05;
        let r = exponential_law_experiment(&p).unwrap();
        assert_eq!(r.curve.s[0], 1.0);
        assert!(r.curve.is_monotone());
        assert!(r.lambda.value > 0.0 && r.lambda.value <= 2.1);
        assert_eq!(r.records.len(), 400);
    }

    #[test]
    fn single_cube_factorizes_exactly() {
        let gen = FieldGen::new(Model::bernoulli(2, 0.5).unwrap(), 2);
        let p = FactorizationParams {
            gen,
            pattern: Pattern::constant(2, 1, 2, 1).unwrap(),
            side: 3,
            deltas: vec![1, 2],
            k: 1,
            replicas: 200,
        };
        let r = factorization_experiment(&p).unwrap();
        assert!(r.rows.iter().all(|row| row.result.gap == 0.0));
    }

    #[test]
    fn oracle_comparison_small() {
        let gen = FieldGen::new(Model::bernoulli(2, 0.5).unwrap(), 9);
        let a = Pattern::new(2, 1, 2, vec![0, 1, 1, 0]).unwrap();
        let (rows, _) = hitting_oracle_comparison(&gen, &a, 2, 4000, 4.0).unwrap();
        assert_eq!(rows[0].monte_carlo, 0.0);
        assert!(rows.iter().all(|r| r.within));
    }
}
