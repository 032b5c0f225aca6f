//! Large deviations: the empirical cumulant of log waiting times against
//! its pressure formula, and the rate functions obtained by Legendre
//! transform.

use std::cell::RefCell;

use rayon::prelude::*;
use serde::Serialize;

use super::field::{FieldGen, SearchTarget};
use super::{sites, Target};
use crate::error::{Error, Result};
use crate::exact::{entropy, marginal_table, pressure, pressure_scaled, ENUMERATION_BUDGET};
use crate::lattice::{Cube, LatticeVector};
use crate::model::{Model, ModelKind};
use crate::numerics::{compensated_sum, golden_max, logsumexp};
use crate::rng::Purpose;
use crate::sampler::SampleMeta;
use crate::stats::placement_volume;

/// The predicted cumulant `W(q)` for `xi ~ Q`, `sigma ~ P`.
///
/// With `Q = P` (interaction `U`) it is `P((1-q)U) + (q-1)P(U)` for
/// `q >= -1` and `P(2U) - 2P(U)` below. For an iid or Markov-product `Q`
/// with interaction `V` it is `P(V - qU) - P(V) + qP(V)` for `q >= -1`
/// and is not predicted below.
pub fn predicted_cumulant(q_model: &Model, p_model: &Model, q: f64) -> Result<Option<f64>> {
    let u = p_model.interaction();
    if q_model == p_model {
        let pu = pressure(u)?.value;
        return Ok(Some(if q >= -1.0 {
            pressure_scaled(u, 1.0 - q)? + (q - 1.0) * pu
        } else {
            pressure_scaled(u, 2.0)? - 2.0 * pu
        }));
    }
    if !matches!(
        q_model.kind(),
        ModelKind::Iid { .. } | ModelKind::MarkovProduct { .. }
    ) {
        return Err(Error::Unsupported(
            "cumulant prediction for distinct models needs an iid or Markov-product Q".into(),
        ));
    }
    if q < -1.0 {
        return Ok(None);
    }
    let v = q_model.interaction();
    let pv = pressure(v)?.value;
    Ok(Some(pressure(&v.plus(&u.scaled(-q))?)?.value - pv + q * pv))
}

#[derive(Clone, Debug)]
pub struct CumulantParams {
    pub q_gen: FieldGen,
    pub p_gen: FieldGen,
    pub n_range: Vec<usize>,
    pub q_grid: Vec<f64>,
    pub replicas: usize,
    pub max_cap: usize,
    /// Cap targets `V_cap Pr_typ >= cap_factor`.
    pub cap_factor: f64,
    /// Largest `n` for the exact pattern-sum check.
    pub standard_fact_max_n: usize,
    pub z: f64,
}

impl CumulantParams {
    pub fn new(q_gen: FieldGen, p_gen: FieldGen, n_range: Vec<usize>, replicas: usize) -> Self {
        Self {
            q_gen,
            p_gen,
            n_range,
            q_grid: vec![-2.0, -1.5, -1.0, -0.5, 0.0, 0.5, 1.0, 1.5],
            replicas,
            max_cap: 4096,
            cap_factor: 50.0,
            standard_fact_max_n: 3,
            z: 1.96,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct CumulantRow {
    pub n: usize,
    pub cap: usize,
    /// `(1/(n+1)^d) log mean W_n^{qd}` per grid point.
    pub w_hat: Vec<f64>,
    pub ci: Vec<f64>,
    pub gap: Vec<Option<f64>>,
    pub relative_gap: Vec<Option<f64>>,
    pub censored_fraction: f64,
    /// `w_hat` is nondecreasing over the grid points with `q >= 0`.
    pub monotone_nonnegative_q: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct StandardFactRow {
    pub n: usize,
    pub q: f64,
    /// `(1/(n+1)^d) log sum_A Pr(A)^{1-q}` by pattern enumeration.
    pub lhs: f64,
    /// `P((1-q)U) - (1-q)P(U)`.
    pub rhs: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct CumulantCurve {
    pub q: Vec<f64>,
    pub predicted: Vec<Option<f64>>,
    pub provenance: String,
    pub rows: Vec<CumulantRow>,
    /// `|W(-1) - (P(2U) - 2P(U))|` for `Q = P`.
    pub continuity_gap: Option<f64>,
    pub standard_fact: Vec<StandardFactRow>,
    pub sampler: SampleMeta,
}

/// Empirical `W_hat(q)` per `n` against the pressure prediction.
pub fn ldp_cumulant(p: &CumulantParams) -> Result<CumulantCurve> {
    let d = p.p_gen.dim();
    let (qm, pm) = (&p.q_gen.model, &p.p_gen.model);
    let predicted: Vec<Option<f64>> = p
        .q_grid
        .iter()
        .map(|&q| predicted_cumulant(qm, pm, q))
        .collect::<Result<_>>()?;
    let continuity_gap = if qm == pm {
        let u = pm.interaction();
        let pu = pressure(u)?.value;
        let upper = pressure_scaled(u, 2.0)? + (-1.0 - 1.0) * pu;
        let lower = pressure(&u.scaled(2.0))?.value - 2.0 * pu;
        Some((upper - lower).abs())
    } else {
        None
    };
    let q_gen = p.q_gen.clone().with_purpose(Purpose::FieldQ);
    let p_gen = p.p_gen.clone().with_purpose(Purpose::FieldP);
    let rate = entropy(qm)? + crate::exact::relative_entropy(qm, pm)?;
    let mut rows = Vec::new();
    let mut last_cap = 1;
    for &n in &p.n_range {
        let pr_typ = (-rate * sites(d, n)).exp();
        let mut cap = 1;
        while placement_volume(d, cap) * pr_typ < p.cap_factor && cap < p.max_cap {
            cap += 1;
        }
        last_cap = cap;
        let hits: Vec<(f64, bool)> = (0..p.replicas as u64)
            .into_par_iter()
            .map(|r| {
                let a = q_gen.window(r, n)?.initial_pattern(n)?;
                let (h, _) = p_gen.hit(r, SearchTarget::Pattern(&a), cap)?;
                Ok(((h.capped() as f64).ln(), h.is_censored()))
            })
            .collect::<Result<_>>()?;
        let norm = sites(d, n);
        let m = p.replicas as f64;
        let mut w_hat = Vec::new();
        let mut ci = Vec::new();
        for &q in &p.q_grid {
            let xs: Vec<f64> = hits.iter().map(|(lw, _)| q * d as f64 * lw).collect();
            let shift = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let ys: Vec<f64> = xs.iter().map(|x| (x - shift).exp()).collect();
            let mean = compensated_sum(ys.iter().copied()) / m;
            let var =
                compensated_sum(ys.iter().map(|y| (y - mean) * (y - mean))) / (m - 1.0).max(1.0);
            w_hat.push((shift + mean.ln()) / norm);
            ci.push(p.z * (var / m).sqrt() / mean / norm);
        }
        let gap: Vec<Option<f64>> = w_hat
            .iter()
            .zip(&predicted)
            .map(|(w, pr)| pr.map(|v| (w - v).abs()))
            .collect();
        let relative_gap = gap
            .iter()
            .zip(&predicted)
            .map(|(g, pr)| match (g, pr) {
                (Some(g), Some(v)) if *v != 0.0 => Some(g / v.abs()),
                _ => None,
            })
            .collect();
        let mut nonneg: Vec<(f64, f64)> = p
            .q_grid
            .iter()
            .zip(&w_hat)
            .filter(|(q, _)| **q >= 0.0)
            .map(|(q, w)| (*q, *w))
            .collect();
        nonneg.sort_by(|a, b| a.0.total_cmp(&b.0));
        rows.push(CumulantRow {
            n,
            cap,
            monotone_nonnegative_q: nonneg.windows(2).all(|w| w[1].1 >= w[0].1),
            w_hat,
            ci,
            gap,
            relative_gap,
            censored_fraction: hits.iter().filter(|h| h.1).count() as f64 / m,
        });
    }
    let standard_fact = standard_fact(pm, &p.q_grid, p.standard_fact_max_n)?;
    Ok(CumulantCurve {
        q: p.q_grid.clone(),
        predicted,
        provenance: "exact-engine: pressure formula".into(),
        rows,
        continuity_gap,
        standard_fact,
        sampler: p_gen.meta(p.n_range.iter().copied().max().unwrap_or(0), last_cap)?,
    })
}

/// Exact `sum_A Pr(A)^{1-q}` over all `n`-patterns for every `n` whose
/// pattern table fits, against the pressure expression.
fn standard_fact(model: &Model, q_grid: &[f64], max_n: usize) -> Result<Vec<StandardFactRow>> {
    let d = model.dim();
    let u = model.interaction();
    let pu = pressure(u)?.value;
    let mut out = Vec::new();
    for n in 1..=max_n {
        let count = (model.alphabet() as f64).powf(sites(d, n));
        if count > (1u64 << 20) as f64 || count > ENUMERATION_BUDGET {
            break;
        }
        let cube_sites: Vec<LatticeVector> = Cube::at_origin(d, n).sites().collect();
        let table = match marginal_table(model, &cube_sites, None) {
            Ok(t) => t,
            Err(Error::BudgetExceeded { .. }) => break,
            Err(e) => return Err(e),
        };
        for &q in q_grid {
            let logs: Vec<f64> = table
                .iter()
                .filter(|&&p| p > 0.0)
                .map(|p| (1.0 - q) * p.ln())
                .collect();
            out.push(StandardFactRow {
                n,
                q,
                lhs: logsumexp(&logs) / sites(d, n),
                rhs: pressure_scaled(u, 1.0 - q)? - (1.0 - q) * pu,
            });
        }
    }
    Ok(out)
}

#[derive(Clone, Debug)]
pub struct RateParams {
    pub model: Model,
    pub u_grid: Vec<f64>,
    /// Deviations `u >= 0` for the waiting-time rates.
    pub deviations: Vec<f64>,
    pub q_min: f64,
    pub q_max: f64,
    pub q_step: f64,
    pub tol: f64,
}

impl RateParams {
    pub fn new(model: Model, u_grid: Vec<f64>) -> Self {
        Self {
            model,
            u_grid,
            deviations: vec![0.05, 0.1, 0.2],
            q_min: -6.0,
            q_max: 6.0,
            q_step: 0.05,
            tol: 1e-10,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct RatePoint {
    pub u: f64,
    pub rate: f64,
    pub argmax_q: f64,
    /// The supremum sits on the edge of the `q` range (rate may be larger).
    pub at_boundary: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct RateResult {
    pub entropy: Target,
    /// `I(u) = sup_q (u q - P((1-q)U) - (q-1)P(U))` on `u_grid`.
    pub points: Vec<RatePoint>,
    pub convex_on_grid: bool,
    pub min_second_difference: f64,
    /// `sup_{q>-1} ((s+u) q - W(q))` per deviation.
    pub waiting_upper: Vec<RatePoint>,
    /// `sup_{q>-1} ((s-u) q - W(q))` per deviation.
    pub waiting_lower: Vec<RatePoint>,
    /// `|W'(-1+) - s|` by a one-sided difference.
    pub u0: f64,
    pub u0_approximate: bool,
}

/// Legendre transforms of the surprisal cumulant by grid search refined
/// with golden-section search.
pub fn rate_function(p: &RateParams) -> Result<RateResult> {
    let u = p.model.interaction();
    let pu = pressure(u)?.value;
    let cumulant = |q: f64| -> Result<f64> { Ok(pressure_scaled(u, 1.0 - q)? + (q - 1.0) * pu) };
    let steps = ((p.q_max - p.q_min) / p.q_step).round() as usize;
    let qs: Vec<f64> = (0..=steps).map(|i| p.q_min + i as f64 * p.q_step).collect();
    let fs: Vec<f64> = qs.iter().map(|&q| cumulant(q)).collect::<Result<_>>()?;
    for (i, w) in fs.windows(3).enumerate() {
        let second = w[0] - 2.0 * w[1] + w[2];
        if second < -1e-9 * w[1].abs().max(1.0) {
            return Err(Error::Numerical(format!(
                "cumulant not convex near q = {:.3} (second difference {second:.3e}); refine the pressure grid",
                qs[i + 1]
            )));
        }
    }
    let legendre = |x: f64, lo_index: usize| -> Result<RatePoint> {
        let obj = |i: usize| x * qs[i] - fs[i];
        let j = (lo_index..qs.len())
            .max_by(|&a, &b| obj(a).total_cmp(&obj(b)))
            .expect("nonempty grid");
        let at_boundary = j == lo_index || j == qs.len() - 1;
        if at_boundary {
            return Ok(RatePoint {
                u: x,
                rate: obj(j),
                argmax_q: qs[j],
                at_boundary,
            });
        }
        let err = RefCell::new(None);
        let (q_star, value) = golden_max(
            |q| match cumulant(q) {
                Ok(f) => x * q - f,
                Err(e) => {
                    err.borrow_mut().get_or_insert(e);
                    f64::NEG_INFINITY
                }
            },
            qs[j - 1],
            qs[j + 1],
            p.tol,
        );
        if let Some(e) = err.into_inner() {
            return Err(e);
        }
        let rate = value.max(obj(j));
        Ok(RatePoint {
            u: x,
            rate,
            argmax_q: q_star,
            at_boundary,
        })
    };
    let points: Vec<RatePoint> = p
        .u_grid
        .iter()
        .map(|&x| legendre(x, 0))
        .collect::<Result<_>>()?;
    let mut min_second_difference = f64::INFINITY;
    for w in points.windows(3) {
        // Second divided difference on a possibly uneven grid.
        let (h1, h2) = (w[1].u - w[0].u, w[2].u - w[1].u);
        let dd = ((w[2].rate - w[1].rate) / h2 - (w[1].rate - w[0].rate) / h1) / (h1 + h2);
        min_second_difference = min_second_difference.min(dd);
    }
    let s = entropy(&p.model)?;
    let first_above = qs.iter().position(|&q| q >= -1.0).unwrap_or(0);
    let waiting_upper = p
        .deviations
        .iter()
        .map(|&dev| legendre(s + dev, first_above).map(|r| RatePoint { u: dev, ..r }))
        .collect::<Result<_>>()?;
    let waiting_lower = p
        .deviations
        .iter()
        .map(|&dev| legendre(s - dev, first_above).map(|r| RatePoint { u: dev, ..r }))
        .collect::<Result<_>>()?;
    let h = 1e-5;
    let slope = (cumulant(-1.0 + h)? - cumulant(-1.0)?) / h;
    Ok(RateResult {
        entropy: Target::new("entropy", s, "exact-engine: entropy"),
        points,
        convex_on_grid: min_second_difference >= -1e-7,
        min_second_difference: if min_second_difference.is_finite() {
            min_second_difference
        } else {
            0.0
        },
        waiting_upper,
        waiting_lower,
        u0: (slope - s).abs(),
        u0_approximate: true,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn prediction_vanishes_at_zero_and_is_continuous_at_minus_one() {
        let m = Model::bernoulli(1, 0.6).unwrap();
        assert_eq!(predicted_cumulant(&m, &m, 0.0).unwrap(), Some(0.0));
        let at = predicted_cumulant(&m, &m, -1.0).unwrap().unwrap();
        let below = predicted_cumulant(&m, &m, -1.0 - 1e-300).unwrap().unwrap();
        assert!((at - below).abs() < 1e-12);
    }

    #[test]
    fn distinct_iid_prediction_matches_closed_form() {
        let q = Model::bernoulli(2, 0.3).unwrap();
        let p = Model::bernoulli(2, 0.5).unwrap();
        let w = predicted_cumulant(&q, &p, 0.5).unwrap().unwrap();
        // P(V - qU) = log sum_a q_a p_a^{-q}.
        let exact = (0.7 * 0.5f64.powf(-0.5) + 0.3 * 0.5f64.powf(-0.5)).ln();
        assert!((w - exact).abs() < 1e-12);
        assert_eq!(predicted_cumulant(&q, &p, -2.0).unwrap(), None);
    }

    #[test]
    fn standard_fact_is_exact_for_iid() {
        let m = Model::bernoulli(2, 0.6).unwrap();
        let rows = standard_fact(&m, &[-1.0, 0.5, 2.0], 3).unwrap();
        assert_eq!(rows.len(), 9);
        for r in rows {
            assert!((r.lhs - r.rhs).abs() < 1e-12, "{r:?}");
        }
    }

    #[test]
    fn rate_vanishes_at_entropy() {
        let m = Model::bernoulli(2, 0.6).unwrap();
        let s = entropy(&m).unwrap();
        let r = rate_function(&RateParams::new(m, vec![s - 0.1, s, s + 0.1])).unwrap();
        assert!(r.points[1].rate.abs() < 1e-9);
        assert!(r.points[1].argmax_q.abs() < 1e-4);
        assert!(r.points.iter().all(|p| p.rate >= -1e-12));
    }
}
