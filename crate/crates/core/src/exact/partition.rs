//! Partition functions, exact marginals and pattern probabilities.

use rayon::prelude::*;
use serde::Serialize;

use super::enumerate::{
    check_budget, fold_states, placements_meeting, state_count, CompiledEnergy, Slot,
    ENUMERATION_BUDGET,
};
use crate::error::{Error, Result};
use crate::lattice::{Cube, LatticeVector, Pattern, Wrap};
use crate::model::{BoundaryCondition, Interaction, Model, ModelKind};
use crate::numerics::LogSum;

pub fn log_partition_free(u: &Interaction, volume: &Cube) -> Result<f64> {
    let ce = CompiledEnergy::free_cube(u, volume)?;
    log_sum_states(&ce, volume.site_count(), u.alphabet())
}

fn log_sum_states(ce: &CompiledEnergy, sites: usize, q: usize) -> Result<f64> {
    let acc = fold_states(
        sites,
        q,
        LogSum::default,
        |acc, s| acc.add(-ce.energy(s)),
        |mut a, b| {
            a.merge(&b);
            a
        },
    )?;
    Ok(acc.value())
}

/// `log Z^zeta_Lambda`, summing over every configuration of `volume`.
pub fn partition_function(
    u: &Interaction,
    volume: &Cube,
    boundary: &BoundaryCondition,
) -> Result<f64> {
    check_budget(state_count(volume.site_count(), u.alphabet()))?;
    match boundary {
        BoundaryCondition::Free => log_partition_free(u, volume),
        BoundaryCondition::Fixed(zeta) => {
            let placements = placements_meeting(u, volume, false);
            let ce = CompiledEnergy::compile(u, &placements, |y| {
                volume
                    .index_of(y)
                    .map(Slot::State)
                    .or_else(|| zeta.get_with(y, Wrap::None).map(Slot::Fixed))
            })?;
            log_sum_states(&ce, volume.site_count(), u.alphabet())
        }
    }
}

/// `log Z` on the periodic `len^d` torus.
pub fn log_partition_torus(u: &Interaction, len: usize) -> Result<f64> {
    let ce = CompiledEnergy::torus(u, len)?;
    log_sum_states(&ce, len.pow(u.dim() as u32), u.alphabet())
}

/// Largest torus side whose state space fits the enumeration budget.
pub fn max_torus_len(u: &Interaction) -> usize {
    (1..)
        .take_while(|l: &usize| {
            state_count(l.pow(u.dim() as u32), u.alphabet()) <= ENUMERATION_BUDGET
        })
        .last()
        .unwrap_or(0)
}

fn wrap_index(y: &LatticeVector, len: usize) -> usize {
    y.coords()
        .iter()
        .fold(0, |acc, c| acc * len + c.rem_euclid(len as i64) as usize)
}

/// Exact joint law of the symbols on `sites`, indexed base `q` with the
/// first site most significant. Gibbs models use a `len^d` torus (sites
/// wrap); iid and Markov-product models use their closed forms.
pub fn marginal_table(
    model: &Model,
    sites: &[LatticeVector],
    torus_len: Option<usize>,
) -> Result<Vec<f64>> {
    let q = model.alphabet();
    let k = sites.len();
    let entries = state_count(k, q);
    if entries > (1u64 << 20) as f64 {
        return Err(Error::BudgetExceeded {
            needed: entries,
            budget: (1u64 << 20) as f64,
        });
    }
    let entries = entries as usize;
    match model.kind() {
        ModelKind::Iid { .. } | ModelKind::MarkovProduct { .. } => {
            let mut digits = vec![0u8; k];
            let mut out = Vec::with_capacity(entries);
            for code in 0..entries {
                super::enumerate::decode(code as u64, q, &mut digits);
                out.push(closed_form_probability(model, sites, &digits)?);
            }
            Ok(out)
        }
        _ => {
            let u = model.interaction();
            let len = torus_len.unwrap_or_else(|| max_torus_len(u));
            if len == 0 {
                return Err(Error::BudgetExceeded {
                    needed: state_count(1, q),
                    budget: ENUMERATION_BUDGET,
                });
            }
            let idx: Vec<usize> = sites.iter().map(|y| wrap_index(y, len)).collect();
            let ce = CompiledEnergy::torus(u, len)?;
            let n_sites = len.pow(u.dim() as u32);
            let sums = fold_states(
                n_sites,
                q,
                || vec![LogSum::default(); entries],
                |acc, s| {
                    let code = idx.iter().fold(0, |c, &i| c * q + s[i] as usize);
                    acc[code].add(-ce.energy(s));
                },
                |mut a, b| {
                    a.iter_mut().zip(&b).for_each(|(x, y)| x.merge(y));
                    a
                },
            )?;
            let mut total = LogSum::default();
            sums.iter().for_each(|s| total.merge(s));
            let z = total.value();
            Ok(sums.iter().map(|s| (s.value() - z).exp()).collect())
        }
    }
}

/// Probability of the partial assignment `sites -> symbols` under an iid or
/// Markov-product model.
pub fn closed_form_probability(
    model: &Model,
    sites: &[LatticeVector],
    symbols: &[u8],
) -> Result<f64> {
    Ok(closed_form_log_probability(model, sites, symbols)?.exp())
}

pub fn closed_form_log_probability(
    model: &Model,
    sites: &[LatticeVector],
    symbols: &[u8],
) -> Result<f64> {
    match model.kind() {
        ModelKind::Iid { p } => {
            // Repeated sites must agree.
            let mut seen: Vec<(LatticeVector, u8)> = Vec::new();
            let mut lp = 0.0;
            for (y, &a) in sites.iter().zip(symbols) {
                if let Some((_, b)) = seen.iter().find(|(s, _)| s == y) {
                    if *b != a {
                        return Ok(f64::NEG_INFINITY);
                    }
                    continue;
                }
                seen.push((*y, a));
                lp += p[a as usize].ln();
            }
            Ok(lp)
        }
        ModelKind::MarkovProduct { matrix, stationary } => {
            let mut pts: Vec<(i64, i64, u8)> = sites
                .iter()
                .zip(symbols)
                .map(|(y, &a)| (y.get(0), y.get(1), a))
                .collect();
            pts.sort();
            let mut lp = 0.0;
            let mut i = 0;
            while i < pts.len() {
                let row = pts[i].0;
                lp += stationary[pts[i].2 as usize].ln();
                let mut j = i + 1;
                while j < pts.len() && pts[j].0 == row {
                    let gap = pts[j].1 - pts[j - 1].1;
                    let (a, b) = (pts[j - 1].2 as usize, pts[j].2 as usize);
                    if gap == 0 {
                        if a != b {
                            return Ok(f64::NEG_INFINITY);
                        }
                    } else {
                        lp += matrix_power(matrix, gap as usize)[a][b].ln();
                    }
                    j += 1;
                }
                i = j;
            }
            Ok(lp)
        }
        _ => Err(Error::Unsupported(
            "closed form needs an iid or Markov-product model".into(),
        )),
    }
}

pub fn matrix_power(p: &[Vec<f64>], k: usize) -> Vec<Vec<f64>> {
    let q = p.len();
    let mut result: Vec<Vec<f64>> = (0..q)
        .map(|i| (0..q).map(|j| (i == j) as u8 as f64).collect())
        .collect();
    let mut base = p.to_vec();
    let mut e = k;
    let mul = |a: &[Vec<f64>], b: &[Vec<f64>]| -> Vec<Vec<f64>> {
        (0..q)
            .map(|i| {
                (0..q)
                    .map(|j| (0..q).map(|l| a[i][l] * b[l][j]).sum())
                    .collect()
            })
            .collect()
    };
    while e > 0 {
        if e & 1 == 1 {
            result = mul(&result, &base);
        }
        base = mul(&base, &base);
        e >>= 1;
    }
    result
}

#[derive(Clone, Debug, Serialize)]
pub struct PatternProbability {
    pub value: f64,
    pub log_value: f64,
    /// Certified range `[lo, hi]` for the infinite-volume probability when
    /// the model is Gibbsian and a boundary enumeration fits the budget.
    pub bracket: Option<(f64, f64)>,
    /// Description of how `value` was obtained.
    pub method: String,
}

/// `Pr(C(A))`. iid and Markov-product models are exact; Gibbs models use
/// the torus marginal plus an all-boundary-condition bracket.
pub fn exact_pattern_probability(
    model: &Model,
    a: &Pattern,
    torus_len: Option<usize>,
) -> Result<PatternProbability> {
    if a.dim() != model.dim() {
        return Err(Error::DimensionMismatch {
            expected: model.dim(),
            got: a.dim(),
        });
    }
    if a.alphabet() > model.alphabet() {
        return Err(Error::SymbolOutOfRange {
            symbol: a.alphabet() - 1,
            alphabet: model.alphabet(),
        });
    }
    let sites: Vec<LatticeVector> = a.cube().sites().collect();
    match model.kind() {
        ModelKind::Iid { .. } | ModelKind::MarkovProduct { .. } => {
            let lp = closed_form_log_probability(model, &sites, a.values())?;
            Ok(PatternProbability {
                value: lp.exp(),
                log_value: lp,
                bracket: Some((lp.exp(), lp.exp())),
                method: "closed_form".into(),
            })
        }
        _ => {
            let u = model.interaction();
            let need = a.side() + 1 + 2 * u.range();
            let len = torus_len.unwrap_or_else(|| max_torus_len(u).max(need));
            if len < need {
                return Err(Error::DomainTooSmall(format!(
                    "torus side {len} < n + 1 + 2R = {need}"
                )));
            }
            check_budget(state_count(len.pow(u.dim() as u32), u.alphabet()))?;
            let value = torus_pattern_probability(u, a, len)?;
            let bracket = boundary_bracket(u, a).ok();
            Ok(PatternProbability {
                value,
                log_value: value.ln(),
                bracket,
                method: format!("torus_enumeration(L={len})"),
            })
        }
    }
}

fn torus_pattern_probability(u: &Interaction, a: &Pattern, len: usize) -> Result<f64> {
    let q = u.alphabet();
    let idx: Vec<usize> = a.cube().sites().map(|y| wrap_index(&y, len)).collect();
    let ce = CompiledEnergy::torus(u, len)?;
    let target = a.values().to_vec();
    let (hit, all) = fold_states(
        len.pow(u.dim() as u32),
        q,
        || (LogSum::default(), LogSum::default()),
        |acc, s| {
            let e = -ce.energy(s);
            acc.1.add(e);
            if idx.iter().zip(&target).all(|(&i, &t)| s[i] == t) {
                acc.0.add(e);
            }
        },
        |mut x, y| {
            x.0.merge(&y.0);
            x.1.merge(&y.1);
            x
        },
    )?;
    Ok((hit.value() - all.value()).exp())
}

/// `[min, max]` over boundary conditions `zeta` of `Pr^zeta_Lambda(A)`, with
/// `Lambda` the largest centred enlargement of `C_n` that fits the budget.
/// By the DLR equations every infinite-volume Gibbs probability lies in it.
pub fn boundary_bracket(u: &Interaction, a: &Pattern) -> Result<(f64, f64)> {
    let d = u.dim();
    let q = u.alphabet();
    let r = u.range() as i64;
    let mut chosen = None;
    for margin in 0..8i64 {
        let lambda = Cube::new(
            LatticeVector::splat(d, -margin),
            a.side() + 2 * margin as usize,
        );
        let ann = annulus(u, &lambda);
        let cost = state_count(lambda.site_count() + ann.len(), q);
        if cost > ENUMERATION_BUDGET {
            break;
        }
        chosen = Some((lambda, ann));
    }
    let (lambda, ann) = chosen.ok_or(Error::BudgetExceeded {
        needed: state_count(a.site_count() + 4 * d * (r as usize).max(1), q),
        budget: ENUMERATION_BUDGET,
    })?;
    let nl = lambda.site_count();
    let placements = placements_meeting(u, &lambda, false);
    let ce = CompiledEnergy::compile(u, &placements, |y| {
        lambda
            .index_of(y)
            .or_else(|| ann.iter().position(|s| s == y).map(|i| nl + i))
            .map(Slot::State)
    })?;
    let pat_idx: Vec<usize> = a
        .cube()
        .sites()
        .map(|y| lambda.index_of(&y).expect("inside"))
        .collect();
    let zetas = (q as u64).pow(ann.len() as u32);
    let inner = (q as u64).pow(nl as u32);
    let probs: Vec<f64> = (0..zetas)
        .into_par_iter()
        .map(|z| {
            let mut state = vec![0u8; nl + ann.len()];
            super::enumerate::decode(z, q, &mut state[nl..]);
            let (mut hit, mut all) = (LogSum::default(), LogSum::default());
            for code in 0..inner {
                super::enumerate::decode(code, q, &mut state[..nl]);
                let e = -ce.energy(&state);
                all.add(e);
                if pat_idx.iter().zip(a.values()).all(|(&i, &t)| state[i] == t) {
                    hit.add(e);
                }
            }
            (hit.value() - all.value()).exp()
        })
        .collect();
    let lo = probs.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = probs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok((lo, hi))
}

/// Sites outside `volume` that share a placement with a site inside it.
fn annulus(u: &Interaction, volume: &Cube) -> Vec<LatticeVector> {
    let mut out: Vec<LatticeVector> = placements_meeting(u, volume, false)
        .into_iter()
        .flat_map(|(t, p)| {
            u.terms()[t]
                .shape()
                .iter()
                .map(move |s| p + *s)
                .collect::<Vec<_>>()
        })
        .filter(|y| !volume.contains(y))
        .collect();
    out.sort();
    out.dedup();
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{Configuration, Domain};

    #[test]
    fn zero_interaction_partition() {
        let u = Interaction::zero(2, 2);
        let z = partition_function(&u, &Cube::at_origin(2, 1), &BoundaryCondition::Free).unwrap();
        assert!((z - 16f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn single_site_field() {
        let (beta, h) = (0.7, 0.9);
        let m = Model::ising(2, beta, 1.0, h).unwrap();
        let z = partition_function(
            m.interaction(),
            &Cube::at_origin(2, 0),
            &BoundaryCondition::Free,
        )
        .unwrap();
        assert!((z - (2.0 * (beta * h).cosh()).ln()).abs() < 1e-12);
    }

    #[test]
    fn uniform_energy_shift() {
        let m = Model::ising(2, 0.3, 1.0, 0.1).unwrap();
        let vol = Cube::at_origin(2, 2);
        let z0 = log_partition_free(m.interaction(), &vol).unwrap();
        let c = 0.37;
        let shifted = crate::model::Interaction::new(
            2,
            2,
            m.interaction()
                .terms()
                .iter()
                .map(|t| {
                    crate::model::Term::new(
                        t.shape().to_vec(),
                        t.table().iter().map(|e| e + c).collect(),
                        2,
                    )
                    .unwrap()
                })
                .collect(),
        )
        .unwrap();
        let z1 = log_partition_free(&shifted, &vol).unwrap();
        // 12 bonds + 9 field placements.
        assert!((z1 - (z0 - c * 21.0)).abs() < 1e-10);
    }

    #[test]
    fn fixed_boundary_needs_annulus() {
        let m = Model::ising(2, 0.3, 1.0, 0.0).unwrap();
        let vol = Cube::at_origin(2, 1);
        let short = Configuration::constant(Domain::Cube(Cube::at_origin(2, 1)), 2, 1).unwrap();
        assert!(
            partition_function(m.interaction(), &vol, &BoundaryCondition::Fixed(short)).is_err()
        );
        let full = Configuration::constant(
            Domain::Cube(Cube::new(LatticeVector::splat(2, -1), 3)),
            2,
            1,
        )
        .unwrap();
        assert!(partition_function(m.interaction(), &vol, &BoundaryCondition::Fixed(full)).is_ok());
    }

    #[test]
    fn iid_pattern_probabilities() {
        let m = Model::bernoulli(2, 0.5).unwrap();
        let a = Pattern::new(2, 1, 2, vec![0, 1, 1, 0]).unwrap();
        let p = exact_pattern_probability(&m, &a, None).unwrap();
        assert!((p.value - 1.0 / 16.0).abs() < 1e-15);
        let m = Model::bernoulli(2, 0.3).unwrap();
        let a = Pattern::new(2, 2, 2, vec![1, 0, 0, 1, 1, 0, 0, 0, 0]).unwrap();
        let p = exact_pattern_probability(&m, &a, None).unwrap();
        assert!((p.value - 0.3f64.powi(3) * 0.7f64.powi(6)).abs() < 1e-15);
    }

    #[test]
    fn markov_rows() {
        let mat = vec![vec![0.9, 0.1], vec![0.4, 0.6]];
        let m = Model::markov_product(mat).unwrap();
        let pi = [0.8, 0.2];
        // Rows (x0 fixed): [0,1] and [1,1].
        let a = Pattern::new(2, 1, 2, vec![0, 1, 1, 1]).unwrap();
        let p = exact_pattern_probability(&m, &a, None).unwrap();
        assert!((p.value - pi[0] * 0.1 * pi[1] * 0.6).abs() < 1e-9);
        let two = matrix_power(&[vec![0.9, 0.1], vec![0.4, 0.6]], 2);
        assert!((two[0][1] - (0.9 * 0.1 + 0.1 * 0.6)).abs() < 1e-15);
    }

    #[test]
    fn ising_torus_marginal_matches_direct_sum() {
        let m = Model::ising(2, 0.2, 1.0, 0.0).unwrap();
        let a = Pattern::constant(2, 1, 2, 1).unwrap();
        let p = exact_pattern_probability(&m, &a, Some(4)).unwrap();
        // Direct oracle: loop over 2^16 states counting bonds by hand.
        let (mut hit, mut all) = (0.0, 0.0);
        for code in 0u32..1 << 16 {
            let s = |x: usize, y: usize| {
                if code >> (15 - (4 * (x % 4) + y % 4)) & 1 == 1 {
                    1.0
                } else {
                    -1.0
                }
            };
            let mut e = 0.0;
            for x in 0..4 {
                for y in 0..4 {
                    e += s(x, y) * (s(x + 1, y) + s(x, y + 1));
                }
            }
            let w = (0.2f64 * e).exp();
            all += w;
            if s(0, 0) > 0.0 && s(0, 1) > 0.0 && s(1, 0) > 0.0 && s(1, 1) > 0.0 {
                hit += w;
            }
        }
        assert!((p.value - hit / all).abs() < 1e-12);
        let (lo, hi) = p.bracket.unwrap();
        assert!(lo <= hi);
        assert!(lo > 0.0 && hi < 1.0);
    }

    #[test]
    fn marginals_sum_to_one() {
        let m = Model::potts(2, 0.2, 1.0, 3).unwrap();
        let sites = [LatticeVector::zero(2), LatticeVector::unit(2, 0)];
        let t = marginal_table(&m, &sites, Some(3)).unwrap();
        assert_eq!(t.len(), 9);
        assert!((t.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }
}
