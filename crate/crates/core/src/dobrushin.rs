//! Dobrushin influence coefficients and the two uniqueness checks.
//!
//! `gamma(x, y)` is the largest total-variation distance between the
//! conditional laws at `x` under two contexts that differ only at `y`,
//! maximized exhaustively over the finite-range neighbourhood of `x`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::lattice::LatticeVector;
use crate::model::Interaction;

/// Hard cap on conditional evaluations for one coefficient row.
pub const DOBRUSHIN_BUDGET: f64 = (1u64 << 24) as f64;

#[derive(Clone, Debug, Serialize)]
pub struct DobrushinReport {
    pub satisfied: bool,
    pub row_sum: f64,
    /// Nonzero coefficients `(y, gamma_0y)`.
    pub row: Vec<(Vec<i64>, f64)>,
}

#[derive(Clone, Debug, Serialize)]
pub struct HighTemperatureReport {
    pub satisfied: bool,
    pub lhs: f64,
}

/// Conditional laws at `x` for every assignment of its neighbourhood.
struct ContextTable {
    sites: Vec<LatticeVector>,
    alphabet: usize,
    laws: Vec<Vec<f64>>,
}

impl ContextTable {
    fn build(u: &Interaction, x: &LatticeVector) -> Result<Self> {
        let q = u.alphabet();
        let sites: Vec<LatticeVector> = u.neighbourhood().into_iter().map(|s| *x + s).collect();
        let needed = (q as f64).powi(sites.len() as i32 + 1);
        if needed > DOBRUSHIN_BUDGET {
            return Err(Error::BudgetExceeded {
                needed,
                budget: DOBRUSHIN_BUDGET,
            });
        }
        let contexts = q.pow(sites.len() as u32);
        let mut laws = Vec::with_capacity(contexts);
        let mut digits = vec![0u8; sites.len()];
        for c in 0..contexts {
            let mut rem = c;
            for d in digits.iter_mut().rev() {
                *d = (rem % q) as u8;
                rem /= q;
            }
            let law = u.single_site_conditional(x, |y| {
                sites.iter().position(|s| s == y).map(|i| digits[i])
            })?;
            laws.push(law);
        }
        Ok(Self {
            sites,
            alphabet: q,
            laws,
        })
    }

    fn gamma_at(&self, y: &LatticeVector) -> f64 {
        let Some(j) = self.sites.iter().position(|s| s == y) else {
            return 0.0;
        };
        let q = self.alphabet;
        let stride = q.pow((self.sites.len() - 1 - j) as u32);
        let mut best: f64 = 0.0;
        for c in 0..self.laws.len() {
            let b = (c / stride) % q;
            for b2 in b + 1..q {
                let c2 = c + (b2 - b) * stride;
                let tv: f64 = self.laws[c]
                    .iter()
                    .zip(&self.laws[c2])
                    .map(|(p, r)| (p - r).abs())
                    .sum::<f64>()
                    / 2.0;
                best = best.max(tv);
            }
        }
        best
    }
}

/// Conditional laws at the origin, one per assignment of its neighbourhood.
pub(crate) fn origin_conditionals(u: &Interaction) -> Result<Vec<Vec<f64>>> {
    Ok(ContextTable::build(u, &LatticeVector::zero(u.dim()))?.laws)
}

/// `gamma_xy`, computed from the neighbourhood of `x` itself.
pub fn gamma(u: &Interaction, x: &LatticeVector, y: &LatticeVector) -> Result<f64> {
    x.same_dim(y)?;
    if x == y || x.l1_distance(y) > u.range() as i64 {
        return Ok(0.0);
    }
    Ok(ContextTable::build(u, x)?.gamma_at(y))
}

/// Row sum at the origin, which bounds every row by translation invariance.
pub fn check_dobrushin(u: &Interaction) -> Result<DobrushinReport> {
    let origin = LatticeVector::zero(u.dim());
    let table = ContextTable::build(u, &origin)?;
    let row: Vec<(Vec<i64>, f64)> = table
        .sites
        .iter()
        .map(|y| (y.coords().to_vec(), table.gamma_at(y)))
        .filter(|(_, g)| *g > 0.0)
        .collect();
    let row_sum = row.iter().map(|(_, g)| g).sum::<f64>();
    Ok(DobrushinReport {
        satisfied: row_sum < 1.0,
        row_sum,
        row,
    })
}

/// `sum over placements A containing 0 of (|A| - 1) osc U(A)`; each term
/// shape has `|A|` placements through the origin.
pub fn check_high_temperature(u: &Interaction) -> Result<HighTemperatureReport> {
    let lhs = u
        .terms()
        .iter()
        .map(|t| {
            let k = t.size() as f64;
            if k == 1.0 {
                0.0
            } else {
                k * (k - 1.0) * t.oscillation()
            }
        })
        .sum::<f64>();
    Ok(HighTemperatureReport {
        satisfied: lhs < 2.0,
        lhs,
    })
}
