//! Inequalities every exact hitting table and pattern probability must
//! satisfy: the union (volume) bound, the second-moment lower bound, the
//! first-moment identity and the single-site Gibbs bounds.

use serde::Serialize;

use super::hitting::{brute_force_hitting_law, placements_upto};
use crate::dobrushin::origin_conditionals;
use crate::error::Result;
use crate::lattice::Pattern;
use crate::model::{Interaction, Model};

/// Relative slack for floating-point comparisons.
const SLACK: f64 = 1e-10;

/// `(c, c')`: the smallest and largest single-site conditional surprisal
/// `-log Pr(sigma_0 = a | context)` over all symbols and contexts.
pub fn surprisal_bounds(u: &Interaction) -> Result<(f64, f64)> {
    let laws = origin_conditionals(u)?;
    let mut lo = f64::INFINITY;
    let mut hi: f64 = 0.0;
    for p in laws.iter().flatten() {
        let s = -p.ln();
        lo = lo.min(s);
        hi = hi.max(s);
    }
    Ok((lo, hi))
}

#[derive(Clone, Debug, Serialize)]
pub struct InvariantCheck {
    pub name: &'static str,
    pub pattern_hash: String,
    pub k: Option<usize>,
    pub lhs: f64,
    pub rhs: f64,
    /// `lhs <= rhs` (or equality for identities) up to rounding.
    pub holds: bool,
}

fn le(lhs: f64, rhs: f64) -> bool {
    lhs <= rhs + SLACK * rhs.abs().max(1e-300)
}

/// Every invariant on the exact hitting table of `a` up to `cap`, plus the
/// Gibbs bounds on the table's own `Pr(A)`.
pub fn check_invariants(model: &Model, a: &Pattern, cap: usize) -> Result<Vec<InvariantCheck>> {
    let t = brute_force_hitting_law(model, a, cap)?;
    let d = model.dim();
    let pr = t.pattern_probability;
    let hash = a.hash_hex();
    let mut out = Vec::new();
    let mut push = |name, k, lhs: f64, rhs: f64, holds| {
        out.push(InvariantCheck {
            name,
            pattern_hash: hash.clone(),
            k,
            lhs,
            rhs,
            holds,
        })
    };
    for k in 0..=cap {
        let volume = placements_upto(d, k);
        push(
            "volume_bound",
            Some(k),
            t.cdf_with_origin[k],
            volume * pr,
            le(t.cdf_with_origin[k], volume * pr),
        );
        push(
            "first_moment",
            Some(k),
            t.mean_count_with_origin[k],
            volume * pr,
            (t.mean_count_with_origin[k] - volume * pr).abs() <= SLACK * (volume * pr).max(1e-300),
        );
        if t.second_moment[k] > 0.0 {
            let cs = t.mean_count[k].powi(2) / t.second_moment[k];
            push(
                "second_moment_bound",
                Some(k),
                cs,
                t.cdf[k],
                le(cs, t.cdf[k]),
            );
        }
    }
    let exact = pr;
    let (c, c_prime) = surprisal_bounds(model.interaction())?;
    let sites = a.site_count() as f64;
    let lower = (-c_prime * sites).exp();
    let upper = (-c * sites).exp();
    push("gibbs_lower", None, lower, exact, le(lower, exact));
    push("gibbs_upper", None, exact, upper, le(exact, upper));
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bernoulli_surprisals_are_the_two_symbols() {
        let m = Model::bernoulli(2, 0.3).unwrap();
        let (c, cp) = surprisal_bounds(m.interaction()).unwrap();
        assert!((c + 0.7f64.ln()).abs() < 1e-12);
        assert!((cp + 0.3f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn ising_invariants_hold() {
        let m = Model::ising(1, 0.3, 1.0, 0.1).unwrap();
        let a = Pattern::new(1, 1, 2, vec![1, 0]).unwrap();
        let checks = check_invariants(&m, &a, 4).unwrap();
        assert!(checks.iter().all(|c| c.holds), "{checks:?}");
        assert!(checks.iter().any(|c| c.name == "second_moment_bound"));
    }
}
