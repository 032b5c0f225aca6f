//! Lower-bound probe of the mixing function over cylinder events.

use serde::Serialize;

use super::partition::marginal_table;
use crate::error::{Error, Result};
use crate::lattice::{Cube, LatticeVector};
use crate::model::Model;

#[derive(Clone, Debug, Serialize)]
pub struct PhiProbe {
    pub distance: i64,
    /// `max |Pr(E1 | E2) - Pr(E1)| / |A1|` over full cylinder events; a
    /// lower bound on the mixing function at this distance.
    pub value: f64,
    pub lower_bound: bool,
}

/// Probes `phi(m)` for the boxes `a1`, `a2` at distance `m = d(a1, a2)`.
/// Gibbs models use a torus of side `torus_len` on which distances wrap.
pub fn mixing_phi_probe(
    model: &Model,
    a1: &Cube,
    a2: &Cube,
    torus_len: Option<usize>,
) -> Result<PhiProbe> {
    let distance = a1.distance(a2);
    if distance == 0 {
        return Err(Error::OutOfDomain("boxes must be disjoint".into()));
    }
    let q = model.alphabet();
    let s1: Vec<LatticeVector> = a1.sites().collect();
    let s2: Vec<LatticeVector> = a2.sites().collect();
    let all: Vec<LatticeVector> = s1.iter().chain(&s2).copied().collect();
    let joint = marginal_table(model, &all, torus_len)?;
    let n1 = q.pow(s1.len() as u32);
    let n2 = q.pow(s2.len() as u32);
    let mut p1 = vec![0.0; n1];
    let mut p2 = vec![0.0; n2];
    for (code, p) in joint.iter().enumerate() {
        p1[code / n2] += p;
        p2[code % n2] += p;
    }
    let mut best: f64 = 0.0;
    for e2 in 0..n2 {
        if p2[e2] <= 0.0 {
            continue;
        }
        for e1 in 0..n1 {
            let cond = joint[e1 * n2 + e2] / p2[e2];
            best = best.max((cond - p1[e1]).abs());
        }
    }
    Ok(PhiProbe {
        distance,
        value: (best / s1.len() as f64).min(1.0),
        lower_bound: true,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn site(x: i64, y: i64) -> Cube {
        Cube::new(LatticeVector::new(&[x, y]).unwrap(), 0)
    }

    #[test]
    fn iid_is_independent() {
        let m = Model::bernoulli(2, 0.3).unwrap();
        for d in 1..4 {
            let p = mixing_phi_probe(&m, &site(0, 0), &site(0, d), None).unwrap();
            assert!(p.value < 1e-15);
        }
    }

    #[test]
    fn markov_single_site_decay() {
        let (a, b) = (0.2, 0.3);
        let m = Model::markov_product(vec![vec![1.0 - a, a], vec![b, 1.0 - b]]).unwrap();
        let lambda2: f64 = 1.0 - a - b;
        let pi = [b / (a + b), a / (a + b)];
        for gap in 1..6 {
            let p = mixing_phi_probe(&m, &site(0, 0), &site(0, gap), None).unwrap();
            // P^m(b, a) - pi(a) = lambda2^m (delta_ab - pi(a)); the largest
            // deviation is lambda2^m max_a (1 - pi(a)).
            let expected = lambda2.abs().powi(gap as i32) * (1.0 - pi[0].min(pi[1]));
            assert!(
                (p.value - expected).abs() < 1e-12,
                "{gap}: {} vs {expected}",
                p.value
            );
            assert!(p.value <= 1.0);
        }
        // Different rows are independent.
        let p = mixing_phi_probe(&m, &site(0, 0), &site(1, 0), None).unwrap();
        assert!(p.value < 1e-15);
    }

    #[test]
    fn ising_probe_decays() {
        let m = Model::ising(1, 0.5, 1.0, 0.0).unwrap();
        let one = |x: i64| Cube::new(LatticeVector::new(&[x]).unwrap(), 0);
        let v: Vec<f64> = (1..4)
            .map(|d| {
                mixing_phi_probe(&m, &one(0), &one(d), Some(16))
                    .unwrap()
                    .value
            })
            .collect();
        assert!(v[0] > v[1] && v[1] > v[2]);
    }
}
