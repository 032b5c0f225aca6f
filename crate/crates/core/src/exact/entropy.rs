//! Entropy per site and relative entropy density.
//!
//! Closed forms for iid and Markov-product models; Gibbs models use
//! `s = P(U) + E f_U` with the energy density averaged exactly on a torus.

use super::partition::marginal_table;
use super::pressure::pressure;
use crate::error::{Error, Result};
use crate::lattice::LatticeVector;
use crate::model::{Interaction, Model, ModelKind};

fn plogp(p: f64) -> f64 {
    if p > 0.0 {
        p * p.ln()
    } else {
        0.0
    }
}

/// Entropy per site in nats.
pub fn entropy(model: &Model) -> Result<f64> {
    match model.kind() {
        ModelKind::Iid { p } => Ok(-p.iter().map(|&x| plogp(x)).sum::<f64>()),
        ModelKind::MarkovProduct { matrix, stationary } => Ok(-stationary
            .iter()
            .zip(matrix)
            .map(|(pi, row)| pi * row.iter().map(|&x| plogp(x)).sum::<f64>())
            .sum::<f64>()),
        _ => {
            let u = model.interaction();
            Ok(pressure(u)?.value + expected_f_u(model, u)?)
        }
    }
}

/// `E_Q f_U` for the interaction `u` under the law of `q_model`.
pub fn expected_f_u(q_model: &Model, u: &Interaction) -> Result<f64> {
    if q_model.dim() != u.dim() || q_model.alphabet() != u.alphabet() {
        return Err(Error::InvalidModel(
            "models live on different spaces".into(),
        ));
    }
    let q = u.alphabet();
    let mut sites = vec![LatticeVector::zero(u.dim())];
    sites.extend(u.neighbourhood());
    let table = marginal_table(q_model, &sites, None)?;
    let mut digits = vec![0u8; sites.len()];
    let mut total = 0.0;
    for (code, p) in table.iter().enumerate() {
        if *p == 0.0 {
            continue;
        }
        super::enumerate::decode(code as u64, q, &mut digits);
        let f = u.f_u(|y| sites.iter().position(|s| s == y).map(|i| digits[i]))?;
        total += p * f;
    }
    Ok(total)
}

/// `s(Q | P) = P(U) + E_Q f_U - s(Q)`.
pub fn relative_entropy(q_model: &Model, p_model: &Model) -> Result<f64> {
    let u = p_model.interaction();
    let value = pressure(u)?.value + expected_f_u(q_model, u)? - entropy(q_model)?;
    // Exact cancellation can leave a tiny negative residue.
    Ok(if value.abs() < 1e-13 { 0.0 } else { value })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn closed_forms() {
        let uniform = Model::bernoulli(2, 0.5).unwrap();
        assert!((entropy(&uniform).unwrap() - 2f64.ln()).abs() < 1e-15);
        let b = Model::bernoulli(2, 0.7).unwrap();
        let h = -(0.7f64 * 0.7f64.ln() + 0.3 * 0.3f64.ln());
        assert!((entropy(&b).unwrap() - h).abs() < 1e-15);
        assert!((h - 0.6109).abs() < 1e-4);
    }

    #[test]
    fn self_divergence_is_zero() {
        for m in [
            Model::bernoulli(2, 0.7).unwrap(),
            Model::markov_product(vec![vec![0.8, 0.2], vec![0.5, 0.5]]).unwrap(),
        ] {
            assert_eq!(relative_entropy(&m, &m).unwrap(), 0.0);
        }
    }

    #[test]
    fn bernoulli_divergence() {
        let q = Model::bernoulli(2, 0.3).unwrap();
        let p = Model::bernoulli(2, 0.5).unwrap();
        let total = entropy(&q).unwrap() + relative_entropy(&q, &p).unwrap();
        assert!((total - 2f64.ln()).abs() < 1e-14);
        let q = Model::bernoulli(2, 0.5).unwrap();
        let p = Model::bernoulli(2, 0.7).unwrap();
        let total = entropy(&q).unwrap() + relative_entropy(&q, &p).unwrap();
        assert!((total - 0.7803).abs() < 1e-4);
    }

    #[test]
    fn markov_entropy_via_gibbs_identity() {
        // The pair potential -log P has pressure 0 and E f_U equals the
        // entropy rate, so both routes must agree.
        let m = Model::markov_product(vec![vec![0.7, 0.3], vec![0.4, 0.6]]).unwrap();
        let closed = entropy(&m).unwrap();
        let via =
            pressure(m.interaction()).unwrap().value + expected_f_u(&m, m.interaction()).unwrap();
        assert!((closed - via).abs() < 1e-9, "{closed} vs {via}");
    }

    #[test]
    fn ising_entropy_is_below_log_two() {
        let m = Model::ising(2, 0.2, 1.0, 0.0).unwrap();
        let s = entropy(&m).unwrap();
        assert!(s > 0.6 && s < 2f64.ln(), "{s}");
    }
}
