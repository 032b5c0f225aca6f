//! Pressure `P(U)`: closed form for single-site interactions, free-boundary
//! enumeration sequences, and transfer-matrix strips.
//!
//! Strips are infinite along axis 0 and have free edges across their width
//! `w`, so `log lambda_w / w = P + 2 tau / w` up to exponentially small
//! terms; one Richardson step in `w` removes the edge term `tau`.

use serde::Serialize;

use super::enumerate::{state_count, ENUMERATION_BUDGET};
use super::partition::log_partition_free;
use crate::error::{Error, Result};
use crate::lattice::{Cube, LatticeVector};
use crate::model::Interaction;
use crate::numerics::{logsumexp, quadratic_intercept};

/// Largest transfer-matrix state space.
pub const TRANSFER_STATES: usize = 1 << 12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PressureMethod {
    ClosedForm,
    EnumerationSequence,
    TransferMatrixStrip,
}

#[derive(Clone, Debug, Serialize)]
pub struct PressureEstimate {
    pub value: f64,
    pub method: PressureMethod,
    /// Box sides `n` (enumeration) or strip widths `w` (transfer matrix).
    pub sizes: Vec<usize>,
    /// `log Z / (n+1)^d` per box, or `log lambda / w` per strip.
    pub sequence: Vec<f64>,
    /// Change between the last two extrapolation steps.
    pub residual: f64,
    pub converged: bool,
}

/// Picks the most accurate method available for `u`.
pub fn pressure(u: &Interaction) -> Result<PressureEstimate> {
    if u.is_single_site() {
        return pressure_with(u, PressureMethod::ClosedForm, &[]);
    }
    if u.is_nearest_neighbour() && u.dim() <= 2 {
        return pressure_with(u, PressureMethod::TransferMatrixStrip, &[]);
    }
    pressure_with(u, PressureMethod::EnumerationSequence, &[])
}

/// `P(c U)`.
pub fn pressure_scaled(u: &Interaction, c: f64) -> Result<f64> {
    Ok(pressure(&u.scaled(c))?.value)
}

/// Pressure by an explicit method; empty `sizes` selects every size that
/// fits the budgets.
pub fn pressure_with(
    u: &Interaction,
    method: PressureMethod,
    sizes: &[usize],
) -> Result<PressureEstimate> {
    match method {
        PressureMethod::ClosedForm => closed_form(u),
        PressureMethod::EnumerationSequence => enumeration_sequence(u, sizes),
        PressureMethod::TransferMatrixStrip => transfer_strip(u, sizes),
    }
}

fn single_site_energies(u: &Interaction) -> Vec<f64> {
    let mut e = vec![0.0; u.alphabet()];
    for t in u.terms().iter().filter(|t| t.size() == 1) {
        for (a, x) in e.iter_mut().enumerate() {
            *x += t.table()[a];
        }
    }
    e
}

fn closed_form(u: &Interaction) -> Result<PressureEstimate> {
    if !u.is_single_site() {
        return Err(Error::Unsupported(
            "closed-form pressure needs single-site terms".into(),
        ));
    }
    let neg: Vec<f64> = single_site_energies(u).iter().map(|e| -e).collect();
    let value = logsumexp(&neg);
    Ok(PressureEstimate {
        value,
        method: PressureMethod::ClosedForm,
        sizes: Vec::new(),
        sequence: Vec::new(),
        residual: 0.0,
        converged: true,
    })
}

fn enumeration_sequence(u: &Interaction, sizes: &[usize]) -> Result<PressureEstimate> {
    let d = u.dim();
    let q = u.alphabet();
    let sizes: Vec<usize> = if sizes.is_empty() {
        (1..)
            .take_while(|n: &usize| state_count((n + 1).pow(d as u32), q) <= ENUMERATION_BUDGET)
            .collect()
    } else {
        sizes.to_vec()
    };
    if sizes.is_empty() {
        return Err(Error::BudgetExceeded {
            needed: state_count(2usize.pow(d as u32), q),
            budget: ENUMERATION_BUDGET,
        });
    }
    let mut sequence = Vec::with_capacity(sizes.len());
    for &n in &sizes {
        let cube = Cube::at_origin(d, n);
        sequence.push(log_partition_free(u, &cube)? / cube.site_count() as f64);
    }
    // Free boundaries leave O(1/L) surface and O(1/L^2) corner terms with
    // L = n + 1 sites per side.
    let pts: Vec<(f64, f64)> = sizes
        .iter()
        .zip(&sequence)
        .map(|(&n, &p)| (1.0 / (n + 1) as f64, p))
        .collect();
    let last = *sequence.last().expect("nonempty");
    let (value, residual) = match pts.len() {
        1 => (last, f64::INFINITY),
        2 => {
            let lin = linear_intercept(pts[0], pts[1]);
            (lin, (lin - last).abs())
        }
        k => {
            let quad = quadratic_intercept([pts[k - 3], pts[k - 2], pts[k - 1]]);
            let lin = linear_intercept(pts[k - 2], pts[k - 1]);
            (quad, (quad - lin).abs())
        }
    };
    Ok(PressureEstimate {
        value,
        method: PressureMethod::EnumerationSequence,
        sizes,
        sequence,
        residual,
        converged: residual < 1e-2,
    })
}

fn linear_intercept((x0, y0): (f64, f64), (x1, y1): (f64, f64)) -> f64 {
    y0 + (y1 - y0) * (0.0 - x0) / (x1 - x0)
}

/// Single-site table, and pair tables along each axis.
struct NearestNeighbour {
    site: Vec<f64>,
    pair: Vec<Vec<f64>>,
}

fn split_nearest_neighbour(u: &Interaction) -> Result<NearestNeighbour> {
    if !u.is_nearest_neighbour() {
        return Err(Error::Unsupported(
            "transfer matrix needs single-site and nearest-neighbour pair terms".into(),
        ));
    }
    let q = u.alphabet();
    let d = u.dim();
    let mut pair = vec![vec![0.0; q * q]; d];
    for t in u.terms().iter().filter(|t| t.size() == 2) {
        let other = t.shape()[1];
        let axis = (0..d)
            .find(|&i| other == LatticeVector::unit(d, i))
            .ok_or_else(|| Error::Unsupported("unexpected pair shape".into()))?;
        for (x, e) in pair[axis].iter_mut().zip(t.table()) {
            *x += e;
        }
    }
    Ok(NearestNeighbour {
        site: single_site_energies(u),
        pair,
    })
}

/// Dominant eigenvalue (as a log) of the column transfer operator for a
/// free-edged strip of width `w`, transferring along axis 0.
pub fn strip_log_eigenvalue(u: &Interaction, w: usize) -> Result<f64> {
    let nn = split_nearest_neighbour(u)?;
    let q = u.alphabet();
    let d = u.dim();
    if d > 2 {
        return Err(Error::Unsupported("transfer matrix supports d <= 2".into()));
    }
    let w = if d == 1 { 1 } else { w };
    if w == 0 {
        return Err(Error::DomainTooSmall("strip width must be positive".into()));
    }
    let states = q
        .checked_pow(w as u32)
        .filter(|&s| s <= TRANSFER_STATES)
        .ok_or(Error::BudgetExceeded {
            needed: state_count(w, q),
            budget: TRANSFER_STATES as f64,
        })?;
    // Column energies (fields and transverse bonds), shifted.
    let mut digits = vec![0u8; w];
    let mut col = vec![0.0; states];
    for (s, e) in col.iter_mut().enumerate() {
        super::enumerate::decode(s as u64, q, &mut digits);
        for j in 0..w {
            *e += nn.site[digits[j] as usize];
            if d == 2 && j + 1 < w {
                let next = digits[j + 1] as usize;
                *e += nn.pair[1][digits[j] as usize * q + next];
            }
        }
    }
    let col_shift = col.iter().copied().fold(f64::INFINITY, f64::min);
    let col_w: Vec<f64> = col.iter().map(|e| (-(e - col_shift)).exp()).collect();
    let pair_shift = nn.pair[0].iter().copied().fold(f64::INFINITY, f64::min);
    let kernel: Vec<f64> = nn.pair[0]
        .iter()
        .map(|e| (-(e - pair_shift)).exp())
        .collect();

    let apply = |v: &[f64]| -> Vec<f64> {
        let mut cur: Vec<f64> = v.iter().zip(&col_w).map(|(x, c)| x * c).collect();
        let mut next = vec![0.0; states];
        for j in 0..w {
            let stride = q.pow((w - 1 - j) as u32);
            for (s, out) in next.iter_mut().enumerate() {
                let a = (s / stride) % q;
                let base = s - a * stride;
                let mut acc = 0.0;
                for b in 0..q {
                    acc += kernel[a * q + b] * cur[base + b * stride];
                }
                *out = acc;
            }
            std::mem::swap(&mut cur, &mut next);
        }
        cur
    };

    let mut v = vec![1.0 / states as f64; states];
    let mut lambda = 0.0;
    for it in 0..20_000 {
        let nv = apply(&v);
        let norm = crate::numerics::compensated_sum(nv.iter().copied());
        if !(norm > 0.0 && norm.is_finite()) {
            return Err(Error::Numerical("transfer operator lost positivity".into()));
        }
        let nv: Vec<f64> = nv.into_iter().map(|x| x / norm).collect();
        let moved = nv
            .iter()
            .zip(&v)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        let done = it > 2 && (norm - lambda).abs() <= 1e-12 * norm && moved < 1e-12;
        lambda = norm;
        v = nv;
        if done {
            break;
        }
    }
    Ok(lambda.ln() - col_shift - w as f64 * pair_shift)
}

fn transfer_strip(u: &Interaction, sizes: &[usize]) -> Result<PressureEstimate> {
    let q = u.alphabet();
    let widths: Vec<usize> = if u.dim() == 1 {
        vec![1]
    } else if sizes.is_empty() {
        (1..)
            .take_while(|&w| {
                q.checked_pow(w as u32)
                    .is_some_and(|s| s <= TRANSFER_STATES)
            })
            .collect()
    } else {
        sizes.to_vec()
    };
    if widths.is_empty() {
        return Err(Error::BudgetExceeded {
            needed: state_count(1, q),
            budget: TRANSFER_STATES as f64,
        });
    }
    let sequence = widths
        .iter()
        .map(|&w| Ok(strip_log_eigenvalue(u, w)? / w as f64))
        .collect::<Result<Vec<f64>>>()?;
    let k = widths.len();
    let step = |i: usize| {
        let (w1, w2) = (widths[i - 1] as f64, widths[i] as f64);
        (w2 * sequence[i] - w1 * sequence[i - 1]) / (w2 - w1)
    };
    // Residual: change between the last two Richardson steps.
    let (value, residual) = match k {
        1 => (sequence[0], if u.dim() == 1 { 0.0 } else { f64::INFINITY }),
        2 => (step(1), f64::INFINITY),
        _ => (step(k - 1), (step(k - 1) - step(k - 2)).abs()),
    };
    Ok(PressureEstimate {
        value,
        method: PressureMethod::TransferMatrixStrip,
        sizes: widths,
        sequence,
        residual,
        converged: residual < 1e-6,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Model;

    #[test]
    fn zero_interaction_every_size() {
        let u = Interaction::zero(2, 3);
        let p = pressure_with(&u, PressureMethod::EnumerationSequence, &[1, 2]).unwrap();
        for x in &p.sequence {
            assert!((x - 3f64.ln()).abs() < 1e-12);
        }
        assert!((pressure(&u).unwrap().value - 3f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn iid_pressure_is_zero() {
        let m = Model::iid(2, &[0.2, 0.5, 0.3]).unwrap();
        assert!(pressure(m.interaction()).unwrap().value.abs() < 1e-14);
        let e = pressure_with(
            m.interaction(),
            PressureMethod::EnumerationSequence,
            &[1, 2],
        )
        .unwrap();
        for x in &e.sequence {
            assert!(x.abs() < 1e-12);
        }
    }

    #[test]
    fn one_dimensional_ising() {
        for (bj, h) in [(0.3, 0.0), (0.8, 0.0), (0.5, 0.25)] {
            let m = Model::ising(1, bj, 1.0, h).unwrap();
            let p = pressure(m.interaction()).unwrap();
            // 2x2 transfer matrix eigenvalue.
            let exact = (bj.exp() * (h * bj).cosh()
                + (bj.exp().powi(2) * (h * bj).sinh().powi(2) + (-2.0 * bj).exp()).sqrt())
            .ln();
            assert!(
                (p.value - exact).abs() < 1e-12,
                "{bj} {h}: {} vs {exact}",
                p.value
            );
            if h == 0.0 {
                assert!((p.value - (2.0 * bj.cosh()).ln()).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn strip_width_three_matches_dense_matrix() {
        // Dense 8 x 8 transfer matrix for a free-edged strip of width 3.
        let m = Model::ising(2, 0.3, 1.0, 0.1).unwrap();
        let u = m.interaction();
        let nn = split_nearest_neighbour(u).unwrap();
        let spin = |s: usize, j: usize| (s >> (2 - j)) & 1;
        let mut t = [[0.0f64; 8]; 8];
        for (a, row) in t.iter_mut().enumerate() {
            for (b, cell) in row.iter_mut().enumerate() {
                let mut e = 0.0;
                for j in 0..3 {
                    e += nn.pair[0][spin(a, j) * 2 + spin(b, j)];
                    e += nn.site[spin(b, j)];
                    if j < 2 {
                        e += nn.pair[1][spin(b, j) * 2 + spin(b, j + 1)];
                    }
                }
                *cell = (-e).exp();
            }
        }
        let mut v = [1.0f64; 8];
        let mut lambda = 0.0;
        for _ in 0..2000 {
            let mut nv = [0.0; 8];
            for a in 0..8 {
                for b in 0..8 {
                    nv[a] += t[a][b] * v[b];
                }
            }
            lambda = nv.iter().sum::<f64>() / v.iter().sum::<f64>();
            let s: f64 = nv.iter().sum();
            v = nv.map(|x| x / s);
        }
        let got = strip_log_eigenvalue(u, 3).unwrap();
        assert!(
            (got - lambda.ln()).abs() < 1e-12,
            "{got} vs {}",
            lambda.ln()
        );
    }

    #[test]
    fn markov_product_pressure_is_zero() {
        let m = Model::markov_product(vec![vec![0.8, 0.2], vec![0.5, 0.5]]).unwrap();
        assert!(pressure(m.interaction()).unwrap().value.abs() < 1e-12);
    }

    #[test]
    fn two_dimensional_methods_agree() {
        let m = Model::ising(2, 0.2, 1.0, 0.0).unwrap();
        let tm = pressure_with(m.interaction(), PressureMethod::TransferMatrixStrip, &[]).unwrap();
        let en = pressure_with(m.interaction(), PressureMethod::EnumerationSequence, &[]).unwrap();
        assert!(tm.residual < 1e-8, "{tm:?}");
        assert!(
            (tm.value - en.value).abs() < 1e-3,
            "{} vs {}",
            tm.value,
            en.value
        );
    }

    #[test]
    fn onsager_square_lattice() {
        // Zero-field square-lattice free energy by a periodic midpoint rule.
        let k: f64 = 0.2;
        let m = 400;
        let h = 2.0 * std::f64::consts::PI / m as f64;
        let mut acc = 0.0;
        for i in 0..m {
            for j in 0..m {
                let (a, b) = ((i as f64 + 0.5) * h, (j as f64 + 0.5) * h);
                acc += ((2.0 * k).cosh().powi(2) - (2.0 * k).sinh() * (a.cos() + b.cos())).ln();
            }
        }
        let onsager = 2f64.ln() + acc * h * h / (8.0 * std::f64::consts::PI.powi(2));
        let m = Model::ising(2, k, 1.0, 0.0).unwrap();
        let tm = pressure(m.interaction()).unwrap();
        assert!(
            (tm.value - onsager).abs() < 1e-9,
            "{} vs {onsager}",
            tm.value
        );
    }
}
