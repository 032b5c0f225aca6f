//! Exact hitting-time laws by exhaustive enumeration of the window
//! `C_{K+n}`.
//!
//! The enumeration marks every placement `x in [0, K]^d` where the pattern
//! matches and reads all statistics off that mask. It shares no code with
//! the shell scanner in `stats`, which it is used to check.

use std::io::Write;

use serde::Serialize;

use super::enumerate::{check_budget, fold_states, state_count, CompiledEnergy};
use crate::error::{Error, Result};
use crate::lattice::{Cube, LatticeVector, Pattern};
use crate::model::{Model, ModelKind};

#[derive(Clone, Debug, Serialize)]
pub struct HittingLawTable {
    pub pattern_hash: String,
    pub n: usize,
    pub cap: usize,
    pub pattern_probability: f64,
    /// `Pr(tau_A <= k)` for `k = 0..=K`, placements with `|x| > 0`.
    pub cdf: Vec<f64>,
    /// Same with the origin placement allowed; equals `Pr(A present in C_{k+n})`.
    pub cdf_with_origin: Vec<f64>,
    /// `E N_k^A` (origin excluded / included).
    pub mean_count: Vec<f64>,
    pub mean_count_with_origin: Vec<f64>,
    /// `E (N_k^A)^2` (origin excluded / included).
    pub second_moment: Vec<f64>,
    pub second_moment_with_origin: Vec<f64>,
    /// Number of states enumerated.
    pub states: f64,
    pub method: String,
}

impl HittingLawTable {
    /// Writes `k,prob` rows (origin excluded).
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "k,prob")?;
        for (k, p) in self.cdf.iter().enumerate() {
            writeln!(w, "{k},{p}")?;
        }
        Ok(())
    }

    /// `Pr(tau_A > k)`.
    pub fn survival(&self, k: usize) -> f64 {
        1.0 - self.cdf[k.min(self.cap)]
    }
}

/// Log-weight of a full enumerated state.
type LogWeight = Box<dyn Fn(&[u8]) -> f64 + Sync + Send>;

#[derive(Clone, Default)]
struct Acc {
    cdf: Vec<f64>,
    cdf0: Vec<f64>,
    m1: Vec<f64>,
    m1o: Vec<f64>,
    m2: Vec<f64>,
    m2o: Vec<f64>,
    mass: f64,
}

impl Acc {
    fn new(k: usize) -> Self {
        Self {
            cdf: vec![0.0; k + 1],
            cdf0: vec![0.0; k + 1],
            m1: vec![0.0; k + 1],
            m1o: vec![0.0; k + 1],
            m2: vec![0.0; k + 1],
            m2o: vec![0.0; k + 1],
            mass: 0.0,
        }
    }

    fn merge(mut self, o: Acc) -> Acc {
        let add = |a: &mut Vec<f64>, b: &Vec<f64>| a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
        add(&mut self.cdf, &o.cdf);
        add(&mut self.cdf0, &o.cdf0);
        add(&mut self.m1, &o.m1);
        add(&mut self.m1o, &o.m1o);
        add(&mut self.m2, &o.m2);
        add(&mut self.m2o, &o.m2o);
        self.mass += o.mass;
        self
    }
}

/// Exact law of `tau_A` restricted to `k <= cap`.
pub fn brute_force_hitting_law(model: &Model, a: &Pattern, cap: usize) -> Result<HittingLawTable> {
    let d = model.dim();
    if a.dim() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: a.dim(),
        });
    }
    let q = model.alphabet();
    let n = a.side();
    let window = Cube::at_origin(d, cap + n);
    let m = window.axis_len();
    let placements = Cube::at_origin(d, cap);
    // For each placement: its shell `max_i x_i` and the window indices it reads.
    let place: Vec<(usize, bool, Vec<usize>)> = placements
        .sites()
        .map(|x| {
            let idx = a
                .cube()
                .sites()
                .map(|y| window.index_of(&(x + y)).expect("inside window"))
                .collect();
            (x.max_coord() as usize, x.is_zero(), idx)
        })
        .collect();
    let target = a.values().to_vec();

    // Log-weight of a full state and where the window lives inside it.
    let (sites, window_idx, weight): (usize, Vec<usize>, LogWeight) = match model.kind() {
        ModelKind::Iid { p } => {
            let lp: Vec<f64> = p.iter().map(|x| x.ln()).collect();
            (
                window.site_count(),
                (0..window.site_count()).collect(),
                Box::new(move |s: &[u8]| s.iter().map(|&v| lp[v as usize]).sum()),
            )
        }
        ModelKind::MarkovProduct { matrix, stationary } => {
            let lpi: Vec<f64> = stationary.iter().map(|x| x.ln()).collect();
            let lp: Vec<Vec<f64>> = matrix
                .iter()
                .map(|r| r.iter().map(|x| x.ln()).collect())
                .collect();
            (
                window.site_count(),
                (0..window.site_count()).collect(),
                Box::new(move |s: &[u8]| {
                    s.chunks(m)
                        .map(|row| {
                            lpi[row[0] as usize]
                                + row
                                    .windows(2)
                                    .map(|w| lp[w[0] as usize][w[1] as usize])
                                    .sum::<f64>()
                        })
                        .sum()
                }),
            )
        }
        _ => {
            let u = model.interaction();
            let len = m + 2 * u.range();
            let torus = Cube::at_origin(d, len - 1);
            check_budget(state_count(torus.site_count(), q))?;
            let ce = CompiledEnergy::torus(u, len)?;
            let idx = window
                .sites()
                .map(|y| torus.index_of(&y).expect("inside torus"))
                .collect();
            (
                torus.site_count(),
                idx,
                Box::new(move |s: &[u8]| -ce.energy(s)),
            )
        }
    };
    let is_gibbs = !matches!(
        model.kind(),
        ModelKind::Iid { .. } | ModelKind::MarkovProduct { .. }
    );
    let states = state_count(sites, q);
    check_budget(states)?;

    // Gibbs weights need normalizing; shift by the all-zero state's weight
    // to keep exponentials in range.
    let shift = if is_gibbs {
        weight(&vec![0u8; sites])
    } else {
        0.0
    };
    let acc = fold_states(
        sites,
        q,
        || Acc::new(cap),
        |acc, s| {
            let w = (weight(s) - shift).exp();
            acc.mass += w;
            let mut first = usize::MAX;
            let mut first0 = usize::MAX;
            let mut count = vec![0u32; cap + 1];
            let mut count0 = vec![0u32; cap + 1];
            for (shell, origin, idx) in &place {
                if idx
                    .iter()
                    .zip(&target)
                    .all(|(&i, &t)| s[window_idx[i]] == t)
                {
                    count0[*shell] += 1;
                    first0 = first0.min(*shell);
                    if !origin {
                        count[*shell] += 1;
                        first = first.min(*shell);
                    }
                }
            }
            let (mut c, mut c0) = (0u32, 0u32);
            for k in 0..=cap {
                c += count[k];
                c0 += count0[k];
                if first <= k {
                    acc.cdf[k] += w;
                }
                if first0 <= k {
                    acc.cdf0[k] += w;
                }
                acc.m1[k] += w * c as f64;
                acc.m1o[k] += w * c0 as f64;
                acc.m2[k] += w * (c as f64) * (c as f64);
                acc.m2o[k] += w * (c0 as f64) * (c0 as f64);
            }
        },
        Acc::merge,
    )?;
    let z = acc.mass;
    let norm = |v: Vec<f64>| v.into_iter().map(|x| x / z).collect::<Vec<_>>();
    // Pattern probability under the same law: the origin placement's mean.
    let pattern_probability = acc.m1o[0] / z;
    Ok(HittingLawTable {
        pattern_hash: a.hash_hex(),
        n,
        cap,
        pattern_probability,
        cdf: norm(acc.cdf),
        cdf_with_origin: norm(acc.cdf0),
        mean_count: norm(acc.m1),
        mean_count_with_origin: norm(acc.m1o),
        second_moment: norm(acc.m2),
        second_moment_with_origin: norm(acc.m2o),
        states,
        method: if is_gibbs {
            format!(
                "torus_enumeration(L={})",
                m + 2 * model.interaction().range()
            )
        } else {
            "window_enumeration".into()
        },
    })
}

/// Placement count of `C_k` shifts, `(k+1)^d`.
pub fn placements_upto(d: usize, k: usize) -> f64 {
    ((k + 1) as f64).powi(d as i32)
}

/// Exact `Pr(B_n)`: total probability of the badly self-repeating
/// `n`-patterns, by full pattern enumeration.
pub fn bad_pattern_mass(model: &Model, n: usize) -> Result<f64> {
    let d = model.dim();
    let q = model.alphabet();
    let sites = (n + 1).pow(d as u32);
    let ModelKind::Iid { p } = model.kind() else {
        return Err(Error::Unsupported(
            "bad-pattern mass is computed for iid models".into(),
        ));
    };
    let lp: Vec<f64> = p.iter().map(|x| x.ln()).collect();
    let shifts = crate::stats::bad_shifts(d, n);
    let cube = Cube::at_origin(d, n);
    let sites_v: Vec<LatticeVector> = cube.sites().collect();
    // Overlap index pairs (y, y - x) for each candidate shift.
    let pairs: Vec<Vec<(usize, usize)>> = shifts
        .iter()
        .map(|x| {
            sites_v
                .iter()
                .enumerate()
                .filter_map(|(i, y)| cube.index_of(&(*y - *x)).map(|j| (i, j)))
                .collect()
        })
        .collect();
    fold_states(
        sites,
        q,
        || 0.0f64,
        |acc, s| {
            let bad = pairs.iter().any(|ps| ps.iter().all(|&(i, j)| s[i] == s[j]));
            if bad {
                *acc += s.iter().map(|&v| lp[v as usize]).sum::<f64>().exp();
            }
        },
        |a, b| a + b,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_shape() {
        let m = Model::bernoulli(2, 0.5).unwrap();
        let a = Pattern::new(2, 1, 2, vec![0, 1, 1, 0]).unwrap();
        let t = brute_force_hitting_law(&m, &a, 2).unwrap();
        assert_eq!(t.cdf[0], 0.0);
        assert!(t.cdf.windows(2).all(|w| w[0] <= w[1]));
        assert!((t.pattern_probability - 1.0 / 16.0).abs() < 1e-14);
        assert!((t.cdf_with_origin[0] - 1.0 / 16.0).abs() < 1e-14);
        assert_eq!(t.states, 65536.0);
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        assert!(String::from_utf8(buf).unwrap().starts_with("k,prob\n0,0\n"));
    }

    #[test]
    fn one_dimensional_hand_count() {
        // d=1, pattern "1" (n=0), iid p: tau <= k iff a 1 among sites 1..=k.
        let p = 0.3;
        let m = Model::bernoulli(1, p).unwrap();
        let a = Pattern::new(1, 0, 2, vec![1]).unwrap();
        let t = brute_force_hitting_law(&m, &a, 5).unwrap();
        for k in 0..=5 {
            let exact = 1.0 - (1.0 - p).powi(k as i32);
            assert!((t.cdf[k] - exact).abs() < 1e-12);
            assert!((t.mean_count_with_origin[k] - (k + 1) as f64 * p).abs() < 1e-12);
        }
    }

    #[test]
    fn gibbs_table_is_normalized() {
        let m = Model::ising(1, 0.4, 1.0, 0.0).unwrap();
        let a = Pattern::new(1, 1, 2, vec![1, 1]).unwrap();
        let t = brute_force_hitting_law(&m, &a, 4).unwrap();
        // The torus is symmetric, so every placement sees the same marginal.
        for k in 0..=4 {
            let expected = (k + 1) as f64 * t.pattern_probability;
            assert!((t.mean_count_with_origin[k] - expected).abs() < 1e-12);
        }
    }
}
