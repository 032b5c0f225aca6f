//! Occurrence statistics on concrete configurations: first occurrence,
//! occurrence counts, repetition and waiting times, badly self-repeating
//! patterns, the `lambda` estimate and the factorization diagnostic.
//!
//! Placements `x` are scanned shell by shell (`max_i x_i = k` for
//! `k = 1, 2, ...`) and lexicographically inside a shell; the first match
//! ends the scan.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{Configuration, Cube, LatticeVector, Pattern};

/// Outcome of a capped scan.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Hit {
    Found(usize),
    Censored(usize),
}

impl Hit {
    pub fn value(&self) -> Option<usize> {
        match self {
            Hit::Found(k) => Some(*k),
            Hit::Censored(_) => None,
        }
    }

    pub fn is_censored(&self) -> bool {
        matches!(self, Hit::Censored(_))
    }

    /// The value, with censored draws reported as the cap.
    pub fn capped(&self) -> usize {
        match self {
            Hit::Found(k) | Hit::Censored(k) => *k,
        }
    }
}

/// Row-major view of a configuration's storage for fast placement checks.
struct Scanner<'a> {
    values: &'a [u8],
    storage: Cube,
    strides: Vec<usize>,
    offsets: Vec<usize>,
    target: &'a [u8],
}

impl<'a> Scanner<'a> {
    fn new(a: &'a Pattern, sigma: &'a Configuration, cap: usize) -> Result<Self> {
        if a.dim() != sigma.dim() {
            return Err(Error::DimensionMismatch {
                expected: sigma.dim(),
                got: a.dim(),
            });
        }
        let storage = sigma.domain().storage_cube();
        let need = Cube::at_origin(a.dim(), cap + a.side());
        if !storage.contains_cube(&need) {
            return Err(Error::DomainTooSmall(format!(
                "domain must contain C_{} for cap {cap} and n = {}",
                cap + a.side(),
                a.side()
            )));
        }
        let d = a.dim();
        let len = storage.axis_len();
        let strides: Vec<usize> = (0..d).map(|i| len.pow((d - 1 - i) as u32)).collect();
        let offsets = a
            .cube()
            .sites()
            .map(|y| {
                y.coords()
                    .iter()
                    .zip(&strides)
                    .map(|(&c, s)| c as usize * s)
                    .sum()
            })
            .collect();
        Ok(Self {
            values: sigma.values(),
            storage,
            strides,
            offsets,
            target: a.values(),
        })
    }

    fn base(&self, x: &[i64]) -> usize {
        x.iter()
            .zip(self.storage.origin.coords())
            .zip(&self.strides)
            .map(|((&c, &o), s)| (c - o) as usize * s)
            .sum()
    }

    fn matches(&self, x: &[i64]) -> bool {
        let b = self.base(x);
        self.offsets
            .iter()
            .zip(self.target)
            .all(|(&o, &t)| self.values[b + o] == t)
    }
}

/// Calls `f` on every `x in [0,k]^d` with `max_i x_i = k`, lexicographically,
/// until it returns `true`.
fn shell_any<F: FnMut(&[i64]) -> bool>(d: usize, k: i64, f: &mut F) -> bool {
    fn rec<F: FnMut(&[i64]) -> bool>(
        x: &mut Vec<i64>,
        d: usize,
        k: i64,
        has_k: bool,
        f: &mut F,
    ) -> bool {
        let i = x.len();
        if i == d {
            return f(x);
        }
        let last = i + 1 == d;
        for v in 0..=k {
            if last && !has_k && v != k {
                continue;
            }
            x.push(v);
            let hit = rec(x, d, k, has_k || v == k, f);
            x.pop();
            if hit {
                return true;
            }
        }
        false
    }
    rec(&mut Vec::with_capacity(d), d, k, false, f)
}

/// Smallest shell `k` in `from..=to` holding a match with `|x| > 0`.
pub fn scan_shells(
    a: &Pattern,
    sigma: &Configuration,
    from: usize,
    to: usize,
) -> Result<Option<usize>> {
    let s = Scanner::new(a, sigma, to)?;
    let d = a.dim();
    for k in from.max(1)..=to {
        if shell_any(d, k as i64, &mut |x| s.matches(x)) {
            return Ok(Some(k));
        }
    }
    Ok(None)
}

/// `tau_A(sigma)` with cap `K`.
pub fn first_occurrence(a: &Pattern, sigma: &Configuration, cap: usize) -> Result<Hit> {
    Ok(match scan_shells(a, sigma, 1, cap)? {
        Some(k) => Hit::Found(k),
        None => Hit::Censored(cap),
    })
}

/// `N_k^A(sigma)`: matching placements `x in [0, k]^d`.
pub fn count_occurrences(
    a: &Pattern,
    sigma: &Configuration,
    k: usize,
    include_origin: bool,
) -> Result<u64> {
    let s = Scanner::new(a, sigma, k)?;
    let mut count = 0;
    for x in Cube::at_origin(a.dim(), k).sites() {
        if !include_origin && x.is_zero() {
            continue;
        }
        if s.matches(x.coords()) {
            count += 1;
        }
    }
    Ok(count)
}

/// `R_n(sigma)`: first occurrence of the initial `n`-pattern.
pub fn first_repetition(sigma: &Configuration, n: usize, cap: usize) -> Result<Hit> {
    let a = sigma.initial_pattern(n)?;
    first_occurrence(&a, sigma, cap)
}

/// `W_n(xi, sigma)`: first occurrence of `xi`'s initial `n`-pattern in `sigma`.
pub fn waiting_time(
    xi: &Configuration,
    sigma: &Configuration,
    n: usize,
    cap: usize,
) -> Result<Hit> {
    let a = xi.initial_pattern(n)?;
    first_occurrence(&a, sigma, cap)
}

/// Every `x in Z^d` with `0 < |x| <= n/2`, any signs.
pub fn bad_shifts(d: usize, n: usize) -> Vec<LatticeVector> {
    let r = (n / 2) as i64;
    if r == 0 {
        return Vec::new();
    }
    Cube::new(LatticeVector::splat(d, -r), 2 * r as usize)
        .sites()
        .filter(|x| !x.is_zero() && x.norm() <= r)
        .collect()
}

/// Whether `A` is consistent with a translate of itself by some `x` with
/// `0 < |x| <= n/2`.
pub fn is_badly_self_repeating(a: &Pattern) -> bool {
    let cube = a.cube();
    bad_shifts(a.dim(), a.side()).iter().any(|x| {
        cube.sites().all(|y| match cube.index_of(&(y - *x)) {
            Some(j) => a.values()[cube.index_of(&y).expect("in cube")] == a.values()[j],
            None => true,
        })
    })
}

/// Placement volume at scale `k`: nonzero shifts in `[0,k]^d`.
pub fn placement_volume(d: usize, k: usize) -> f64 {
    ((k + 1) as f64).powi(d as i32) - 1.0
}

/// The scale `k(t)`: largest `k` whose placement volume is at most `t`.
pub fn scale_for(d: usize, t: f64) -> usize {
    let mut k = 0;
    while placement_volume(d, k + 1) <= t {
        k += 1;
    }
    k
}

#[derive(Clone, Debug, Serialize)]
pub struct LambdaEstimate {
    pub lambda: f64,
    /// The `t` used and the scale `k` it maps to.
    pub t: f64,
    pub k: usize,
    pub survival: f64,
    pub pattern_probability: f64,
}

/// `lambda_{A,t} = -log Pr(tau_A > k) / (V_k Pr(A))` with `k = scale_for(t)`
/// and `V_k = (k+1)^d - 1` the placement volume actually scanned.
pub fn lambda_from_survival(
    d: usize,
    survival: f64,
    k: usize,
    pattern_probability: f64,
) -> Result<f64> {
    if !(survival > 0.0 && survival < 1.0) {
        return Err(Error::Uninformative(format!(
            "survival {survival} at k = {k}; choose a different t"
        )));
    }
    let v = placement_volume(d, k);
    if v * pattern_probability > 0.5 + 1e-12 {
        return Err(Error::OutOfDomain(format!(
            "t Pr(A) = {} exceeds 1/2",
            v * pattern_probability
        )));
    }
    Ok(-survival.ln() / (v * pattern_probability))
}

/// `lambda` from an empirical or exact survival function `surv(k)`.
pub fn lambda_estimate<F: Fn(usize) -> f64>(
    d: usize,
    t: f64,
    pattern_probability: f64,
    surv: F,
) -> Result<LambdaEstimate> {
    let k = scale_for(d, t);
    if k == 0 {
        return Err(Error::Uninformative(format!("t = {t} covers no placement")));
    }
    let s = surv(k);
    Ok(LambdaEstimate {
        lambda: lambda_from_survival(d, s, k, pattern_probability)?,
        t,
        k,
        survival: s,
        pattern_probability,
    })
}

/// The default scale `f_A = floor(Pr(A)^(-gamma))`.
pub fn default_scale(pattern_probability: f64, gamma: f64) -> f64 {
    pattern_probability.powf(-gamma).floor()
}

/// Whether `A` is absent from every placement inside `cube`.
pub fn absent_from(a: &Pattern, sigma: &Configuration, cube: &Cube) -> bool {
    !crate::lattice::pattern_present(a, sigma, cube, crate::lattice::Wrap::None)
}

#[derive(Clone, Debug, Serialize)]
pub struct Factorization {
    pub lhs: f64,
    pub rhs: f64,
    pub gap: f64,
    /// Half-width of a 95% interval for `gap` (delta method).
    pub ci: f64,
}

/// Compares `Pr(A absent from every cube)` with `Pr(A absent from one)^k`
/// over a set of sampled configurations.
pub fn factorization_diagnostic(
    a: &Pattern,
    samples: &[Configuration],
    cubes: &[Cube],
) -> Result<Factorization> {
    if cubes.is_empty() || samples.is_empty() {
        return Err(Error::OutOfDomain("need samples and cubes".into()));
    }
    for s in samples {
        for c in cubes {
            if !s.domain().storage_cube().contains_cube(c) {
                return Err(Error::DomainTooSmall(format!(
                    "cube at {} leaves the sample",
                    c.origin
                )));
            }
        }
    }
    let m = samples.len() as f64;
    let k = cubes.len() as i32;
    let mut all = 0usize;
    let mut single = 0usize;
    for s in samples {
        let absent: Vec<bool> = cubes.iter().map(|c| absent_from(a, s, c)).collect();
        if absent.iter().all(|&b| b) {
            all += 1;
        }
        single += absent.iter().filter(|&&b| b).count();
    }
    let lhs = all as f64 / m;
    // Per-cube absence pooled over the (identically distributed) cubes.
    let p1 = single as f64 / (m * k as f64);
    let rhs = p1.powi(k);
    let var_l = lhs * (1.0 - lhs) / m;
    let deriv = k as f64 * p1.powi(k - 1);
    let var_r = deriv * deriv * p1 * (1.0 - p1) / (m * k as f64);
    Ok(Factorization {
        lhs,
        rhs,
        gap: (lhs - rhs).abs(),
        ci: 1.96 * (var_l + var_r).sqrt(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::Domain;
    use proptest::prelude::*;

    fn square(side: usize, values: Vec<u8>) -> Configuration {
        Configuration::new(Domain::Cube(Cube::at_origin(2, side)), 2, values).unwrap()
    }

    /// Reference scan: every `x in [0,K]^d`, no shells.
    fn naive_tau(a: &Pattern, s: &Configuration, cap: usize) -> Option<usize> {
        Cube::at_origin(a.dim(), cap)
            .sites()
            .filter(|x| !x.is_zero())
            .filter(|x| {
                s.pattern_at(x, a.side(), crate::lattice::Wrap::None)
                    .unwrap()
                    == *a
            })
            .map(|x| x.max_coord() as usize)
            .min()
    }

    #[test]
    fn constant_field_hits_at_one() {
        let s = Configuration::constant(Domain::Cube(Cube::at_origin(2, 6)), 2, 1).unwrap();
        let a = Pattern::constant(2, 2, 2, 1).unwrap();
        assert_eq!(first_occurrence(&a, &s, 4).unwrap(), Hit::Found(1));
        assert_eq!(first_repetition(&s, 2, 4).unwrap(), Hit::Found(1));
        assert_eq!(waiting_time(&s, &s, 2, 4).unwrap(), Hit::Found(1));
        assert_eq!(count_occurrences(&a, &s, 3, true).unwrap(), 16);
        assert_eq!(count_occurrences(&a, &s, 3, false).unwrap(), 15);
    }

    #[test]
    fn absent_symbol_is_censored() {
        let s = Configuration::constant(Domain::Cube(Cube::at_origin(2, 6)), 3, 0).unwrap();
        let a = Pattern::new(2, 0, 3, vec![2]).unwrap();
        assert_eq!(first_occurrence(&a, &s, 6).unwrap(), Hit::Censored(6));
    }

    #[test]
    fn small_domain_is_an_error() {
        let s = Configuration::constant(Domain::Cube(Cube::at_origin(2, 3)), 2, 0).unwrap();
        let a = Pattern::constant(2, 1, 2, 0).unwrap();
        assert!(matches!(
            first_occurrence(&a, &s, 3),
            Err(Error::DomainTooSmall(_))
        ));
        assert!(first_occurrence(&a, &s, 2).is_ok());
    }

    #[test]
    fn listed_six_by_six_repetition() {
        #[rustfmt::skip]
        let v = vec![
            1, 0, 1, 1, 0, 0,
            0, 1, 1, 0, 1, 0,
            1, 1, 0, 0, 1, 1,
            0, 1, 0, 1, 1, 0,
            1, 0, 0, 1, 0, 1,
            1, 1, 1, 0, 0, 0,
        ];
        let s = square(5, v);
        // Initial 1-pattern [1,0;0,1] next appears at x = (0,2)? Rows 0-1,
        // columns 2-3: [1,1;1,0] no. Scan by hand through shells:
        // k=1: (0,1):[0,1;1,1] (1,0):[0,1;1,1] (1,1):[1,1;1,0] none.
        // k=2: (0,2):[1,1;1,0] (1,2):[1,0;0,0] (2,0):[1,1;0,1] (2,1):[1,0;1,0]
        //      (2,2):[0,0;0,1] none.
        // k=3: (0,3):[1,0;0,1] matches.
        assert_eq!(first_repetition(&s, 1, 4).unwrap(), Hit::Found(3));
        let a = s.initial_pattern(1).unwrap();
        assert_eq!(naive_tau(&a, &s, 4), Some(3));
    }

    #[test]
    fn badly_self_repeating_examples() {
        assert!(is_badly_self_repeating(
            &Pattern::constant(2, 2, 2, 1).unwrap()
        ));
        assert!(!is_badly_self_repeating(
            &Pattern::constant(2, 1, 2, 1).unwrap()
        ));
        assert!(bad_shifts(2, 1).is_empty());
        // |x| <= 1 for n = 2, 3: four axis shifts.
        assert_eq!(bad_shifts(2, 2).len(), 4);
        assert_eq!(bad_shifts(2, 4).len(), 12);
        // A single 1 at the origin conflicts with every same-sign shift but
        // not with mixed-sign ones such as (1,-1), whose overlap is all 0.
        let mut v = vec![0u8; 25];
        v[0] = 1;
        let a = Pattern::new(2, 4, 2, v).unwrap();
        assert!(is_badly_self_repeating(&a));
        let only_same_sign = bad_shifts(2, 4).into_iter().filter(|x| {
            let c = x.coords();
            c.iter().all(|&z| z >= 0) || c.iter().all(|&z| z <= 0)
        });
        let cube = a.cube();
        for x in only_same_sign {
            let consistent = cube.sites().all(|y| match cube.index_of(&(y - x)) {
                Some(j) => a.values()[cube.index_of(&y).unwrap()] == a.values()[j],
                None => true,
            });
            assert!(!consistent, "{x:?}");
        }
    }

    #[test]
    fn lambda_from_exact_survival() {
        assert!(lambda_from_survival(2, 1.0, 2, 0.01).is_err());
        assert!(lambda_from_survival(2, 0.0, 2, 0.01).is_err());
        let l = lambda_from_survival(2, 0.9, 2, 0.01).unwrap();
        assert!((l - (-(0.9f64.ln()) / 0.08)).abs() < 1e-12);
        assert_eq!(scale_for(2, 8.0), 2);
        assert_eq!(scale_for(2, 7.9), 1);
    }

    #[test]
    fn single_cube_factorization_is_exact() {
        let s = vec![Configuration::constant(Domain::Cube(Cube::at_origin(2, 4)), 2, 0).unwrap()];
        let a = Pattern::constant(2, 1, 2, 1).unwrap();
        let f = factorization_diagnostic(&a, &s, &[Cube::at_origin(2, 2)]).unwrap();
        assert_eq!(f.gap, 0.0);
    }

    fn arb_field() -> impl Strategy<Value = (Configuration, Pattern)> {
        (
            proptest::collection::vec(0u8..2, 36),
            proptest::collection::vec(0u8..2, 4),
        )
            .prop_map(|(v, p)| (square(5, v), Pattern::new(2, 1, 2, p).unwrap()))
    }

    proptest! {
        #[test]
        fn shell_scan_matches_naive((s, a) in arb_field()) {
            let got = first_occurrence(&a, &s, 4).unwrap().value();
            prop_assert_eq!(got, naive_tau(&a, &s, 4));
        }

        #[test]
        fn hit_iff_count_positive((s, a) in arb_field(), k in 0usize..=4) {
            let tau = first_occurrence(&a, &s, 4).unwrap();
            let hit = matches!(tau, Hit::Found(t) if t <= k);
            prop_assert_eq!(hit, count_occurrences(&a, &s, k, false).unwrap() >= 1);
        }

        #[test]
        fn counts_grow_with_k((s, a) in arb_field()) {
            let c: Vec<u64> = (0..=4).map(|k| count_occurrences(&a, &s, k, true).unwrap()).collect();
            prop_assert!(c.windows(2).all(|w| w[0] <= w[1]));
        }

        #[test]
        fn scan_is_translation_consistent((s, a) in arb_field(), dx in 0i64..2, dy in 0i64..2) {
            // Embed the field at offset (dx, dy) inside a larger cube and scan
            // the shifted window.
            let shift = LatticeVector::new(&[dx, dy]).unwrap();
            let moved = s.translate(&(-shift)).unwrap();
            let back = moved.translate(&shift).unwrap();
            prop_assert_eq!(
                first_occurrence(&a, &back, 4).unwrap(),
                first_occurrence(&a, &s, 4).unwrap()
            );
        }

        #[test]
        fn restrict_translate_consistency(v in proptest::collection::vec(0u8..2, 16), x0 in 0i64..3, x1 in 0i64..3) {
            let s = square(3, v);
            let x = LatticeVector::new(&[x0, x1]).unwrap();
            let n = (3 - x0.max(x1)) as usize;
            let p = s.translate(&x).unwrap().restrict(&Cube::at_origin(2, n)).unwrap();
            for y in Cube::at_origin(2, n).sites() {
                prop_assert_eq!(p.get(&y), s.get(&(x + y)));
            }
        }

        #[test]
        fn presence_is_monotone_and_covariant((s, a) in arb_field(), ox in 0i64..2, oy in 0i64..2, side in 1usize..4) {
            use crate::lattice::{pattern_present, Wrap};
            let small = Cube::new(LatticeVector::new(&[ox, oy]).unwrap(), side);
            let big = Cube::new(LatticeVector::new(&[ox, oy]).unwrap(), side + 1);
            if pattern_present(&a, &s, &small, Wrap::None) {
                prop_assert!(pattern_present(&a, &s, &big, Wrap::None));
            }
            let x = LatticeVector::new(&[1, 1]).unwrap();
            let t = s.translate(&x).unwrap();
            prop_assert_eq!(
                pattern_present(&a, &t, &small.translate(&(-x)), Wrap::None),
                pattern_present(&a, &s, &small, Wrap::None)
            );
        }
    }
}
