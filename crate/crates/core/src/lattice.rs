//! Lattice geometry and configurations on finite windows of `Z^d`.
//!
//! A [`Cube`] with side `n` covers `origin + [0, n]^d`, so it holds
//! `(n + 1)^d` sites. Site storage is row-major with axis 0 slowest.
//! Tori are supported as a sampling convenience; pattern placements on a
//! torus never wrap unless a caller asks for it with [`Wrap::Periodic`].

use std::fmt;
use std::ops::{Add, Neg, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MAX_DIM: usize = 3;

/// An integer vector of `Z^d`, `1 <= d <= 3`.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct LatticeVector {
    dim: u8,
    coords: [i64; MAX_DIM],
}

impl LatticeVector {
    pub fn new(coords: &[i64]) -> Result<Self> {
        let dim = coords.len();
        if !(1..=MAX_DIM).contains(&dim) {
            return Err(Error::UnsupportedDimension(dim));
        }
        let mut c = [0; MAX_DIM];
        c[..dim].copy_from_slice(coords);
        Ok(Self {
            dim: dim as u8,
            coords: c,
        })
    }

    pub fn zero(dim: usize) -> Self {
        assert!((1..=MAX_DIM).contains(&dim), "dimension {dim} unsupported");
        Self {
            dim: dim as u8,
            coords: [0; MAX_DIM],
        }
    }

    pub fn unit(dim: usize, axis: usize) -> Self {
        let mut v = Self::zero(dim);
        v.coords[axis] = 1;
        v
    }

    /// The diagonal vector `(z, ..., z)`.
    pub fn splat(dim: usize, z: i64) -> Self {
        let mut v = Self::zero(dim);
        v.coords[..dim].iter_mut().for_each(|c| *c = z);
        v
    }

    pub fn dim(&self) -> usize {
        self.dim as usize
    }

    pub fn coords(&self) -> &[i64] {
        &self.coords[..self.dim as usize]
    }

    pub fn get(&self, axis: usize) -> i64 {
        self.coords[axis]
    }

    pub fn set(&mut self, axis: usize, value: i64) {
        assert!(axis < self.dim());
        self.coords[axis] = value;
    }

    /// The l1 norm `sum |x_i|`.
    pub fn norm(&self) -> i64 {
        self.coords().iter().map(|c| c.abs()).sum()
    }

    pub fn max_coord(&self) -> i64 {
        self.coords().iter().copied().max().unwrap_or(0)
    }

    pub fn is_zero(&self) -> bool {
        self.coords().iter().all(|&c| c == 0)
    }

    pub fn checked_add(&self, other: &Self) -> Result<Self> {
        self.same_dim(other)?;
        Ok(*self + *other)
    }

    pub fn checked_sub(&self, other: &Self) -> Result<Self> {
        self.same_dim(other)?;
        Ok(*self - *other)
    }

    pub fn same_dim(&self, other: &Self) -> Result<()> {
        if self.dim != other.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: other.dim(),
            });
        }
        Ok(())
    }

    pub fn l1_distance(&self, other: &Self) -> i64 {
        (*self - *other).norm()
    }
}

impl Add for LatticeVector {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        debug_assert_eq!(self.dim, rhs.dim);
        let mut out = self;
        for i in 0..self.dim() {
            out.coords[i] += rhs.coords[i];
        }
        out
    }
}

impl Sub for LatticeVector {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        debug_assert_eq!(self.dim, rhs.dim);
        let mut out = self;
        for i in 0..self.dim() {
            out.coords[i] -= rhs.coords[i];
        }
        out
    }
}

impl Neg for LatticeVector {
    type Output = Self;
    fn neg(self) -> Self {
        let mut out = self;
        for i in 0..self.dim() {
            out.coords[i] = -out.coords[i];
        }
        out
    }
}

impl fmt::Debug for LatticeVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", self.coords())
    }
}

impl fmt::Display for LatticeVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, c) in self.coords().iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{c}")?;
        }
        write!(f, ")")
    }
}

/// The cube `origin + [0, side]^d`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Cube {
    pub origin: LatticeVector,
    pub side: usize,
}

impl Cube {
    pub fn new(origin: LatticeVector, side: usize) -> Self {
        Self { origin, side }
    }

    /// `C_n = [0, n]^d`.
    pub fn at_origin(dim: usize, side: usize) -> Self {
        Self::new(LatticeVector::zero(dim), side)
    }

    pub fn dim(&self) -> usize {
        self.origin.dim()
    }

    /// Sites per axis, `side + 1`.
    pub fn axis_len(&self) -> usize {
        self.side + 1
    }

    pub fn site_count(&self) -> usize {
        self.axis_len().pow(self.dim() as u32)
    }

    pub fn contains(&self, x: &LatticeVector) -> bool {
        x.dim() == self.dim()
            && (0..self.dim()).all(|i| {
                let rel = x.get(i) - self.origin.get(i);
                rel >= 0 && rel <= self.side as i64
            })
    }

    pub fn contains_cube(&self, other: &Cube) -> bool {
        other.dim() == self.dim()
            && (0..self.dim()).all(|i| {
                let lo = other.origin.get(i) - self.origin.get(i);
                lo >= 0 && lo + other.side as i64 <= self.side as i64
            })
    }

    pub fn translate(&self, x: &LatticeVector) -> Cube {
        Cube::new(self.origin + *x, self.side)
    }

    /// Row-major index of a site (which must lie in the cube).
    pub fn index_of(&self, x: &LatticeVector) -> Option<usize> {
        if !self.contains(x) {
            return None;
        }
        let len = self.axis_len();
        let mut idx = 0usize;
        for i in 0..self.dim() {
            idx = idx * len + (x.get(i) - self.origin.get(i)) as usize;
        }
        Some(idx)
    }

    pub fn site_at(&self, mut index: usize) -> LatticeVector {
        let len = self.axis_len();
        let mut v = self.origin;
        for i in (0..self.dim()).rev() {
            v.set(i, self.origin.get(i) + (index % len) as i64);
            index /= len;
        }
        v
    }

    /// Sites in row-major order.
    pub fn sites(&self) -> impl Iterator<Item = LatticeVector> {
        let c = *self;
        (0..c.site_count()).map(move |i| c.site_at(i))
    }

    /// Minimal l1 distance between the two cubes' site sets.
    pub fn distance(&self, other: &Cube) -> i64 {
        (0..self.dim())
            .map(|i| {
                let (a0, a1) = (self.origin.get(i), self.origin.get(i) + self.side as i64);
                let (b0, b1) = (other.origin.get(i), other.origin.get(i) + other.side as i64);
                if b0 > a1 {
                    b0 - a1
                } else if a0 > b1 {
                    a0 - b1
                } else {
                    0
                }
            })
            .sum()
    }
}

/// Whether pattern placements may wrap around a periodic domain.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Wrap {
    #[default]
    None,
    Periodic,
}

/// The support of a [`Configuration`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Domain {
    Cube(Cube),
    /// `[0, len)^d` with periodic identification.
    Torus {
        dim: usize,
        len: usize,
    },
}

impl Domain {
    pub fn dim(&self) -> usize {
        match self {
            Domain::Cube(c) => c.dim(),
            Domain::Torus { dim, .. } => *dim,
        }
    }

    pub fn site_count(&self) -> usize {
        match self {
            Domain::Cube(c) => c.site_count(),
            Domain::Torus { dim, len } => len.pow(*dim as u32),
        }
    }

    /// The cube of stored sites (`[0, len-1]^d` for a torus).
    pub fn storage_cube(&self) -> Cube {
        match self {
            Domain::Cube(c) => *c,
            Domain::Torus { dim, len } => Cube::at_origin(*dim, len - 1),
        }
    }

    pub fn is_torus(&self) -> bool {
        matches!(self, Domain::Torus { .. })
    }
}

/// A symbol assignment on a finite cube or torus.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Configuration {
    domain: Domain,
    alphabet: usize,
    values: Vec<u8>,
}

impl Configuration {
    pub fn new(domain: Domain, alphabet: usize, values: Vec<u8>) -> Result<Self> {
        if !(1..=256).contains(&alphabet) {
            return Err(Error::InvalidModel(format!(
                "alphabet size {alphabet} outside 1..=256"
            )));
        }
        if let Domain::Torus { len, .. } = domain {
            if len == 0 {
                return Err(Error::DomainTooSmall("torus of length 0".into()));
            }
        }
        if values.len() != domain.site_count() {
            return Err(Error::DomainTooSmall(format!(
                "{} values for {} sites",
                values.len(),
                domain.site_count()
            )));
        }
        if let Some(&bad) = values.iter().find(|&&v| v as usize >= alphabet) {
            return Err(Error::SymbolOutOfRange {
                symbol: bad as usize,
                alphabet,
            });
        }
        Ok(Self {
            domain,
            alphabet,
            values,
        })
    }

    pub fn constant(domain: Domain, alphabet: usize, symbol: u8) -> Result<Self> {
        Self::new(domain, alphabet, vec![symbol; domain.site_count()])
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn dim(&self) -> usize {
        self.domain.dim()
    }

    pub fn alphabet(&self) -> usize {
        self.alphabet
    }

    pub fn values(&self) -> &[u8] {
        &self.values
    }

    /// Symbol at `x`; periodic domains wrap.
    pub fn get(&self, x: &LatticeVector) -> Option<u8> {
        self.get_with(x, Wrap::Periodic)
    }

    /// Symbol at `x`; with [`Wrap::None`] torus sites outside `[0, len)^d`
    /// are treated as absent.
    pub fn get_with(&self, x: &LatticeVector, wrap: Wrap) -> Option<u8> {
        if x.dim() != self.dim() {
            return None;
        }
        match self.domain {
            Domain::Cube(c) => c.index_of(x).map(|i| self.values[i]),
            Domain::Torus { dim, len } => {
                let l = len as i64;
                let mut idx = 0usize;
                for i in 0..dim {
                    let c = x.get(i);
                    let c = match wrap {
                        Wrap::Periodic => c.rem_euclid(l),
                        Wrap::None if (0..l).contains(&c) => c,
                        Wrap::None => return None,
                    };
                    idx = idx * len + c as usize;
                }
                Some(self.values[idx])
            }
        }
    }

    /// `result(y) = self(x + y)`. A cube domain is shifted by `-x`; a torus
    /// is cyclically rotated.
    pub fn translate(&self, x: &LatticeVector) -> Result<Configuration> {
        self.domain.storage_cube().origin.same_dim(x)?;
        match self.domain {
            Domain::Cube(c) => Ok(Configuration {
                domain: Domain::Cube(c.translate(&-*x)),
                alphabet: self.alphabet,
                values: self.values.clone(),
            }),
            Domain::Torus { dim, len } => {
                let cube = Cube::at_origin(dim, len - 1);
                let values = cube
                    .sites()
                    .map(|y| self.get(&(*x + y)).expect("torus lookup"))
                    .collect();
                Ok(Configuration {
                    domain: self.domain,
                    alphabet: self.alphabet,
                    values,
                })
            }
        }
    }

    /// Restriction to `window`; every site of `window` must be present
    /// (torus sites do not wrap).
    pub fn restrict(&self, window: &Cube) -> Result<Configuration> {
        self.restrict_with(window, Wrap::None)
    }

    pub fn restrict_with(&self, window: &Cube, wrap: Wrap) -> Result<Configuration> {
        if window.dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: window.dim(),
            });
        }
        let mut values = Vec::with_capacity(window.site_count());
        for y in window.sites() {
            match self.get_with(&y, wrap) {
                Some(v) => values.push(v),
                None => return Err(Error::OutOfDomain(y.to_string())),
            }
        }
        Ok(Configuration {
            domain: Domain::Cube(*window),
            alphabet: self.alphabet,
            values,
        })
    }

    /// `(tau_x self)_{C_n}` as a pattern.
    pub fn pattern_at(&self, x: &LatticeVector, n: usize, wrap: Wrap) -> Result<Pattern> {
        let window = Cube::new(*x, n);
        let c = self.restrict_with(&window, wrap)?;
        Ok(Pattern {
            dim: self.dim(),
            side: n,
            alphabet: self.alphabet,
            values: c.values,
        })
    }

    /// The initial pattern `self_{C_n}`.
    pub fn initial_pattern(&self, n: usize) -> Result<Pattern> {
        self.pattern_at(&LatticeVector::zero(self.dim()), n, Wrap::None)
    }

    /// Converts a configuration on `C_n` (origin 0) into a pattern.
    pub fn into_pattern(self) -> Result<Pattern> {
        match self.domain {
            Domain::Cube(c) if c.origin.is_zero() => Ok(Pattern {
                dim: c.dim(),
                side: c.side,
                alphabet: self.alphabet,
                values: self.values,
            }),
            _ => Err(Error::Unsupported(
                "only configurations on C_n convert to patterns".into(),
            )),
        }
    }
}

/// A symbol assignment on `C_n = [0, n]^d`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Pattern {
    dim: usize,
    side: usize,
    alphabet: usize,
    values: Vec<u8>,
}

impl Pattern {
    pub fn new(dim: usize, side: usize, alphabet: usize, values: Vec<u8>) -> Result<Self> {
        if !(1..=MAX_DIM).contains(&dim) {
            return Err(Error::UnsupportedDimension(dim));
        }
        let c = Configuration::new(Domain::Cube(Cube::at_origin(dim, side)), alphabet, values)?;
        c.into_pattern()
    }

    pub fn constant(dim: usize, side: usize, alphabet: usize, symbol: u8) -> Result<Self> {
        let count = (side + 1).pow(dim as u32);
        Self::new(dim, side, alphabet, vec![symbol; count])
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// The pattern size `n` (support `C_n`).
    pub fn side(&self) -> usize {
        self.side
    }

    pub fn alphabet(&self) -> usize {
        self.alphabet
    }

    pub fn values(&self) -> &[u8] {
        &self.values
    }

    pub fn cube(&self) -> Cube {
        Cube::at_origin(self.dim, self.side)
    }

    pub fn site_count(&self) -> usize {
        self.values.len()
    }

    pub fn get(&self, y: &LatticeVector) -> Option<u8> {
        self.cube().index_of(y).map(|i| self.values[i])
    }

    pub fn to_configuration(&self) -> Configuration {
        Configuration {
            domain: Domain::Cube(self.cube()),
            alphabet: self.alphabet,
            values: self.values.clone(),
        }
    }

    /// Short stable identifier: first 16 hex digits of the SHA-256 of the
    /// canonical text encoding.
    pub fn hash_hex(&self) -> String {
        use sha2::{Digest, Sha256};
        let digest = Sha256::digest(crate::codec::pattern_to_text(self).as_bytes());
        hex::encode(&digest[..8])
    }

    /// Enumerates every pattern on `C_n` over `alphabet` in base-`q` order
    /// (site 0 is the most significant digit).
    pub fn all(dim: usize, side: usize, alphabet: usize) -> impl Iterator<Item = Pattern> {
        let sites = (side + 1).pow(dim as u32);
        let total = (alphabet as u128).pow(sites as u32);
        (0..total).map(move |mut code| {
            let mut values = vec![0u8; sites];
            for v in values.iter_mut().rev() {
                *v = (code % alphabet as u128) as u8;
                code /= alphabet as u128;
            }
            Pattern {
                dim,
                side,
                alphabet,
                values,
            }
        })
    }
}

/// Whether `pattern` occurs at some placement `x + C_n` contained in
/// `region` (and in the configuration's domain).
pub fn pattern_present(
    pattern: &Pattern,
    config: &Configuration,
    region: &Cube,
    wrap: Wrap,
) -> bool {
    if region.dim() != pattern.dim() || config.dim() != pattern.dim() {
        return false;
    }
    if region.side < pattern.side() {
        return false;
    }
    let span = Cube::new(region.origin, region.side - pattern.side());
    let cells: Vec<(LatticeVector, u8)> = pattern
        .cube()
        .sites()
        .zip(pattern.values().iter().copied())
        .collect();
    span.sites().any(|x| {
        cells
            .iter()
            .all(|(y, a)| config.get_with(&(x + *y), wrap) == Some(*a))
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(c: &[i64]) -> LatticeVector {
        LatticeVector::new(c).unwrap()
    }

    fn square(values: &[u8], side: usize) -> Configuration {
        Configuration::new(Domain::Cube(Cube::at_origin(2, side)), 2, values.to_vec()).unwrap()
    }

    #[test]
    fn norm_is_l1() {
        assert_eq!(v(&[3, -4]).norm(), 7);
        assert_eq!(v(&[0, 0, -1]).norm(), 1);
    }

    #[test]
    fn mixing_dimensions_is_an_error() {
        assert!(v(&[1, 2]).checked_add(&v(&[1, 2, 3])).is_err());
        assert!(LatticeVector::new(&[1, 2, 3, 4]).is_err());
    }

    #[test]
    fn cube_site_count_and_indexing() {
        let c = Cube::new(v(&[2, -1]), 3);
        assert_eq!(c.site_count(), 16);
        for (i, s) in c.sites().enumerate() {
            assert_eq!(c.index_of(&s), Some(i));
        }
        assert_eq!(c.index_of(&v(&[6, 0])), None);
    }

    #[test]
    fn translate_identity() {
        let s = square(&[0, 1, 1, 0, 0, 1, 1, 1, 0], 2);
        let t = s.translate(&LatticeVector::zero(2)).unwrap();
        assert_eq!(t, s);
    }

    #[test]
    fn translate_single_one_out_of_window() {
        // 3x3 field with one 1 at the origin, shifted by (1,0) and viewed on [0,1]^2.
        let mut vals = vec![0u8; 9];
        vals[0] = 1;
        let s = square(&vals, 2);
        let t = s.translate(&v(&[1, 0])).unwrap();
        let w = t.restrict(&Cube::at_origin(2, 1)).unwrap();
        // Shifted window reads source sites (1..=2, 0..=1).
        assert_eq!(w.values(), &[0, 0, 0, 0]);
    }

    #[test]
    fn translate_on_torus_wraps() {
        let t = Configuration::new(Domain::Torus { dim: 1, len: 3 }, 3, vec![0, 1, 2]).unwrap();
        let s = t.translate(&v(&[1])).unwrap();
        assert_eq!(s.values(), &[1, 2, 0]);
    }

    #[test]
    fn restrict_outside_domain_fails() {
        let s = square(&[0; 9], 2);
        assert!(s.restrict(&Cube::new(v(&[1, 1]), 2)).is_err());
        let single = s.restrict(&Cube::new(v(&[1, 2]), 0)).unwrap();
        assert_eq!(single.values(), &[0]);
    }

    #[test]
    fn restrict_constant_field() {
        let field = Configuration::constant(Domain::Cube(Cube::at_origin(2, 5)), 3, 2).unwrap();
        let p = field.initial_pattern(2).unwrap();
        assert_eq!(p, Pattern::constant(2, 2, 3, 2).unwrap());
    }

    #[test]
    fn presence_needs_room_for_a_placement() {
        let field = Configuration::constant(Domain::Cube(Cube::at_origin(2, 4)), 2, 1).unwrap();
        let p = Pattern::constant(2, 2, 2, 1).unwrap();
        assert!(pattern_present(
            &p,
            &field,
            &Cube::at_origin(2, 3),
            Wrap::None
        ));
        assert!(!pattern_present(
            &p,
            &field,
            &Cube::at_origin(2, 1),
            Wrap::None
        ));
    }

    #[test]
    fn presence_in_listed_square() {
        // 1 0 1
        // 0 1 0
        // 1 1 0
        let s = square(&[1, 0, 1, 0, 1, 0, 1, 1, 0], 2);
        let region = Cube::at_origin(2, 2);
        let a = Pattern::new(2, 1, 2, vec![0, 1, 1, 1]).unwrap();
        // Placements (0,0):[1,0,0,1] (0,1):[0,1,1,0] (1,0):[0,1,1,1] (1,1):[1,0,1,0].
        assert!(pattern_present(&a, &s, &region, Wrap::None));
        let b = Pattern::new(2, 1, 2, vec![1, 1, 1, 1]).unwrap();
        assert!(!pattern_present(&b, &s, &region, Wrap::None));
        // Only (1,0) matches `a`; a region excluding it does not see it.
        assert!(!pattern_present(
            &a,
            &s,
            &Cube::new(v(&[0, 1]), 1),
            Wrap::None
        ));
    }

    #[test]
    fn torus_presence_respects_wrap_flag() {
        // 1D torus 0 0 1 ; pattern "1 0" only occurs across the seam.
        let t = Configuration::new(Domain::Torus { dim: 1, len: 3 }, 2, vec![0, 0, 1]).unwrap();
        let p = Pattern::new(1, 1, 2, vec![1, 0]).unwrap();
        let region = Cube::new(v(&[2]), 1);
        assert!(!pattern_present(&p, &t, &region, Wrap::None));
        assert!(pattern_present(&p, &t, &region, Wrap::Periodic));
    }

    #[test]
    fn enumerating_all_patterns() {
        let all: Vec<_> = Pattern::all(2, 1, 2).collect();
        assert_eq!(all.len(), 16);
        assert_eq!(all[1].values(), &[0, 0, 0, 1]);
    }
}
