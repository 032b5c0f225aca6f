//! Exhaustive state enumeration and compiled energy evaluation.
//!
//! States are visited in fixed-size chunks of consecutive base-`q` codes
//! (site 0 is the most significant digit). Chunks run in parallel and their
//! partial results are merged in chunk order, so every reduction is
//! independent of the worker count.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::lattice::{Cube, LatticeVector};
use crate::model::Interaction;

/// Largest number of states any exact computation may visit.
pub const ENUMERATION_BUDGET: f64 = (1u64 << 24) as f64;

const CHUNK: u64 = 1 << 12;

pub fn state_count(sites: usize, q: usize) -> f64 {
    (q as f64).powi(sites as i32)
}

pub fn check_budget(states: f64) -> Result<()> {
    if states > ENUMERATION_BUDGET {
        return Err(Error::BudgetExceeded {
            needed: states,
            budget: ENUMERATION_BUDGET,
        });
    }
    Ok(())
}

pub fn decode(mut code: u64, q: usize, digits: &mut [u8]) {
    for d in digits.iter_mut().rev() {
        *d = (code % q as u64) as u8;
        code /= q as u64;
    }
}

fn increment(digits: &mut [u8], q: usize) {
    for d in digits.iter_mut().rev() {
        if (*d as usize) + 1 < q {
            *d += 1;
            return;
        }
        *d = 0;
    }
}

/// Folds over every assignment of `sites` symbols from `0..q`.
pub fn fold_states<A, I, F, M>(sites: usize, q: usize, init: I, fold: F, merge: M) -> Result<A>
where
    A: Send,
    I: Fn() -> A + Sync + Send,
    F: Fn(&mut A, &[u8]) + Sync + Send,
    M: Fn(A, A) -> A,
{
    check_budget(state_count(sites, q))?;
    let total = (q as u64).pow(sites as u32);
    let chunks = total.div_ceil(CHUNK);
    let parts: Vec<A> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let start = c * CHUNK;
            let end = (start + CHUNK).min(total);
            let mut digits = vec![0u8; sites];
            decode(start, q, &mut digits);
            let mut acc = init();
            for _ in start..end {
                fold(&mut acc, &digits);
                increment(&mut digits, q);
            }
            acc
        })
        .collect();
    Ok(parts.into_iter().reduce(merge).unwrap_or_else(init))
}

/// A term placement reduced to table lookups on a state vector.
#[derive(Clone, Debug)]
struct Placement {
    term: usize,
    base: usize,
    slots: Vec<(usize, usize)>,
}

/// Energy of a fixed set of placements as a function of a state vector.
#[derive(Clone, Debug)]
pub struct CompiledEnergy {
    tables: Vec<Vec<f64>>,
    placements: Vec<Placement>,
}

impl CompiledEnergy {
    /// `placements` lists `(term, offset)` pairs; `slot` maps a site to its
    /// state index, or to a fixed symbol when it lies outside the state.
    pub fn compile<S>(
        u: &Interaction,
        placements: &[(usize, LatticeVector)],
        slot: S,
    ) -> Result<Self>
    where
        S: Fn(&LatticeVector) -> Option<Slot>,
    {
        let q = u.alphabet();
        let mut out = Vec::with_capacity(placements.len());
        for &(term, offset) in placements {
            let shape = u.terms()[term].shape();
            let k = shape.len();
            let mut base = 0usize;
            let mut slots = Vec::new();
            for (i, s) in shape.iter().enumerate() {
                let weight = q.pow((k - 1 - i) as u32);
                match slot(&(offset + *s)) {
                    Some(Slot::State(idx)) => slots.push((idx, weight)),
                    Some(Slot::Fixed(sym)) => base += sym as usize * weight,
                    None => {
                        return Err(Error::MissingContext(format!(
                            "site {} of a placement is unassigned",
                            offset + *s
                        )))
                    }
                }
            }
            out.push(Placement { term, base, slots });
        }
        Ok(Self {
            tables: u.terms().iter().map(|t| t.table().to_vec()).collect(),
            placements: out,
        })
    }

    /// Placements inside `volume` (free boundary).
    pub fn free_cube(u: &Interaction, volume: &Cube) -> Result<Self> {
        let placements = placements_meeting(u, volume, true);
        Self::compile(u, &placements, |y| volume.index_of(y).map(Slot::State))
    }

    /// Every placement of every term on a periodic `len^d` torus.
    pub fn torus(u: &Interaction, len: usize) -> Result<Self> {
        let dim = u.dim();
        let cube = Cube::at_origin(dim, len - 1);
        let mut placements = Vec::new();
        for term in 0..u.terms().len() {
            for x in cube.sites() {
                placements.push((term, x));
            }
        }
        Self::compile(u, &placements, |y| {
            let mut w = *y;
            for i in 0..dim {
                w.set(i, y.get(i).rem_euclid(len as i64));
            }
            cube.index_of(&w).map(Slot::State)
        })
    }

    pub fn energy(&self, state: &[u8]) -> f64 {
        let mut e = 0.0;
        for p in &self.placements {
            let mut idx = p.base;
            for &(s, w) in &p.slots {
                idx += state[s] as usize * w;
            }
            e += self.tables[p.term][idx];
        }
        e
    }

    pub fn placement_count(&self) -> usize {
        self.placements.len()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Slot {
    State(usize),
    Fixed(u8),
}

/// `(term, offset)` for every placement meeting `volume`; with `inside` only
/// those fully contained in it.
pub fn placements_meeting(
    u: &Interaction,
    volume: &Cube,
    inside: bool,
) -> Vec<(usize, LatticeVector)> {
    let dim = volume.dim();
    let mut out = Vec::new();
    for (ti, t) in u.terms().iter().enumerate() {
        let shape = t.shape();
        let mut lo = volume.origin;
        let mut span = 0i64;
        for i in 0..dim {
            let max_s = shape.iter().map(|s| s.get(i)).max().unwrap_or(0);
            let min_s = shape.iter().map(|s| s.get(i)).min().unwrap_or(0);
            lo.set(i, volume.origin.get(i) - max_s);
            span = span.max(volume.side as i64 + max_s - min_s);
        }
        let bbox = Cube::new(lo, span as usize);
        for p in bbox.sites() {
            let hits = shape.iter().filter(|s| volume.contains(&(p + **s))).count();
            let keep = if inside {
                hits == shape.len()
            } else {
                hits > 0
            };
            if keep {
                out.push((ti, p));
            }
        }
    }
    out
}
