//! Deterministic random streams.
//!
//! Every stream is a ChaCha8 generator keyed by `(seed, purpose)` and
//! positioned on stream number `replica`:
//!
//! * key bytes `0..8`: the master seed, little endian;
//! * key bytes `8..16`: the purpose tag, little endian; the rest are zero;
//! * stream id: the replica index.
//!
//! Distinct `(seed, purpose, replica)` triples therefore never share a
//! keystream. Lazily generated fields additionally address the keystream by
//! site: row `r` (all coordinates except the last) starts at 32-bit word
//! `r * 2^21` and each site consumes one 64-bit draw, so any prefix of a
//! field is reproduced exactly regardless of how much of it was generated.
//! This derivation is part of the output format and must not change.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Coordinates of lazily generated fields must stay below this bound.
pub const MAX_ROW_COORD: usize = 1 << 20;

/// Purpose tags; one per independent use of a replica's randomness.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[repr(u64)]
pub enum Purpose {
    Field = 1,
    FieldQ = 2,
    FieldP = 3,
    Glauber = 4,
    Pattern = 5,
    Lambda = 6,
}

pub fn stream(seed: u64, purpose: Purpose, replica: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&(purpose as u64).to_le_bytes());
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.set_stream(replica);
    rng
}

/// Positions `rng` at the start of row `row`.
pub fn seek_row(rng: &mut ChaCha8Rng, row: u64) {
    rng.set_word_pos((row as u128) << 21);
}

/// Row number of the leading coordinates `coords` (all but the last axis).
pub fn row_code(coords: &[i64]) -> u64 {
    coords
        .iter()
        .fold(0u64, |acc, &c| acc * MAX_ROW_COORD as u64 + c as u64)
}

/// Uniform double in `[0, 1)` with 53 random bits.
pub fn uniform(rng: &mut ChaCha8Rng) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Cumulative table for inverse-CDF symbol draws; the last entry is forced to 1.
pub fn cdf(p: &[f64]) -> Vec<f64> {
    let mut acc = 0.0;
    let mut out: Vec<f64> = p
        .iter()
        .map(|x| {
            acc += x;
            acc
        })
        .collect();
    if let Some(last) = out.last_mut() {
        *last = 1.0;
    }
    out
}

/// Smallest symbol `a` with `u < cdf[a]`.
pub fn draw(cdf: &[f64], u: f64) -> u8 {
    cdf.iter().position(|&c| u < c).unwrap_or(cdf.len() - 1) as u8
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    #[test]
    fn replicas_do_not_collide() {
        let mut seen = HashSet::new();
        for r in 0..10_000u64 {
            let mut g = stream(7, Purpose::Field, r);
            assert!(seen.insert((g.next_u64(), g.next_u64())));
        }
        let mut a = stream(7, Purpose::FieldQ, 0);
        let mut b = stream(7, Purpose::FieldP, 0);
        assert_ne!(a.next_u64(), b.next_u64());
    }

    #[test]
    fn seeking_is_reproducible() {
        let mut g = stream(1, Purpose::Field, 3);
        seek_row(&mut g, 5);
        let first: Vec<u64> = (0..4).map(|_| g.next_u64()).collect();
        let mut h = stream(1, Purpose::Field, 3);
        h.next_u64();
        seek_row(&mut h, 5);
        let again: Vec<u64> = (0..4).map(|_| h.next_u64()).collect();
        assert_eq!(first, again);
        assert_eq!(row_code(&[2, 3]), 2 * (1 << 20) + 3);
    }

    #[test]
    fn inverse_cdf() {
        let c = cdf(&[0.2, 0.0, 0.8]);
        assert_eq!(draw(&c, 0.0), 0);
        assert_eq!(draw(&c, 0.2), 2);
        assert_eq!(draw(&c, 0.999_999), 2);
        let mut g = stream(0, Purpose::Field, 0);
        assert!((0..1000).all(|_| (0.0..1.0).contains(&uniform(&mut g))));
    }
}
