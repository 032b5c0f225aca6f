//! Occurrence scanning against a direct shift-by-shift search.

use gibbsfield::lattice::{Configuration, Cube, Domain, LatticeVector, Pattern};
use gibbsfield::stats::{count_occurrences, first_occurrence, first_repetition, Hit};
use proptest::prelude::*;

fn matches_at(a: &Pattern, sigma: &Configuration, x: &LatticeVector) -> bool {
    a.cube()
        .sites()
        .zip(a.values())
        .all(|(y, &s)| sigma.get(&(*x + y)) == Some(s))
}

/// Smallest `max |x_i|` over nonzero matching placements in `[0, cap]^d`.
fn direct_first(a: &Pattern, sigma: &Configuration, cap: usize) -> Option<usize> {
    Cube::at_origin(a.dim(), cap)
        .sites()
        .filter(|x| !x.is_zero() && matches_at(a, sigma, x))
        .map(|x| x.max_coord() as usize)
        .min()
}

fn config(d: usize, side: usize, values: Vec<u8>) -> Configuration {
    Configuration::new(Domain::Cube(Cube::at_origin(d, side)), 2, values).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn first_occurrence_matches_direct_search(
        values in proptest::collection::vec(0u8..2, 36),
        bits in 0u8..16,
        cap in 1usize..5,
    ) {
        let sigma = config(2, 5, values);
        let a = Pattern::new(2, 1, 2, (0..4).map(|i| (bits >> i) & 1).collect()).unwrap();
        let got = first_occurrence(&a, &sigma, cap).unwrap();
        match direct_first(&a, &sigma, cap) {
            Some(k) => prop_assert_eq!(got, Hit::Found(k)),
            None => prop_assert_eq!(got, Hit::Censored(cap)),
        }
        for k in 0..=cap {
            let direct = Cube::at_origin(2, k).sites().filter(|x| matches_at(&a, &sigma, x)).count() as u64;
            let with_origin = count_occurrences(&a, &sigma, k, true).unwrap();
            prop_assert_eq!(with_origin, direct);
            let without = count_occurrences(&a, &sigma, k, false).unwrap();
            let hit = matches!(got, Hit::Found(j) if j <= k);
            prop_assert_eq!(without >= 1, hit);
        }
    }

    #[test]
    fn repetition_is_first_occurrence_of_initial_pattern(
        values in proptest::collection::vec(0u8..2, 64),
        n in 0usize..3,
    ) {
        let sigma = config(1, 63, values);
        let a = sigma.initial_pattern(n).unwrap();
        let cap = 63 - n;
        prop_assert_eq!(first_repetition(&sigma, n, cap).unwrap().value(), direct_first(&a, &sigma, cap));
    }
}

#[test]
fn constant_configuration_repeats_at_one() {
    let sigma = config(2, 6, vec![1; 49]);
    assert_eq!(first_repetition(&sigma, 2, 4).unwrap(), Hit::Found(1));
}

#[test]
fn window_too_small_is_an_error() {
    let sigma = config(2, 2, vec![0; 9]);
    let a = Pattern::new(2, 1, 2, vec![0; 4]).unwrap();
    assert!(first_occurrence(&a, &sigma, 3).is_err());
}
