mod common;

use common::{matrix, oracle_distance, random_sparse_pair};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use wifio_core::distance::{distance, pairwise_ranking};
use wifio_core::model::{ApKey, Fingerprint};

fn pair_distance(x: &[(u32, i32)], y: &[(u32, i32)], i: usize, j: usize) -> f64 {
    let m = matrix(&[x.to_vec(), y.to_vec()]);
    distance(m.fingerprint(0), m.fingerprint(1), i, j).value
}

#[test]
fn matches_explicit_epsilon_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..1000 {
        let (x, y) = random_sparse_pair(&mut rng);
        let got = pair_distance(&x, &y, 0, 5);
        let want = oracle_distance(&x, &y, 0, 5);
        assert!((got - want).abs() < 1e-9, "{x:?} {y:?}: {got} vs {want}");
    }
}

#[test]
fn union_ranks_sum_to_triangular_number() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..200 {
        let (x, y) = random_sparse_pair(&mut rng);
        let m = matrix(&[x, y]);
        let r = pairwise_ranking(m.fingerprint(0), m.fingerprint(1)).unwrap();
        let n = r.n() as f64;
        let total = n * (n + 1.0) / 2.0;
        assert!((r.ranks_x.iter().sum::<f64>() - total).abs() < 1e-9);
        assert!((r.ranks_y.iter().sum::<f64>() - total).abs() < 1e-9);
    }
}

fn scan() -> impl Strategy<Value = Vec<(u32, i32)>> {
    prop::collection::btree_map(0u32..12, -95i32..-30, 0..8).prop_map(|m| m.into_iter().collect())
}

proptest! {
    #[test]
    fn symmetric(x in scan(), y in scan(), i in 0usize..4, j in 0usize..4) {
        let m = matrix(&[x, y]);
        let a = distance(m.fingerprint(0), m.fingerprint(1), i, j);
        let b = distance(m.fingerprint(1), m.fingerprint(0), j, i);
        prop_assert_eq!(a, b);
    }

    #[test]
    fn bounded(x in scan(), y in scan(), i in 0usize..4, j in 0usize..4) {
        let v = pair_distance(&x, &y, i, j);
        prop_assert!((0.0..=2.0).contains(&v));
    }

    #[test]
    fn agrees_with_oracle(x in scan(), y in scan(), i in 0usize..4, j in 0usize..4) {
        prop_assume!(i != j);
        let got = pair_distance(&x, &y, i, j);
        prop_assert!((got - oracle_distance(&x, &y, i, j)).abs() < 1e-9);
    }

    #[test]
    fn self_distance_is_zero(x in prop::collection::btree_map(0u32..12, -95i32..-30, 2..8)) {
        let x: Vec<_> = x.into_iter().collect();
        let m = matrix(&[x]);
        prop_assert_eq!(distance(m.fingerprint(0), m.fingerprint(0), 0, 0).value, 0.0);
    }

    /// Shifting every dBm by the same amount scales every linear power by
    /// the same positive factor.
    #[test]
    fn scale_invariant(x in scan(), y in scan(), shift in -20i32..20) {
        let shifted = |s: &[(u32, i32)]| -> Vec<(ApKey, i32)> {
            s.iter().map(|&(a, d)| (ApKey(a), d + shift)).collect()
        };
        let plain = |s: &[(u32, i32)]| -> Vec<(ApKey, i32)> {
            s.iter().map(|&(a, d)| (ApKey(a), d)).collect()
        };
        let fp = |r: Vec<(ApKey, i32)>| Fingerprint::from_dbm(0, 0, &r).unwrap();
        let a = distance(&fp(plain(&x)), &fp(plain(&y)), 0, 3);
        let b = distance(&fp(shifted(&x)), &fp(shifted(&y)), 0, 3);
        prop_assert_eq!(a, b);
    }
}
