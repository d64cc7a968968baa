use std::collections::HashMap;
use std::hash::Hash;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

fn histogram<S: Eq + Hash>(xs: impl Iterator<Item = S>) -> HashMap<S, usize> {
    let mut h = HashMap::new();
    for x in xs {
        *h.entry(x).or_insert(0) += 1;
    }
    h
}

/// Sums after sorting so the result does not depend on hash iteration order.
fn stable_sum(mut terms: Vec<f64>) -> f64 {
    terms.sort_by(f64::total_cmp);
    terms.iter().sum()
}

/// Plug-in Shannon entropy of the empirical distribution, in bits.
pub fn entropy<S: Eq + Hash, T: Scalar>(symbols: &[S]) -> Result<T> {
    if symbols.is_empty() {
        return Err(Error::usage("entropy of an empty sequence"));
    }
    let n = symbols.len() as f64;
    let terms = histogram(symbols.iter())
        .values()
        .map(|&c| {
            let p = c as f64 / n;
            -p * p.log2()
        })
        .collect();
    Ok(T::of(stable_sum(terms).max(0.0)))
}

/// Plug-in mutual information from the joint empirical histogram, in bits.
///
/// Exactly symmetric in its arguments and invariant under relabeling.
pub fn discrete_mutual_information<S, U, T>(a: &[S], b: &[U]) -> Result<T>
where
    S: Eq + Hash,
    U: Eq + Hash,
    T: Scalar,
{
    if a.len() != b.len() {
        return Err(Error::usage(format!("length mismatch: {} vs {}", a.len(), b.len())));
    }
    if a.is_empty() {
        return Err(Error::usage("sequences must be non-empty"));
    }
    let n = a.len();
    let ha = histogram(a.iter());
    let hb = histogram(b.iter());
    let joint = histogram(a.iter().zip(b.iter()));
    let nf = n as f64;
    let terms = joint
        .iter()
        .map(|((x, y), &c)| {
            let marg = (ha[x] as f64) * (hb[y] as f64);
            let c = c as f64;
            c / nf * (c * nf / marg).log2()
        })
        .collect();
    Ok(T::of(stable_sum(terms).max(0.0)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::seq::SliceRandom;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Direct summation over the full alphabet x alphabet joint table.
    fn brute_force_mi(a: &[u8], b: &[u8], alphabet: u8) -> f64 {
        let n = a.len() as f64;
        let mut total = 0.0;
        for x in 0..alphabet {
            for y in 0..alphabet {
                let nxy = a.iter().zip(b).filter(|&(&p, &q)| p == x && q == y).count() as f64;
                if nxy == 0.0 {
                    continue;
                }
                let nx = a.iter().filter(|&&p| p == x).count() as f64;
                let ny = b.iter().filter(|&&q| q == y).count() as f64;
                let pxy = nxy / n;
                total += pxy * (pxy / ((nx / n) * (ny / n))).log2();
            }
        }
        total
    }

    #[test]
    fn identical_sequences_give_entropy() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut xs: Vec<u8> = (0..10_000).map(|i| (i % 6) as u8).collect();
        xs.shuffle(&mut rng);
        let mi: f64 = discrete_mutual_information(&xs, &xs).unwrap();
        let h: f64 = entropy(&xs).unwrap();
        assert!((mi - h).abs() < 1e-12);
        assert!((mi - 6f64.log2()).abs() < 1e-6, "{mi}");
    }

    #[test]
    fn independent_sequences_near_zero() {
        for seed in 0..5 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let a: Vec<u8> = (0..10_000).map(|_| rng.random_range(0..6)).collect();
            let b: Vec<u8> = (0..10_000).map(|_| rng.random_range(0..6)).collect();
            let mi: f64 = discrete_mutual_information(&a, &b).unwrap();
            assert!((0.0..=0.02).contains(&mi), "{mi}");
        }
    }

    #[test]
    fn binary_symmetric_channel() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let a: Vec<bool> = (0..100_000).map(|_| rng.random()).collect();
        let b: Vec<bool> = a.iter().map(|&x| x ^ (rng.random::<f64>() < 0.25)).collect();
        let mi: f64 = discrete_mutual_information(&a, &b).unwrap();
        let h2 = -(0.25f64 * 0.25f64.log2() + 0.75 * 0.75f64.log2());
        assert!((mi - (1.0 - h2)).abs() < 0.01, "{mi}");
    }

    #[test]
    fn errors() {
        assert!(discrete_mutual_information::<u8, u8, f64>(&[1, 2], &[1]).is_err());
        assert!(discrete_mutual_information::<u8, u8, f64>(&[], &[]).is_err());
        assert_eq!(discrete_mutual_information::<u8, u8, f64>(&[3], &[4]).unwrap(), 0.0);
    }

    fn seq_pair() -> impl Strategy<Value = (Vec<u8>, Vec<u8>, u8)> {
        (1u8..=3, 1usize..=12).prop_flat_map(|(k, n)| {
            (
                prop::collection::vec(0..k, n),
                prop::collection::vec(0..k, n),
                Just(k),
            )
        })
    }

    proptest! {
        #[test]
        fn matches_brute_force((a, b, k) in seq_pair()) {
            let mi: f64 = discrete_mutual_information(&a, &b).unwrap();
            prop_assert!((mi - brute_force_mi(&a, &b, k).max(0.0)).abs() < 1e-12);
        }

        #[test]
        fn symmetric_nonnegative_bounded(a in prop::collection::vec(0u8..6, 1..300), seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let b: Vec<u8> = a.iter().map(|&x| if rng.random::<f64>() < 0.5 { x } else { rng.random_range(0..6) }).collect();
            let ab: f64 = discrete_mutual_information(&a, &b).unwrap();
            let ba: f64 = discrete_mutual_information(&b, &a).unwrap();
            prop_assert_eq!(ab, ba);
            prop_assert!(ab >= 0.0);
            let ha: f64 = entropy(&a).unwrap();
            let hb: f64 = entropy(&b).unwrap();
            prop_assert!(ab <= ha.min(hb) + 1e-12);
        }

        #[test]
        fn relabeling_invariant(a in prop::collection::vec(0u8..5, 1..200),
                                b in prop::collection::vec(0u8..5, 200),
                                perm in Just([0u8, 1, 2, 3, 4]).prop_shuffle()) {
            let b = &b[..a.len()];
            let relabeled: Vec<u8> = a.iter().map(|&x| perm[x as usize]).collect();
            let x: f64 = discrete_mutual_information(&a, b).unwrap();
            let y: f64 = discrete_mutual_information(&relabeled, b).unwrap();
            prop_assert_eq!(x, y);
        }
    }
}
