//! Seed derivation shared by every randomized operation.
//!
//! All randomness in the crate flows from `u64` seeds. Child seeds are a
//! stable mix of `(parent, index)`, so growing a population or a challenge
//! list never perturbs the streams already handed out.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const GOLDEN: u64 = 0x9e37_79b9_7f4a_7c15;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Child seed for slot `index` under `parent`.
pub fn derive_seed(parent: u64, index: u64) -> u64 {
    splitmix64(splitmix64(parent) ^ index.wrapping_mul(GOLDEN).rotate_left(17))
}

/// Folds a path of indices into one seed: `derive_path(s, &[a, b])` equals
/// `derive_seed(derive_seed(s, a), b)`.
pub fn derive_path(parent: u64, path: &[u64]) -> u64 {
    path.iter().fold(parent, |acc, &i| derive_seed(acc, i))
}

/// A fair bit that depends only on `seed`.
pub fn seed_bit(seed: u64) -> bool {
    splitmix64(seed) >> 63 == 1
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn children_are_distinct() {
        let mut seen = std::collections::HashSet::new();
        for parent in 0..20u64 {
            for i in 0..500u64 {
                assert!(seen.insert(derive_seed(parent, i)));
            }
        }
    }

    #[test]
    fn path_matches_nested_derivation() {
        assert_eq!(derive_path(9, &[1, 2, 3]), derive_seed(derive_seed(derive_seed(9, 1), 2), 3));
        assert_eq!(derive_path(9, &[]), 9);
    }

    #[test]
    fn seed_bit_is_roughly_fair() {
        let ones = (0..10_000u64).filter(|&s| seed_bit(derive_seed(5, s))).count();
        assert!((4_700..=5_300).contains(&ones), "{ones}");
    }
}
