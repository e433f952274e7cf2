//! Seeded random streams.
//!
//! Every sampling routine takes an explicit `&mut impl Rng`; experiment code
//! derives independent child seeds from a base seed and the sweep coordinates
//! so that cells can run in any order on any thread.

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use sha2::{Digest, Sha256};

pub type SeededRng = ChaCha12Rng;

pub fn seeded(seed: u64) -> SeededRng {
    SeededRng::seed_from_u64(seed)
}

/// A coordinate of a sweep cell that participates in child-seed derivation.
#[derive(Debug, Clone, PartialEq)]
pub enum SeedPart<'a> {
    Tag(&'a str),
    Index(u64),
    Real(f64),
}

impl From<u64> for SeedPart<'_> {
    fn from(v: u64) -> Self {
        SeedPart::Index(v)
    }
}

impl From<usize> for SeedPart<'_> {
    fn from(v: usize) -> Self {
        SeedPart::Index(v as u64)
    }
}

impl From<f64> for SeedPart<'_> {
    fn from(v: f64) -> Self {
        SeedPart::Real(v)
    }
}

impl<'a> From<&'a str> for SeedPart<'a> {
    fn from(v: &'a str) -> Self {
        SeedPart::Tag(v)
    }
}

/// Stable child seed: the first 8 bytes of SHA-256 over a length-prefixed
/// encoding of the base seed and each coordinate.
pub fn derive_seed(base: u64, parts: &[SeedPart<'_>]) -> u64 {
    let mut hasher = Sha256::new();
    hasher.update(b"cfaug-seed-v1");
    hasher.update(base.to_le_bytes());
    for part in parts {
        match part {
            SeedPart::Tag(s) => {
                hasher.update([0u8]);
                hasher.update((s.len() as u64).to_le_bytes());
                hasher.update(s.as_bytes());
            }
            SeedPart::Index(i) => {
                hasher.update([1u8]);
                hasher.update(i.to_le_bytes());
            }
            SeedPart::Real(x) => {
                hasher.update([2u8]);
                hasher.update(x.to_bits().to_le_bytes());
            }
        }
    }
    let digest = hasher.finalize();
    let mut bytes = [0u8; 8];
    bytes.copy_from_slice(&digest[..8]);
    u64::from_le_bytes(bytes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    #[test]
    fn derivation_is_stable_and_order_sensitive() {
        let a = derive_seed(7, &["corr".into(), 3usize.into(), 4usize.into()]);
        let b = derive_seed(7, &["corr".into(), 3usize.into(), 4usize.into()]);
        let c = derive_seed(7, &["corr".into(), 4usize.into(), 3usize.into()]);
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn tag_and_index_do_not_alias() {
        assert_ne!(
            derive_seed(0, &["1".into()]),
            derive_seed(0, &[SeedPart::Index(1)])
        );
    }

    #[test]
    fn no_collisions_over_a_sweep_grid() {
        let mut seen = HashSet::new();
        for bucket in 0..18usize {
            for rep in 0..30usize {
                for method in ["erm", "reweight", "aug_corrupt"] {
                    let s = derive_seed(42, &[method.into(), bucket.into(), rep.into()]);
                    assert!(seen.insert(s));
                }
            }
        }
    }
}
