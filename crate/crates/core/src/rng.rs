//! Reproducible per-replicate random streams.
//!
//! Every replicate gets its own generator, seeded from a hash of
//! (master seed, cell key, replicate index). Results therefore do not depend
//! on how replicates are split across threads, and any cell of a grid can be
//! rerun on its own.

use rand::SeedableRng;
use rand_xoshiro::Xoshiro256PlusPlus;

const GOLDEN: u64 = 0x9e37_79b9_7f4a_7c15;

/// SplitMix64 finaliser.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Stable identifier of a simulation cell, built from its parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct CellKey(pub u64);

impl CellKey {
    pub fn from_words(words: &[u64]) -> Self {
        let mut h = 0x6a09_e667_f3bc_c908;
        for &w in words {
            h = mix64(h ^ w);
        }
        CellKey(h)
    }
}

pub fn stream_seed(master_seed: u64, cell: CellKey, replicate: u64) -> u64 {
    let h = mix64(master_seed ^ 0x3c6e_f372_fe94_f82b);
    let h = mix64(h ^ cell.0);
    mix64(h ^ replicate.wrapping_mul(GOLDEN))
}

pub fn replicate_rng(master_seed: u64, cell: CellKey, replicate: u64) -> Xoshiro256PlusPlus {
    Xoshiro256PlusPlus::seed_from_u64(stream_seed(master_seed, cell, replicate))
}
