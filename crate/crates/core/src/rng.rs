//! Seed handling. Every random decision in the crate draws from a
//! [`SeededRng`] built from an explicit integer seed; nothing reads the clock.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SeededRng = ChaCha8Rng;

pub fn seeded(seed: u64) -> SeededRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// 64-bit FNV-1a. Stable across platforms and releases, unlike `DefaultHasher`.
pub fn stable_hash(bytes: &[u8]) -> u64 {
    const OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
    const PRIME: u64 = 0x0000_0100_0000_01b3;
    bytes
        .iter()
        .fold(OFFSET, |h, &b| (h ^ u64::from(b)).wrapping_mul(PRIME))
}

/// Seed for one document: the run seed mixed with a stable hash of the id, so
/// a document's random stream does not depend on where it sits in the corpus.
pub fn document_seed(seed: u64, doc_id: &str) -> u64 {
    seed ^ stable_hash(doc_id.as_bytes())
}

/// Independent sub-stream of a run seed, e.g. split vs. classifier vs. augmentation.
pub fn substream(seed: u64, tag: &str) -> u64 {
    // splitmix64 finaliser over the mixed value
    let mut z = (seed ^ stable_hash(tag.as_bytes())).wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
