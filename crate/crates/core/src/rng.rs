//! Deterministic random streams.
//!
//! Every independent work unit (a delay point, a comparison setting, a beat
//! synthesis) draws from its own ChaCha8 stream selected by
//! `(seed, domain, index)`, so results do not depend on execution order or
//! thread count.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream families. The discriminant occupies the high bits of the ChaCha
/// stream id.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Domain {
    KernelScan = 1,
    FieldScan = 2,
    Heralds = 3,
    BeatSynthesis = 4,
    SeedExpansion = 5,
}

/// Returns the RNG for work unit `index` in `domain`.
pub fn stream(seed: u64, domain: Domain, index: u64) -> ChaCha8Rng {
    debug_assert!(index < (1 << 48));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((domain as u64) << 48) | index);
    rng
}

/// Expands a top-level seed into a child seed for `(label, index)`.
///
/// SplitMix64 finalizer over a mix of the inputs; labels are hashed with
/// FNV-1a so that command names can be used directly.
pub fn derive_seed(seed: u64, label: &str, index: u64) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in label.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    let mut z = seed
        ^ h.rotate_left(17)
        ^ index.wrapping_mul(0x9e37_79b9_7f4a_7c15)
        ^ (Domain::SeedExpansion as u64);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
