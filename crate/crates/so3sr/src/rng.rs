//! Deterministic random streams: one root seed, one ChaCha stream per label.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// FNV-1a, stable across platforms and toolchains.
pub fn label_hash(label: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in label.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    h
}

/// Stream derived from `root` and a fixed label.
pub fn stream(root: u64, label: &str) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(root);
    r.set_stream(label_hash(label));
    r
}
