//! Deterministic seed derivation. Every randomized stage (splits, inner
//! validation carve-outs, synthetic data) draws from a ChaCha stream seeded
//! through these mixers, so a run is reproducible bit-for-bit across
//! platforms and thread counts.

/// SplitMix64 finalizer; avalanches a 64-bit value.
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// FNV-1a over a label, used to give independently named sub-streams
/// (e.g. a method's internal validation split) distinct seeds.
fn fnv1a(tag: &str) -> u64 {
    let mut h: u64 = 0xCBF2_9CE4_8422_2325;
    for b in tag.as_bytes() {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0000_0100_0000_01B3);
    }
    h
}

/// Seed for stream `index` under `base` (e.g. one experiment run).
pub fn derive(base: u64, index: u64) -> u64 {
    splitmix64(base ^ splitmix64(index.wrapping_add(1)))
}

/// Seed for a named sub-stream under `base`.
pub fn derive_tagged(base: u64, tag: &str) -> u64 {
    splitmix64(base ^ fnv1a(tag))
}
