//! Fixed hashing primitives: FNV-1a feature hashing and labeled seed
//! derivation. Both are bit-stable across platforms and releases; golden
//! fixtures elsewhere in the crate depend on them never changing.

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

/// 64-bit FNV-1a over raw bytes.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h = FNV_OFFSET;
    for &b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(FNV_PRIME);
    }
    h
}

/// SplitMix64 finalizer; decorrelates nearby inputs.
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derive a subsystem seed from the run seed and a fixed label, so all
/// randomness flows from one `--seed` without streams colliding.
pub fn derive_seed(seed: u64, label: &str) -> u64 {
    splitmix64(seed ^ fnv1a64(label.as_bytes()))
}

/// Per-item counter seed (permutation resample `t`, pair index, ...).
/// Results are identical no matter how the items are scheduled.
pub fn counter_seed(seed: u64, stream: u64, counter: u64) -> u64 {
    splitmix64(seed ^ splitmix64(stream.wrapping_mul(0x9e37_79b9_7f4a_7c15) ^ counter))
}
