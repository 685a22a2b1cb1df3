//! Seed derivation for independent, reproducible rng streams.

/// Stream tags keep the rng streams of different subsystems apart even when
/// they share the same base seed.
pub(crate) const TOPOLOGY_STREAM: u64 = 0x544f_504f;
pub(crate) const CONGESTION_STREAM: u64 = 0x434f_4e47;
pub(crate) const CELL_STREAM: u64 = 0x4345_4c4c;
pub(crate) const SCENARIO_STREAM: u64 = 0x5343_454e;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Folds `parts` into `base`. Stable across platforms and releases, unlike
/// `std::hash::DefaultHasher`.
pub fn derive_seed(base: u64, parts: &[u64]) -> u64 {
    parts
        .iter()
        .fold(splitmix64(base), |acc, &p| splitmix64(acc ^ splitmix64(p)))
}
