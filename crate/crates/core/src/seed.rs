/// SplitMix64 finalizer. A bijection on `u64`.
fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derives an independent seed for stream `index` of a base seed. Distinct
/// indices always give distinct seeds for the same base.
pub fn derive_seed(base: u64, index: u64) -> u64 {
    mix64(mix64(base).wrapping_add(index.wrapping_mul(0x9e37_79b9_7f4a_7c15)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn distinct_streams() {
        let seeds: std::collections::HashSet<u64> =
            (0..10_000).map(|i| derive_seed(5, i)).collect();
        assert_eq!(seeds.len(), 10_000);
        assert_ne!(derive_seed(1, 0), derive_seed(2, 0));
    }
}
