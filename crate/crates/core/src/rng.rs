//! Counter-based randomness keyed by `(seed, digit path)`.
//!
//! Every node of the cascade tree draws its atom from a 64-bit key obtained
//! by folding the digits of its address into the seed. The draw at a word is
//! therefore independent of traversal order and thread scheduling.

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 finalizer. Bijective on `u64`.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Key of the root (empty word).
#[inline]
pub fn root_key(seed: u64) -> u64 {
    mix64(seed.wrapping_add(GOLDEN))
}

/// Key of `parent · digit`.
#[inline]
pub fn child_key(parent: u64, digit: usize) -> u64 {
    mix64(parent.rotate_left(23) ^ mix64((digit as u64 + 1).wrapping_mul(GOLDEN)))
}

/// Uniform draw in `[0, 1)` attached to a key.
#[inline]
pub fn unit(key: u64) -> f64 {
    (mix64(key ^ 0xD1B5_4A32_D192_ED03) >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Key for a word given as a digit path.
pub fn word_key(seed: u64, digits: &[u8]) -> u64 {
    digits
        .iter()
        .fold(root_key(seed), |k, &d| child_key(k, d as usize))
}

/// Derive the `index`-th run seed of a sweep from a master seed.
pub fn split_seed(master: u64, index: u64) -> u64 {
    mix64(root_key(master) ^ mix64(index.wrapping_add(1).wrapping_mul(GOLDEN)))
}
