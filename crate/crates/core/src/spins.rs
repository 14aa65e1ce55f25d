//! Bit-packed spin configurations.
//!
//! Bit `j` of a configuration is set when `sigma_j = -1`, so the index `0`
//! is the all-plus configuration and table index equals bit pattern.

/// A configuration of at most 64 spins.
pub type Config = u64;

/// Decodes bits into a `±1` vector of length `n`.
pub fn decode(x: Config, n: usize) -> Vec<f64> {
    (0..n).map(|j| spin(x, j)).collect()
}

/// Encodes a `±1` vector (any negative entry counts as `-1`).
pub fn encode(sigma: &[f64]) -> Config {
    assert!(sigma.len() <= 64, "at most 64 spins fit in a packed configuration");
    sigma
        .iter()
        .enumerate()
        .fold(0, |acc, (j, &s)| if s < 0.0 { acc | (1 << j) } else { acc })
}

#[inline]
pub fn spin(x: Config, j: usize) -> f64 {
    if (x >> j) & 1 == 1 {
        -1.0
    } else {
        1.0
    }
}

/// Hamming distance.
#[inline]
pub fn distance(x: Config, y: Config) -> u32 {
    (x ^ y).count_ones()
}

/// Unnormalized overlap `<x, y> = N - 2 d(x, y)`.
#[inline]
pub fn overlap(x: Config, y: Config, n: usize) -> i64 {
    n as i64 - 2 * i64::from(distance(x, y))
}

/// Mask with the low `n` bits set.
#[inline]
pub fn full_mask(n: usize) -> Config {
    if n >= 64 {
        u64::MAX
    } else {
        (1u64 << n) - 1
    }
}

/// Inner product of two `±1` vectors.
pub fn overlap_f64(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
