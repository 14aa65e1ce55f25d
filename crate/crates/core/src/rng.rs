//! Reproducible randomness.
//!
//! Couplings come from a counter-based stream: ChaCha8 keyed by the seed,
//! with the ChaCha stream id set to the coupling degree and the word
//! position set from the tuple index. Any coupling can therefore be
//! regenerated on its own, and chunked parallel generation gives the same
//! bits as a sequential pass.
//!
//! Everything else (replicas, exact Gibbs samples, planted signs) uses
//! seeds derived from a master seed along a path of integers.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// 32-bit ChaCha words consumed per Gaussian draw (two `u64`s).
const WORDS_PER_NORMAL: u128 = 4;

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives a child seed from `master` and a path of labels.
pub fn derive_seed(master: u64, path: &[u64]) -> u64 {
    path.iter()
        .fold(splitmix(master), |acc, &label| splitmix(acc ^ splitmix(label)))
}

/// General-purpose generator for a derived seed.
pub fn rng_for(master: u64, path: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(master, path))
}

/// Box–Muller from exactly two `u64` draws (cosine branch only), so each
/// normal consumes a fixed number of stream words.
pub fn standard_normal<R: RngCore + ?Sized>(rng: &mut R) -> f64 {
    // u1 in (0, 1], u2 in [0, 1)
    let u1 = ((rng.next_u64() >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64);
    let u2 = (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64);
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

/// Counter-addressed Gaussian stream for one `(seed, stream)` pair.
pub struct NormalStream {
    rng: ChaCha8Rng,
}

impl NormalStream {
    pub fn new(seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        Self { rng }
    }

    /// Positions the stream so the next draw is the `index`-th normal.
    pub fn seek(&mut self, index: u64) {
        self.rng.set_word_pos(u128::from(index) * WORDS_PER_NORMAL);
    }

    pub fn next_normal(&mut self) -> f64 {
        standard_normal(&mut self.rng)
    }

    /// Fills `out` with normals `start, start + 1, ...`.
    pub fn fill_from(&mut self, start: u64, out: &mut [f64]) {
        self.seek(start);
        for v in out {
            *v = self.next_normal();
        }
    }
}

/// Uniform random sign vector.
pub fn random_signs<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Vec<f64> {
    (0..n).map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 }).collect()
}
