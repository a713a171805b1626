//! Counter-based Gaussian noise.
//!
//! Every draw is addressed by `(seed, step, particle, coordinate)`: the seed
//! keys a ChaCha8 generator, the step selects the stream and the particle
//! selects a disjoint window of the block counter. Runs therefore never
//! depend on evaluation order, and particle `j` sees the same noise whether
//! the ensemble has `J` or `J' > j` members.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// Words reserved per particle in one stream; far more than any dimension
/// can consume.
const WORDS_PER_PARTICLE: u128 = 1 << 32;

/// Stream used for drawing the initial ensemble.
pub const INIT_STREAM: u64 = 0;

/// SplitMix64 finalizer.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Deterministic child seed for replicate `index` of a sweep rooted at `seed`.
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    mix64(mix64(seed) ^ index.wrapping_mul(0xD1B5_4A32_D192_ED03))
}

#[derive(Clone, Debug)]
pub struct NoiseStream {
    key: [u8; 32],
}

impl NoiseStream {
    pub fn new(seed: u64) -> Self {
        let mut key = [0u8; 32];
        let mut s = seed;
        for chunk in key.chunks_exact_mut(8) {
            s = mix64(s);
            chunk.copy_from_slice(&s.to_le_bytes());
        }
        Self { key }
    }

    /// Generator positioned at the start of `particle`'s window in `stream`.
    pub fn rng(&self, stream: u64, particle: usize) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::from_seed(self.key);
        rng.set_stream(stream);
        rng.set_word_pos(particle as u128 * WORDS_PER_PARTICLE);
        rng
    }

    /// Standard normal draws for all particles of one time step, row-major
    /// `particles × dim`. Step `k` uses stream `k + 1`.
    pub fn step_normals(&self, step: usize, particles: usize, dim: usize) -> Vec<f64> {
        let mut out = Vec::with_capacity(particles * dim);
        for j in 0..particles {
            let mut rng = self.rng(step as u64 + 1, j);
            out.extend((0..dim).map(|_| rng.sample::<f64, _>(StandardNormal)));
        }
        out
    }
}
