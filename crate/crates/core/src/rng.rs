//! Seeded randomness. Every stochastic stage takes an explicit `u64` seed.

use alloc::vec::Vec;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub type SeededRng = ChaCha8Rng;

pub fn seeded(seed: u64) -> SeededRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Derives an independent child seed (splitmix64 finaliser).
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed
        ^ stream
            .wrapping_mul(0x9E37_79B9_7F4A_7C15)
            .wrapping_add(0x632B_E59B_D9B4_E019);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn standard_normals(seed: u64, n: usize) -> Vec<f64> {
    let mut rng = seeded(seed);
    (0..n)
        .map(|_| rng.sample::<f64, _>(StandardNormal))
        .collect()
}

/// White Gaussian noise with the given standard deviation.
pub fn white_noise(seed: u64, n: usize, std_dev: f64) -> Vec<f64> {
    let mut rng = seeded(seed);
    (0..n)
        .map(|_| std_dev * rng.sample::<f64, _>(StandardNormal))
        .collect()
}
