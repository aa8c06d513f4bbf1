//! Stream-split seeding.
//!
//! Every random quantity in the simulator draws from a ChaCha stream whose
//! seed is a hash of the experiment seed and a path of stream tags (drop
//! index, trial index, entity kind, ...). Any trial or repetition is thereby
//! reproducible in isolation, and parallel execution cannot perturb results.

use num_complex::Complex64;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream tags separating independent random purposes.
pub mod stream {
    pub const NETWORK: u64 = 0x01;
    pub const SHADOWING: u64 = 0x02;
    pub const CHANNEL: u64 = 0x03;
    pub const PILOT_NOISE: u64 = 0x04;
    pub const PILOT_SCHEME: u64 = 0x05;
    pub const DROP: u64 = 0x06;
    pub const TRIALS: u64 = 0x07;
    pub const KMEANS: u64 = 0x08;
    pub const BLOCK_PLAN: u64 = 0x09;
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E3779B97F4A7C15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
    z ^ (z >> 31)
}

/// Hashes a seed and a path of tags into a derived 64-bit seed.
pub fn mix(seed: u64, tags: &[u64]) -> u64 {
    let mut acc = splitmix64(seed);
    for &t in tags {
        acc = splitmix64(acc ^ t.wrapping_mul(0xD6E8FEB86659FD93));
    }
    acc
}

/// Deterministic RNG for the given seed and tag path.
pub fn derive_rng(seed: u64, tags: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(mix(seed, tags))
}

/// Standard real Gaussian N(0, 1) via Box-Muller.
pub fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
    let u1: f64 = 1.0 - rng.gen::<f64>(); // (0, 1]
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

/// Circularly-symmetric complex Gaussian with unit variance, CN(0, 1).
///
/// Box-Muller maps two uniforms straight onto the complex plane: the radius
/// carries the full unit variance and the angle is uniform.
pub fn complex_gaussian(rng: &mut ChaCha8Rng) -> Complex64 {
    let u1: f64 = 1.0 - rng.gen::<f64>();
    let u2: f64 = rng.gen();
    let r = (-u1.ln()).sqrt();
    let theta = std::f64::consts::TAU * u2;
    Complex64::new(r * theta.cos(), r * theta.sin())
}
