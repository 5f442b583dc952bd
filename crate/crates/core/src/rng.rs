//! Seeded, reproducible Gaussian sampling.
//!
//! The generator is pinned so golden-file tests are portable:
//!
//! * Word stream: ChaCha8 (`rand_chacha::ChaCha8Rng`), seeded through
//!   `SeedableRng::seed_from_u64`. The stream is specified by the ChaCha
//!   function itself and is identical across platforms.
//! * Uniforms: a `u64` word maps to `(0, 1]` as `((w >> 11) + 1) · 2⁻⁵³`,
//!   keeping 53 bits and excluding zero so logs stay finite.
//! * Gaussians: the Box–Muller transform. Each Gaussian consumes exactly two
//!   stream words and returns `√(−2 ln u₁) · cos(2π u₂)`.
//!
//! Parallel work must not share one generator; derive independent child
//! streams with [`SeededRng::child`], which mixes the parent seed and the
//! child index through SplitMix64.

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

use crate::error::{Error, Result};
use crate::tensor::Tensor;

const TWO_POW_NEG_53: f64 = 1.0 / (1u64 << 53) as f64;

/// SplitMix64 finalizer (Steele, Lea, Flood 2014). Used only for deriving
/// decorrelated child seeds.
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Deterministic random stream identified by a 64-bit seed.
#[derive(Debug, Clone)]
pub struct SeededRng {
    seed: u64,
    words_drawn: u64,
    inner: ChaCha8Rng,
}

impl SeededRng {
    pub fn new(seed: u64) -> Self {
        SeededRng {
            seed,
            words_drawn: 0,
            inner: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Number of `u64` words consumed so far (the stream position).
    pub fn words_drawn(&self) -> u64 {
        self.words_drawn
    }

    /// Independent child stream for parallel or per-trial use. Children with
    /// distinct indices (and the parent) never share stream prefixes.
    pub fn child(&self, index: u64) -> SeededRng {
        SeededRng::new(splitmix64(self.seed ^ splitmix64(index.wrapping_add(1))))
    }

    pub fn next_u64(&mut self) -> u64 {
        self.words_drawn += 1;
        self.inner.next_u64()
    }

    /// Uniform draw in `(0, 1]` with 53-bit resolution.
    pub fn next_uniform(&mut self) -> f64 {
        ((self.next_u64() >> 11) + 1) as f64 * TWO_POW_NEG_53
    }

    /// Standard normal draw; consumes exactly two stream words.
    pub fn next_gaussian(&mut self) -> f64 {
        let u1 = self.next_uniform();
        let u2 = ((self.next_u64() >> 11) as f64) * TWO_POW_NEG_53;
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }

    /// Tensor of i.i.d. `N(0, std²)` entries. `std = 0` yields the zero
    /// tensor; the stream advances by two words per entry either way.
    pub fn sample_gaussian(&mut self, shape: &[usize], std: f64) -> Result<Tensor> {
        if !(std >= 0.0) {
            return Err(Error::invalid(
                "std",
                format!("must be nonnegative, got {std}"),
            ));
        }
        let len: usize = shape.iter().product();
        let mut data = Vec::with_capacity(len);
        for _ in 0..len {
            data.push(std * self.next_gaussian());
        }
        Tensor::new(shape.to_vec(), data)
    }

    /// Tensor of i.i.d. standard normal entries.
    pub fn sample_standard(&mut self, shape: &[usize]) -> Result<Tensor> {
        self.sample_gaussian(shape, 1.0)
    }
}
