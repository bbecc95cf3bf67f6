//! Reproducible Wiener increments and per-trajectory seed derivation.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

/// SplitMix64 finaliser: a bijection on `u64`.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of trajectory `index` in an ensemble rooted at `base_seed`.
/// Injective in `index` for a fixed base (a composition of bijections).
pub fn trajectory_seed(base_seed: u64, index: u64) -> u64 {
    mix64(base_seed.wrapping_add(mix64(index)))
}

/// Stream of Wiener increments `dW ~ N(0, dt)` drawn in a fixed order.
#[derive(Clone, Debug)]
pub struct NoiseStream {
    seed: u64,
    dt: f64,
    refinement: usize,
    sub_scale: f64,
    rng: ChaCha8Rng,
}

impl NoiseStream {
    pub fn new(seed: u64, dt: f64) -> Self {
        Self::with_refinement(seed, dt, 1)
    }

    /// Each increment is the sum of `refinement` independent sub-increments of
    /// variance `dt/refinement`, so a stream at `(dt, 2)` and one at `(dt/2, 1)`
    /// with the same seed sample the same Brownian path.
    pub fn with_refinement(seed: u64, dt: f64, refinement: usize) -> Self {
        let refinement = refinement.max(1);
        NoiseStream {
            seed,
            dt,
            refinement,
            sub_scale: (dt / refinement as f64).sqrt(),
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn next_dw(&mut self) -> f64 {
        let mut s = 0.0;
        for _ in 0..self.refinement {
            let z: f64 = StandardNormal.sample(&mut self.rng);
            s += z;
        }
        s * self.sub_scale
    }
}
