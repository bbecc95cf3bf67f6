//! Classical standard-map ensembles with optional momentum noise.

use std::f64::consts::TAU;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Result, RotorError};
use crate::noise::trajectory_seed;
use crate::spectral::pairwise_sum;

/// Variance of the per-period momentum kick, in units of `D_env`, that
/// reproduces the quantum free-particle heating `d⟨p²⟩/dt = 2k·k̄² = 2·D_env`.
pub const NOISE_FACTOR: f64 = 2.0;

/// One kick then one unit of free flight. `q` is not wrapped.
pub fn map_step(q: f64, p: f64, kappa: f64) -> (f64, f64) {
    let p1 = p + kappa * q.sin();
    (q + p1, p1)
}

/// Jacobian of [`map_step`] at `q`.
pub fn tangent_map(q: f64, kappa: f64) -> [[f64; 2]; 2] {
    let c = kappa * q.cos();
    // p' = p + κ sin q, q' = q + p'
    [[1.0 + c, 1.0], [c, 1.0]]
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassicalParams {
    pub kappa: f64,
    pub d_env: f64,
    pub noise_factor: f64,
    pub n_particles: usize,
    pub n_kicks: usize,
    /// Independent RNG partitions; results depend on this and the seed only.
    pub partitions: usize,
}

impl ClassicalParams {
    pub fn new(kappa: f64, d_env: f64, n_particles: usize, n_kicks: usize) -> Self {
        ClassicalParams {
            kappa,
            d_env,
            noise_factor: NOISE_FACTOR,
            n_particles,
            n_kicks,
            partitions: 16,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.kappa >= 0.0) {
            return Err(RotorError::param("kappa", "must be non-negative"));
        }
        if !(self.d_env >= 0.0) {
            return Err(RotorError::param("d_env", "must be non-negative"));
        }
        if !(self.noise_factor >= 0.0) {
            return Err(RotorError::param("noise_factor", "must be non-negative"));
        }
        if self.n_particles == 0 {
            return Err(RotorError::param("n_particles", "need at least one particle"));
        }
        if self.partitions == 0 {
            return Err(RotorError::param("partitions", "need at least one partition"));
        }
        Ok(())
    }
}

/// Particles start uniform in `q` over one period with `p = 0`.
#[derive(Clone, Debug)]
pub struct ClassicalEnsemble {
    pub params: ClassicalParams,
    pub seed: u64,
    pub particles: Vec<(f64, f64)>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassicalSeries {
    pub t: Vec<f64>,
    pub mean_p2: Vec<f64>,
    pub sem_p2: Vec<f64>,
}

impl ClassicalEnsemble {
    pub fn new(params: ClassicalParams, seed: u64) -> Result<Self> {
        params.validate()?;
        let mut particles = Vec::with_capacity(params.n_particles);
        for part in partition_ranges(params.n_particles, params.partitions) {
            let mut rng = ChaCha8Rng::seed_from_u64(trajectory_seed(seed, part.0 as u64));
            for _ in part.0..part.1 {
                particles.push((rng.random::<f64>() * TAU, 0.0));
            }
        }
        Ok(ClassicalEnsemble {
            params,
            seed,
            particles,
        })
    }

    /// Evolve in place for `n_kicks` periods and return `⟨p²⟩` sampled just
    /// before each kick (`n_kicks + 1` samples). Each period applies the
    /// kick, a Gaussian momentum increment of variance `noise_factor·d_env`,
    /// then free flight.
    pub fn noisy_evolve(&mut self) -> ClassicalSeries {
        let p = self.params;
        let sigma = (p.noise_factor * p.d_env).sqrt();
        let ranges = partition_ranges(p.n_particles, p.partitions);
        let mut chunks: Vec<&mut [(f64, f64)]> = Vec::with_capacity(ranges.len());
        let mut rest: &mut [(f64, f64)] = &mut self.particles;
        for r in &ranges {
            let (head, tail) = rest.split_at_mut(r.1 - r.0);
            chunks.push(head);
            rest = tail;
        }
        let seed = self.seed;
        // per-partition p² trajectories, merged below in a fixed order
        let per_part: Vec<Vec<Vec<f64>>> = chunks
            .into_par_iter()
            .zip(ranges.par_iter())
            .map(|(chunk, r)| {
                let mut rng = ChaCha8Rng::seed_from_u64(trajectory_seed(
                    seed ^ 0xA5A5_A5A5_A5A5_A5A5,
                    r.0 as u64,
                ));
                let mut series = Vec::with_capacity(p.n_kicks + 1);
                series.push(chunk.iter().map(|x| x.1 * x.1).collect::<Vec<_>>());
                for _ in 0..p.n_kicks {
                    for x in chunk.iter_mut() {
                        let mut pp = x.1 + p.kappa * x.0.sin();
                        if sigma > 0.0 {
                            let z: f64 = StandardNormal.sample(&mut rng);
                            pp += sigma * z;
                        }
                        x.0 += pp;
                        x.1 = pp;
                    }
                    series.push(chunk.iter().map(|x| x.1 * x.1).collect());
                }
                series
            })
            .collect();

        let n = p.n_particles as f64;
        let mut out = ClassicalSeries {
            t: Vec::with_capacity(p.n_kicks + 1),
            mean_p2: Vec::with_capacity(p.n_kicks + 1),
            sem_p2: Vec::with_capacity(p.n_kicks + 1),
        };
        let mut all = Vec::with_capacity(p.n_particles);
        for step in 0..=p.n_kicks {
            all.clear();
            for part in &per_part {
                all.extend_from_slice(&part[step]);
            }
            let mean = pairwise_sum(&all) / n;
            let dev: Vec<f64> = all.iter().map(|v| (v - mean) * (v - mean)).collect();
            let sem = if p.n_particles > 1 {
                (pairwise_sum(&dev) / (n - 1.0) / n).sqrt()
            } else {
                0.0
            };
            out.t.push(step as f64);
            out.mean_p2.push(mean);
            out.sem_p2.push(sem);
        }
        out
    }
}

fn partition_ranges(n: usize, parts: usize) -> Vec<(usize, usize)> {
    let parts = parts.min(n).max(1);
    (0..parts)
        .map(|i| (i * n / parts, (i + 1) * n / parts))
        .collect()
}
