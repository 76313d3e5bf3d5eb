//! Seeded randomness: uniform ring elements, ternary secrets, and a
//! truncated discrete Gaussian via inversion from a cumulative table.

use std::sync::Arc;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha20Rng;

use super::{cmod, Poly, RingCtx};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SampleKind {
    /// Uniform over the centered residue ring of the tagged modulus.
    Uniform,
    /// Uniform over {-1, 0, 1}.
    Ternary,
    /// Zero-mean discrete Gaussian, truncated at the configured bound.
    Gaussian,
}

#[derive(Debug, Clone)]
pub struct NoiseSampler {
    rng: ChaCha20Rng,
    std_dev: f64,
    bound: i64,
    /// cumulative probabilities over support [-bound, bound]
    cdf: Vec<f64>,
}

impl NoiseSampler {
    /// The default error distribution: standard deviation 3.2, bound 19.2.
    pub fn new(seed: u64) -> Self {
        Self::with_params(seed, 3.2, 19.2)
    }

    pub fn with_params(seed: u64, std_dev: f64, bound: f64) -> Self {
        assert!(std_dev > 0.0 && bound > 0.0);
        let b = bound.floor() as i64;
        let weights: Vec<f64> = (-b..=b)
            .map(|k| (-((k * k) as f64) / (2.0 * std_dev * std_dev)).exp())
            .collect();
        let total: f64 = weights.iter().sum();
        let mut acc = 0.0;
        let cdf = weights
            .iter()
            .map(|w| {
                acc += w / total;
                acc
            })
            .collect();
        Self {
            rng: ChaCha20Rng::seed_from_u64(seed),
            std_dev,
            bound: b,
            cdf,
        }
    }

    pub fn std_dev(&self) -> f64 {
        self.std_dev
    }

    pub fn bound(&self) -> i64 {
        self.bound
    }

    pub fn gaussian_scalar(&mut self) -> i64 {
        let u: f64 = self.rng.gen();
        let idx = self.cdf.partition_point(|&c| c <= u);
        idx.min(self.cdf.len() - 1) as i64 - self.bound
    }

    pub fn ternary_scalar(&mut self) -> i8 {
        self.rng.gen_range(-1i8..=1)
    }

    pub fn ternary_coeffs(&mut self, n: usize) -> Vec<i8> {
        (0..n).map(|_| self.ternary_scalar()).collect()
    }

    pub fn sample_poly(&mut self, kind: SampleKind, ctx: &Arc<RingCtx>) -> Poly {
        let n = ctx.n();
        let coeffs: Vec<i128> = match kind {
            SampleKind::Uniform => {
                let m = ctx.modulus();
                (0..n)
                    .map(|_| cmod(self.rng.gen_range(0..m) as i128, m))
                    .collect()
            }
            SampleKind::Ternary => (0..n).map(|_| self.ternary_scalar() as i128).collect(),
            SampleKind::Gaussian => (0..n).map(|_| self.gaussian_scalar() as i128).collect(),
        };
        Poly::from_coeffs(ctx, coeffs)
    }
}
