//! Seeded, splittable random generation.
//!
//! ChaCha8 with an explicit 64-bit stream counter: identical (seed, stream)
//! pairs replay identical draws on every platform, and distinct streams from
//! one seed never overlap. Standard normals use the Marsaglia polar method
//! (the one fixed choice for this crate); its rejection loop is a
//! deterministic function of the underlying uniform stream, and the second
//! variate of each accepted pair is cached.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Deterministic generator for one (seed, stream) pair.
pub struct StreamRng {
    rng: ChaCha8Rng,
    spare_normal: Option<f64>,
}

/// Entry point used throughout the crate: substreams for replicates,
/// permutations and Monte Carlo draws all come from here.
pub fn rng_stream(seed: u64, stream: u64) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    StreamRng { rng, spare_normal: None }
}

impl StreamRng {
    /// Uniform on [0, 1) with 53-bit resolution.
    pub fn uniform(&mut self) -> f64 {
        self.rng.gen::<f64>()
    }

    pub fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    /// Standard normal via Marsaglia polar.
    pub fn normal(&mut self) -> f64 {
        if let Some(v) = self.spare_normal.take() {
            return v;
        }
        loop {
            let u = 2.0 * self.uniform() - 1.0;
            let v = 2.0 * self.uniform() - 1.0;
            let s = u * u + v * v;
            if s > 0.0 && s < 1.0 {
                let f = (-2.0 * s.ln() / s).sqrt();
                self.spare_normal = Some(v * f);
                return u * f;
            }
        }
    }

    /// Chi-square with `df` degrees of freedom as a sum of squared normals.
    pub fn chi_square(&mut self, df: usize) -> f64 {
        (0..df)
            .map(|_| {
                let z = self.normal();
                z * z
            })
            .sum()
    }

    /// Student t with 3 degrees of freedom: Z / sqrt(W/3), W ~ chi-square(3).
    pub fn t3(&mut self) -> f64 {
        let z = self.normal();
        let w = self.chi_square(3);
        z / (w / 3.0).sqrt()
    }

    /// -1 or +1 with equal probability.
    pub fn rademacher(&mut self) -> f64 {
        if self.uniform() < 0.5 {
            -1.0
        } else {
            1.0
        }
    }

    /// Correlated standard-normal pair with correlation `rho`.
    pub fn normal_pair(&mut self, rho: f64) -> (f64, f64) {
        let z1 = self.normal();
        let z2 = rho * z1 + (1.0 - rho * rho).sqrt() * self.normal();
        (z1, z2)
    }

    /// Bivariate t3 pair with scale correlation `rho`: one shared chi-square
    /// divisor across both coordinates.
    pub fn t3_pair(&mut self, rho: f64) -> (f64, f64) {
        let (z1, z2) = self.normal_pair(rho);
        let w = self.chi_square(3);
        let scale = (w / 3.0).sqrt();
        (z1 / scale, z2 / scale)
    }

    /// Fisher-Yates shuffle driven by this stream.
    pub fn shuffle<T>(&mut self, xs: &mut [T]) {
        use rand::seq::SliceRandom;
        xs.shuffle(&mut self.rng);
    }
}
