//! Deterministic, path-derived random number streams.
//!
//! Every piece of randomness in the crate flows through an [`RngStream`],
//! which is keyed by a 64-bit master seed plus a derivation path of 64-bit
//! labels. Two streams with equal `(master_seed, path)` are identical;
//! streams with different paths are independent for practical purposes.
//! Parallel work derives one child stream per work item (e.g. bootstrap
//! replicate `(b1, b2)` uses path `[.., b1, b2]`), so results do not depend
//! on thread count or scheduling.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha12Rng;
use sha2::{Digest, Sha256};

/// A deterministic random stream identified by `(master_seed, path)`.
#[derive(Debug, Clone)]
pub struct RngStream {
    master_seed: u64,
    path: Vec<u64>,
    rng: ChaCha12Rng,
}

fn derive_key(master_seed: u64, path: &[u64]) -> [u8; 32] {
    let mut hasher = Sha256::new();
    hasher.update(b"truh-rng-v1");
    hasher.update(master_seed.to_le_bytes());
    for label in path {
        hasher.update(label.to_le_bytes());
    }
    hasher.finalize().into()
}

impl RngStream {
    pub fn new(master_seed: u64, path: &[u64]) -> Self {
        let key = derive_key(master_seed, path);
        RngStream {
            master_seed,
            path: path.to_vec(),
            rng: ChaCha12Rng::from_seed(key),
        }
    }

    /// Derives a fresh stream whose path is this stream's path plus `label`.
    /// Derivation depends only on the identity of the stream, never on how
    /// much of it has been consumed.
    pub fn child(&self, label: u64) -> RngStream {
        let mut path = self.path.clone();
        path.push(label);
        RngStream::new(self.master_seed, &path)
    }

    pub fn master_seed(&self) -> u64 {
        self.master_seed
    }

    pub fn path(&self) -> &[u64] {
        &self.path
    }

    /// Uniform draw on [0, 1).
    pub fn uniform(&mut self) -> f64 {
        self.rng.gen::<f64>()
    }

    /// Standard normal draw.
    pub fn normal(&mut self) -> f64 {
        rand::Rng::sample(&mut self.rng, rand_distr::StandardNormal)
    }

    /// Uniform integer in [0, n).
    pub fn index(&mut self, n: usize) -> usize {
        self.rng.gen_range(0..n)
    }

    /// Gamma(shape, scale=1) draw via Marsaglia-Tsang.
    pub fn gamma(&mut self, shape: f64) -> f64 {
        debug_assert!(shape > 0.0);
        if shape < 1.0 {
            // boost: Gamma(a) = Gamma(a+1) * U^{1/a}
            let u: f64 = self.uniform().max(f64::MIN_POSITIVE);
            return self.gamma(shape + 1.0) * u.powf(1.0 / shape);
        }
        let d = shape - 1.0 / 3.0;
        let c = 1.0 / (9.0 * d).sqrt();
        loop {
            let x = self.normal();
            let v = 1.0 + c * x;
            if v <= 0.0 {
                continue;
            }
            let v = v * v * v;
            let u = self.uniform();
            if u < 1.0 - 0.0331 * x.powi(4)
                || u.ln() < 0.5 * x * x + d * (1.0 - v + v.ln())
            {
                return d * v;
            }
        }
    }

    /// Sample `k` distinct indices from [0, n) without replacement
    /// (partial Fisher-Yates).
    pub fn sample_without_replacement(&mut self, n: usize, k: usize) -> Vec<usize> {
        debug_assert!(k <= n);
        let mut pool: Vec<usize> = (0..n).collect();
        for i in 0..k {
            let j = i + self.index(n - i);
            pool.swap(i, j);
        }
        pool.truncate(k);
        pool
    }
}

impl RngCore for RngStream {
    fn next_u32(&mut self) -> u32 {
        self.rng.next_u32()
    }
    fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }
    fn fill_bytes(&mut self, dest: &mut [u8]) {
        self.rng.fill_bytes(dest)
    }
    fn try_fill_bytes(&mut self, dest: &mut [u8]) -> std::result::Result<(), rand::Error> {
        self.rng.try_fill_bytes(dest)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_same_path_identical() {
        let mut a = RngStream::new(42, &[1, 2]);
        let mut b = RngStream::new(42, &[1, 2]);
        for _ in 0..100 {
            assert_eq!(a.uniform(), b.uniform());
        }
    }

    #[test]
    fn different_paths_diverge() {
        let mut a = RngStream::new(42, &[1, 2]);
        let mut b = RngStream::new(42, &[1, 3]);
        let xa: Vec<f64> = (0..100).map(|_| a.uniform()).collect();
        let xb: Vec<f64> = (0..100).map(|_| b.uniform()).collect();
        assert_ne!(xa, xb);
    }

    #[test]
    fn child_derivation_ignores_consumption() {
        let mut a = RngStream::new(7, &[]);
        let _ = a.uniform();
        let mut c1 = a.child(5);
        let mut c2 = RngStream::new(7, &[5]);
        assert_eq!(c1.uniform(), c2.uniform());
    }

    #[test]
    fn normal_moments() {
        // law-of-large-numbers check on 10^6 standard normal draws
        let mut rng = RngStream::new(42, &[]);
        let n = 1_000_000;
        let mut sum = 0.0;
        let mut sumsq = 0.0;
        for _ in 0..n {
            let x = rng.normal();
            sum += x;
            sumsq += x * x;
        }
        let mean = sum / n as f64;
        let var = sumsq / n as f64 - mean * mean;
        assert!(mean.abs() < 4e-3, "mean = {mean}");
        assert!((var - 1.0).abs() < 1e-2, "var = {var}");
    }

    #[test]
    fn gamma_mean() {
        let mut rng = RngStream::new(1, &[9]);
        let n = 200_000;
        let shape = 5.0;
        let mean: f64 = (0..n).map(|_| rng.gamma(shape)).sum::<f64>() / n as f64;
        assert!((mean - shape).abs() < 0.05, "mean = {mean}");
    }

    #[test]
    fn sample_without_replacement_distinct() {
        let mut rng = RngStream::new(3, &[]);
        let s = rng.sample_without_replacement(10, 10);
        let mut sorted = s.clone();
        sorted.sort_unstable();
        assert_eq!(sorted, (0..10).collect::<Vec<_>>());
    }
}
