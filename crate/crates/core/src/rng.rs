//! Seeded randomness. Every stochastic step (initialization, OOV rows,
//! dropout masks, shuffling, fold assignment) draws from an [`RngStream`].

use rand::seq::SliceRandom;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Deterministic ChaCha8 stream. Same seed, same sequence.
#[derive(Clone, Debug)]
pub struct RngStream {
    seed: u64,
    inner: ChaCha8Rng,
}

impl RngStream {
    pub fn new(seed: u64) -> Self {
        RngStream {
            seed,
            inner: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// `n` draws from `[lo, hi)`.
    pub fn uniform(&mut self, lo: f64, hi: f64, n: usize) -> Result<Tensor> {
        if !(lo < hi) {
            return Err(Error::arg(format!("uniform range [{lo}, {hi}) is empty")));
        }
        let data = (0..n).map(|_| self.inner.gen_range(lo..hi)).collect();
        Ok(Tensor::vector(data))
    }

    pub fn next_f64(&mut self) -> f64 {
        self.inner.gen::<f64>()
    }

    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    /// Derives an independent child stream, advancing this one.
    pub fn fork(&mut self) -> RngStream {
        RngStream::new(self.next_u64())
    }

    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        items.shuffle(&mut self.inner);
    }
}
