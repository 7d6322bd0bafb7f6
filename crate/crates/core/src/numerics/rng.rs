//! Seeded random streams.
//!
//! Every stream is a ChaCha8 keystream identified by `(seed, stream)`. The
//! 64-bit stream id selects an independent ChaCha nonce, so two states with the
//! same seed and different stream ids never share output blocks. Children are
//! derived by hashing the parent stream id with SplitMix64 and adding the child
//! index, which is injective in the index for a fixed parent.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::Matrix;

#[derive(Clone, Debug)]
pub struct RngState {
    seed: u64,
    stream: u64,
    inner: ChaCha8Rng,
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

impl RngState {
    pub fn new(seed: u64) -> Self {
        Self::with_stream(seed, 0)
    }

    pub fn with_stream(seed: u64, stream: u64) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(seed);
        inner.set_stream(stream);
        RngState {
            seed,
            stream,
            inner,
        }
    }

    /// Child stream `index` of this state. Independent of how much of the
    /// parent has been consumed.
    pub fn derive(&self, index: u64) -> RngState {
        let base = splitmix64(self.stream ^ 0xD1B5_4A32_D192_ED03);
        Self::with_stream(self.seed, base.wrapping_add(index))
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream(&self) -> u64 {
        self.stream
    }

    pub fn next_u64(&mut self) -> u64 {
        self.inner.random()
    }

    /// Uniform in `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        self.inner.random()
    }

    pub fn uniform_range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    pub fn below(&mut self, n: usize) -> usize {
        self.inner.random_range(0..n)
    }

    pub fn normal(&mut self) -> f64 {
        self.inner.sample(StandardNormal)
    }

    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        items.shuffle(&mut self.inner);
    }

    /// Matrix of i.i.d. standard normal draws, filled row-major.
    pub fn gaussian(&mut self, rows: usize, cols: usize) -> Matrix {
        let data = (0..rows * cols).map(|_| self.normal()).collect();
        Matrix::new(rows, cols, data).expect("length matches shape")
    }
}

/// Standard normal matrix drawn from a fresh copy of `rng`; the input state is not advanced.
pub fn gaussian_sample(rng: &RngState, rows: usize, cols: usize) -> Matrix {
    rng.clone().gaussian(rows, cols)
}
