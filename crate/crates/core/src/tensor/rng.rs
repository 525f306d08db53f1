//! Seeded randomness for the whole engine.
//!
//! Every random choice (initialization, shuffling, sampling) flows through
//! [`EngineRng`] so that a run is fully determined by its seed.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::Tensor;

/// FNV-1a over the UTF-8 bytes; stable across platforms and releases.
pub fn stable_hash(text: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in text.as_bytes() {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x100_0000_01b3);
    }
    h
}

pub struct EngineRng {
    inner: ChaCha8Rng,
}

impl EngineRng {
    pub fn from_seed(seed: u64) -> Self {
        Self {
            inner: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    /// Independent stream derived from a master seed, a purpose tag and a
    /// round index. Tags keep unrelated consumers (init, shuffling,
    /// sampling) from sharing a stream.
    pub fn derive(master: u64, tag: &str, round: u64) -> Self {
        let mixed = stable_hash(tag)
            .wrapping_mul(0x9e37_79b9_7f4a_7c15)
            .wrapping_add(master)
            .rotate_left(17)
            .wrapping_add(round.wrapping_mul(0xbf58_476d_1ce4_e5b9));
        Self::from_seed(mixed)
    }

    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        self.inner.gen_range(lo..hi)
    }

    pub fn index(&mut self, n: usize) -> usize {
        self.inner.gen_range(0..n)
    }

    pub fn coin(&mut self) -> bool {
        self.inner.gen::<bool>()
    }

    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        items.shuffle(&mut self.inner);
    }
}

/// Weight init: uniform in ±sqrt(6 / (fan_in + fan_out)).
pub fn glorot_uniform(rng: &mut EngineRng, rows: usize, cols: usize) -> Tensor {
    let bound = (6.0 / (rows + cols) as f64).sqrt();
    uniform_tensor(rng, &[rows, cols], bound)
}

/// Uniform init in ±bound, used for embedding tables.
pub fn uniform_tensor(rng: &mut EngineRng, shape: &[usize], bound: f64) -> Tensor {
    let n: usize = shape.iter().product();
    let data = (0..n).map(|_| rng.uniform(-bound, bound)).collect();
    Tensor::new(shape.to_vec(), data).expect("shape/data agree by construction")
}
