//! Seedable, splittable random streams.
//!
//! Every stochastic step draws from an [`RngStream`]. Work that fans out over
//! particles first calls [`RngStream::split`] on the driving stream and hands
//! particle `i` the substream `i` of the resulting [`StreamFamily`]. Substreams
//! are distinct ChaCha streams under one key, so the outcome of a sweep does
//! not depend on how particles are scheduled onto threads.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

#[derive(Clone, Debug)]
pub struct RngStream(ChaCha8Rng);

impl RngStream {
    pub fn from_seed(seed: u64) -> Self {
        Self(ChaCha8Rng::seed_from_u64(seed))
    }

    /// Derive a family of independent substreams, advancing `self` by one draw.
    pub fn split(&mut self) -> StreamFamily {
        StreamFamily {
            key: self.0.next_u64(),
        }
    }

    /// Uniform on `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        self.0.random::<f64>()
    }

    pub fn normal(&mut self) -> f64 {
        self.0.sample(StandardNormal)
    }

    /// Index drawn with probability proportional to `weights`.
    pub fn categorical(&mut self, weights: &[f64]) -> usize {
        let total: f64 = weights.iter().sum();
        let mut target = self.uniform() * total;
        for (i, w) in weights.iter().enumerate() {
            if target < *w {
                return i;
            }
            target -= w;
        }
        // round-off can leave a sliver past the last bin
        weights.iter().rposition(|w| *w > 0.0).unwrap_or(0)
    }

    /// Uniform index in `0..n`.
    pub fn index(&mut self, n: usize) -> usize {
        self.0.random_range(0..n)
    }
}

impl RngCore for RngStream {
    fn next_u32(&mut self) -> u32 {
        self.0.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.0.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.0.fill_bytes(dst)
    }
}

/// Keyed family of substreams produced by [`RngStream::split`].
#[derive(Clone, Copy, Debug)]
pub struct StreamFamily {
    key: u64,
}

impl StreamFamily {
    pub fn stream(&self, index: u64) -> RngStream {
        let mut inner = ChaCha8Rng::seed_from_u64(self.key);
        inner.set_stream(index);
        RngStream(inner)
    }
}
