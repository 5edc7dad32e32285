//! Reproducible random streams.
//!
//! Every stochastic decision draws from a stream keyed by
//! `(seed, purpose, step, index)`, so the draws a given face or cell sees do
//! not depend on how work is scheduled across threads.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// What a stream is used for. Part of the stream key.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
#[repr(u64)]
pub enum StreamKind {
    Injection = 1,
    Collision = 2,
    Sampling = 3,
}

#[inline]
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// A random stream identified by its key.
#[derive(Clone, Debug)]
pub struct RngStream {
    inner: ChaCha8Rng,
}

impl RngStream {
    pub fn new(seed: u64, kind: StreamKind, step: u64, index: u64) -> Self {
        let mut key = [0u8; 32];
        let mut h = splitmix64(seed);
        for (chunk, word) in key
            .chunks_exact_mut(8)
            .zip([kind as u64, step, index, 0x5eed])
        {
            h = splitmix64(h ^ word);
            chunk.copy_from_slice(&h.to_le_bytes());
        }
        Self {
            inner: ChaCha8Rng::from_seed(key),
        }
    }

    /// Stream for ad-hoc use (tests, sampling utilities).
    pub fn from_seed(seed: u64) -> Self {
        Self::new(seed, StreamKind::Sampling, 0, 0)
    }
}

impl RngCore for RngStream {
    fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.inner.fill_bytes(dst)
    }
}
