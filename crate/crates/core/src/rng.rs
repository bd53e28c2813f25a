//! Counter-based random streams.
//!
//! Every random quantity in the crate is addressed by `(seed, stream)`: the
//! value drawn for pixel 17 of frame 3 does not depend on which thread drew
//! it or in what order. Streams are SplitMix64 sequences whose starting state
//! is a hash of the key pair.

use rand::RngCore;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 finaliser; a bijective 64-bit mixer.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives an independent child seed from `(seed, index)`.
#[inline]
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    mix64(seed ^ mix64(index.wrapping_add(GOLDEN)))
}

/// Uniform in `[0, 1)` addressed directly by `(seed, counter)`.
#[inline]
pub fn counter_uniform(seed: u64, counter: u64) -> f64 {
    let bits = mix64(derive_seed(seed, counter));
    (bits >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// A random stream keyed by `(seed, stream)`. Implements [`RngCore`] so the
/// `rand_distr` samplers can draw from it.
#[derive(Debug, Clone)]
pub struct StreamRng {
    state: u64,
}

impl StreamRng {
    pub fn new(seed: u64, stream: u64) -> Self {
        Self {
            state: derive_seed(seed, stream),
        }
    }
}

impl RngCore for StreamRng {
    #[inline]
    fn next_u32(&mut self) -> u32 {
        (self.next_u64() >> 32) as u32
    }

    #[inline]
    fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(GOLDEN);
        mix64(self.state)
    }

    fn fill_bytes(&mut self, dest: &mut [u8]) {
        for chunk in dest.chunks_mut(8) {
            let v = self.next_u64().to_le_bytes();
            chunk.copy_from_slice(&v[..chunk.len()]);
        }
    }
}
