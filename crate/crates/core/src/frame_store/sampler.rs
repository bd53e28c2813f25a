use crate::rng::{derive_seed, mix64};
use crate::{Error, Result};

use super::BinaryFrameStore;

/// One minibatch element: an observed bit and where it came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct PixelSample {
    pub frame_index: usize,
    pub row: usize,
    pub col: usize,
    pub value: u8,
}

/// Infinite stream of i.i.d. uniform samples over every
/// `(frame, row, col)` in a store, decoding exactly one bit per sample.
///
/// Sample `k` is a pure function of `(seed, k)`, so no index permutation is
/// ever materialised.
pub struct SampleStream<'a> {
    store: &'a BinaryFrameStore,
    seed: u64,
    next: u64,
    total: u64,
    decoded: usize,
}

impl<'a> SampleStream<'a> {
    pub(super) fn new(store: &'a BinaryFrameStore, seed: u64) -> Result<Self> {
        let total = store.frame_count() as u64 * store.pixels_per_frame() as u64;
        if total == 0 {
            return Err(Error::invalid("cannot sample from an empty store"));
        }
        Ok(Self {
            store,
            seed,
            next: 0,
            total,
            decoded: 0,
        })
    }

    /// Number of pixels decoded from the payload so far.
    pub fn decoded_pixels(&self) -> usize {
        self.decoded
    }

    /// Where sample `k` lands, without decoding it.
    pub fn locate(&self, k: u64) -> (usize, usize, usize) {
        let x = mix64(derive_seed(self.seed, k));
        let idx = ((x as u128 * self.total as u128) >> 64) as u64;
        let ppf = self.store.pixels_per_frame() as u64;
        let w = self.store.width() as u64;
        let frame = idx / ppf;
        let pix = idx % ppf;
        (frame as usize, (pix / w) as usize, (pix % w) as usize)
    }
}

impl Iterator for SampleStream<'_> {
    type Item = PixelSample;

    fn next(&mut self) -> Option<PixelSample> {
        let (frame_index, row, col) = self.locate(self.next);
        self.next += 1;
        self.decoded += 1;
        Some(PixelSample {
            frame_index,
            row,
            col,
            value: self.store.bit(frame_index, row, col),
        })
    }
}
