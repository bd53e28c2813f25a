use crate::frame_store::BinaryFrameStore;
use crate::image::FloatImage;
use crate::rng::{derive_seed, mix64};
use crate::{Error, Result};

/// Which loss an observation source is trained with.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LossKind {
    /// Squared error against binary detections.
    Quanta,
    /// Squared error against conventional intensities.
    Conventional,
}

/// One training target.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Observation {
    pub frame: usize,
    pub row: usize,
    pub col: usize,
    pub value: f64,
}

/// A frame sequence the trainer can draw uniform minibatches from.
pub trait ObservationSource: Sync {
    fn width(&self) -> usize;
    fn height(&self) -> usize;
    fn frame_count(&self) -> usize;
    fn kind(&self) -> LossKind;
    /// Replaces the contents of `out` with `batch` i.i.d. uniform samples.
    fn sample(&self, batch: usize, seed: u64, out: &mut Vec<Observation>) -> Result<()>;
}

impl ObservationSource for BinaryFrameStore {
    fn width(&self) -> usize {
        BinaryFrameStore::width(self)
    }

    fn height(&self) -> usize {
        BinaryFrameStore::height(self)
    }

    fn frame_count(&self) -> usize {
        BinaryFrameStore::frame_count(self)
    }

    fn kind(&self) -> LossKind {
        LossKind::Quanta
    }

    fn sample(&self, batch: usize, seed: u64, out: &mut Vec<Observation>) -> Result<()> {
        out.clear();
        out.extend(self.sampler(seed)?.take(batch).map(|s| Observation {
            frame: s.frame_index,
            row: s.row,
            col: s.col,
            value: s.value as f64,
        }));
        Ok(())
    }
}

/// Conventional intensity frames held in memory.
#[derive(Debug, Clone)]
pub struct ConventionalFrames {
    frames: Vec<FloatImage>,
}

impl ConventionalFrames {
    pub fn new(frames: Vec<FloatImage>) -> Result<Self> {
        let first = frames.first().ok_or_else(|| Error::invalid("no conventional frames"))?;
        let dims = (first.width(), first.height());
        if let Some(f) = frames.iter().find(|f| (f.width(), f.height()) != dims) {
            return Err(Error::mismatch(
                format!("{}x{}", dims.0, dims.1),
                format!("{}x{}", f.width(), f.height()),
            ));
        }
        Ok(Self { frames })
    }

    pub fn frames(&self) -> &[FloatImage] {
        &self.frames
    }
}

impl ObservationSource for ConventionalFrames {
    fn width(&self) -> usize {
        self.frames[0].width()
    }

    fn height(&self) -> usize {
        self.frames[0].height()
    }

    fn frame_count(&self) -> usize {
        self.frames.len()
    }

    fn kind(&self) -> LossKind {
        LossKind::Conventional
    }

    fn sample(&self, batch: usize, seed: u64, out: &mut Vec<Observation>) -> Result<()> {
        let (w, h) = (self.width() as u64, self.height() as u64);
        let total = self.frames.len() as u64 * w * h;
        out.clear();
        for k in 0..batch as u64 {
            let x = mix64(derive_seed(seed, k));
            let idx = ((x as u128 * total as u128) >> 64) as u64;
            let (frame, pix) = ((idx / (w * h)) as usize, idx % (w * h));
            let (row, col) = ((pix / w) as usize, (pix % w) as usize);
            out.push(Observation {
                frame,
                row,
                col,
                value: self.frames[frame].get(row, col) as f64,
            });
        }
        Ok(())
    }
}
