use std::path::Path;

use super::{BinaryFrame, BinaryFrameStore, StoreHeader, StoreMeta, StoreWriter};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Defect {
    /// Always reads 0.
    Dead,
    /// Always reads 1.
    Hot,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DefectMask {
    width: usize,
    height: usize,
    defects: Vec<Option<Defect>>,
}

impl DefectMask {
    pub fn new(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            defects: vec![None; width * height],
        }
    }

    pub fn from_lists(width: usize, height: usize, dead: &[(usize, usize)], hot: &[(usize, usize)]) -> Result<Self> {
        let mut mask = Self::new(width, height);
        for &(r, c) in dead {
            mask.mark(r, c, Defect::Dead)?;
        }
        for &(r, c) in hot {
            mask.mark(r, c, Defect::Hot)?;
        }
        Ok(mask)
    }

    pub fn mark(&mut self, row: usize, col: usize, defect: Defect) -> Result<()> {
        if row >= self.height || col >= self.width {
            return Err(Error::OutOfRange(format!("defect ({row}, {col}) outside {}x{}", self.width, self.height)));
        }
        self.defects[row * self.width + col] = Some(defect);
        Ok(())
    }

    pub fn defects(&self) -> &[Option<Defect>] {
        &self.defects
    }

    pub fn get(&self, row: usize, col: usize) -> Option<Defect> {
        self.defects[row * self.width + col]
    }

    pub fn count(&self) -> usize {
        self.defects.iter().filter(|d| d.is_some()).count()
    }

    pub fn is_empty(&self) -> bool {
        self.count() == 0
    }

    pub(crate) fn check_dims(&self, width: usize, height: usize) -> Result<()> {
        if (width, height) != (self.width, self.height) {
            return Err(Error::mismatch(
                format!("{}x{} mask", self.width, self.height),
                format!("{width}x{height} frame"),
            ));
        }
        Ok(())
    }

    /// Reads `row,col,kind` lines where kind is `dead` or `hot`; `#` starts a
    /// comment.
    pub fn read_csv(path: impl AsRef<Path>, width: usize, height: usize) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)?;
        let mut mask = Self::new(width, height);
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') || line.starts_with("row") {
                continue;
            }
            let parts: Vec<&str> = line.split(',').map(str::trim).collect();
            let bad = || Error::format(path, format!("line {}: expected row,col,dead|hot", n + 1));
            if parts.len() != 3 {
                return Err(bad());
            }
            let r = parts[0].parse().map_err(|_| bad())?;
            let c = parts[1].parse().map_err(|_| bad())?;
            let kind = match parts[2] {
                "dead" => Defect::Dead,
                "hot" => Defect::Hot,
                _ => return Err(bad()),
            };
            mask.mark(r, c, kind)?;
        }
        Ok(mask)
    }
}

/// Replaces each masked pixel by the majority of its unmasked 8-neighbours
/// (ties and isolated pixels become 0).
pub fn inpaint_defects(frame: &BinaryFrame, mask: &DefectMask) -> Result<BinaryFrame> {
    mask.check_dims(frame.width(), frame.height())?;
    let mut out = frame.clone();
    let (w, h) = (frame.width() as isize, frame.height() as isize);
    for (i, d) in mask.defects().iter().enumerate() {
        if d.is_none() {
            continue;
        }
        let (r, c) = ((i as isize) / w, (i as isize) % w);
        let (mut ones, mut valid) = (0, 0);
        for dr in -1..=1 {
            for dc in -1..=1 {
                let (rr, cc) = (r + dr, c + dc);
                if (dr, dc) == (0, 0) || rr < 0 || cc < 0 || rr >= h || cc >= w {
                    continue;
                }
                let (rr, cc) = (rr as usize, cc as usize);
                if mask.get(rr, cc).is_some() {
                    continue;
                }
                valid += 1;
                ones += frame.get(rr, cc) as usize;
            }
        }
        out.bits_mut()[i] = (2 * ones > valid) as u8;
    }
    Ok(out)
}

/// Writes an inpainted copy of every frame in `store` to `path`.
pub fn inpaint_store(store: &BinaryFrameStore, mask: &DefectMask, path: impl AsRef<Path>) -> Result<StoreHeader> {
    mask.check_dims(store.width(), store.height())?;
    let h = store.header();
    let mut writer = StoreWriter::create(
        path,
        h.width,
        h.height,
        StoreMeta {
            frame_rate: h.frame_rate,
            tau: h.tau,
        },
    )?;
    for frame in store.frames() {
        writer.push(&inpaint_defects(&frame?, mask)?)?;
    }
    writer.finish()
}

/// Stacks two half-sensor readouts into one frame, `top` first.
pub fn concat_vertical(top: &BinaryFrame, bottom: &BinaryFrame) -> Result<BinaryFrame> {
    if top.width() != bottom.width() {
        return Err(Error::mismatch(top.width(), bottom.width()));
    }
    let mut bits = top.bits().to_vec();
    bits.extend_from_slice(bottom.bits());
    BinaryFrame::new(top.width(), top.height() + bottom.height(), bits)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_mask_is_identity() {
        let f = BinaryFrame::from_fn(5, 4, |r, c| (r * 3 + c) % 2 == 0);
        assert_eq!(inpaint_defects(&f, &DefectMask::new(5, 4)).unwrap(), f);
    }

    #[test]
    fn hot_pixel_in_zeros_becomes_zero() {
        let mut f = BinaryFrame::zeros(3, 3);
        f.set(1, 1, true);
        let mask = DefectMask::from_lists(3, 3, &[], &[(1, 1)]).unwrap();
        assert_eq!(inpaint_defects(&f, &mask).unwrap().get(1, 1), 0);
    }

    #[test]
    fn tie_goes_to_zero() {
        // Corner pixel with 3 valid neighbours, one of them masked: 2 valid, 1 one.
        let mut f = BinaryFrame::zeros(3, 3);
        f.set(0, 1, true);
        let mask = DefectMask::from_lists(3, 3, &[(0, 0), (1, 1)], &[]).unwrap();
        assert_eq!(inpaint_defects(&f, &mask).unwrap().get(0, 0), 0);
    }

    #[test]
    fn dimension_mismatch() {
        assert!(inpaint_defects(&BinaryFrame::zeros(3, 3), &DefectMask::new(4, 3)).is_err());
        assert!(concat_vertical(&BinaryFrame::zeros(3, 3), &BinaryFrame::zeros(4, 3)).is_err());
    }

    #[test]
    fn halves_concatenate() {
        let top = BinaryFrame::new(2, 1, vec![1, 0]).unwrap();
        let bottom = BinaryFrame::new(2, 2, vec![0, 1, 1, 1]).unwrap();
        let full = concat_vertical(&top, &bottom).unwrap();
        assert_eq!((full.width(), full.height()), (2, 3));
        assert_eq!(full.bits(), &[1, 0, 0, 1, 1, 1]);
    }
}
