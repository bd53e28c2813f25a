//! Bit-packed binary frame sequences on disk.
//!
//! Layout, little-endian:
//!
//! ```text
//! "QRFBIN01" | u32 version | u32 width | u32 height | u64 frame_count
//!            | f64 frame_rate_hz | f64 tau_s | payload
//! ```
//!
//! The payload is the frames back to back, each row-major with 8 pixels per
//! byte, most significant bit first, every row padded to a whole byte.

mod defects;
mod sampler;

pub use defects::{concat_vertical, inpaint_defects, inpaint_store, Defect, DefectMask};
pub use sampler::{PixelSample, SampleStream};

use std::fs::File;
use std::io::{BufWriter, Seek, SeekFrom, Write};
use std::path::Path;

use memmap2::Mmap;

use crate::image::FloatImage;
use crate::{Error, Result};

pub const STORE_MAGIC: &[u8; 8] = b"QRFBIN01";
pub const STORE_VERSION: u32 = 1;
pub const HEADER_LEN: usize = 44;

#[inline]
pub fn row_bytes(width: usize) -> usize {
    width.div_ceil(8)
}

/// One binary exposure, one byte (0 or 1) per pixel in memory.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryFrame {
    width: usize,
    height: usize,
    bits: Vec<u8>,
}

impl BinaryFrame {
    pub fn new(width: usize, height: usize, bits: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::invalid("frame dimensions must be positive"));
        }
        if bits.len() != width * height {
            return Err(Error::mismatch(width * height, bits.len()));
        }
        if bits.iter().any(|&b| b > 1) {
            return Err(Error::invalid("binary frame values must be 0 or 1"));
        }
        Ok(Self { width, height, bits })
    }

    pub fn zeros(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            bits: vec![0; width * height],
        }
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> bool) -> Self {
        let mut bits = Vec::with_capacity(width * height);
        for r in 0..height {
            for c in 0..width {
                bits.push(f(r, c) as u8);
            }
        }
        Self { width, height, bits }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn bits(&self) -> &[u8] {
        &self.bits
    }

    pub(crate) fn bits_mut(&mut self) -> &mut [u8] {
        &mut self.bits
    }

    pub fn get(&self, row: usize, col: usize) -> u8 {
        self.bits[row * self.width + col]
    }

    pub fn set(&mut self, row: usize, col: usize, value: bool) {
        self.bits[row * self.width + col] = value as u8;
    }

    pub fn count_ones(&self) -> usize {
        self.bits.iter().map(|&b| b as usize).sum()
    }

    pub fn to_image(&self) -> FloatImage {
        FloatImage::new(self.width, self.height, self.bits.iter().map(|&b| b as f32).collect())
            .expect("dimensions already validated")
    }

    /// Reads a grayscale (or colour, converted to luma) PNG; any nonzero
    /// pixel is a detection.
    pub fn read_png(path: impl AsRef<Path>) -> Result<Self> {
        let img = ::image::open(path.as_ref())?.into_luma8();
        let (w, h) = (img.width() as usize, img.height() as usize);
        Self::new(w, h, img.into_raw().into_iter().map(|v| (v > 0) as u8).collect())
    }

    /// Writes 0/255 grayscale.
    pub fn write_png(&self, path: impl AsRef<Path>) -> Result<()> {
        let bytes = self.bits.iter().map(|&b| b * 255).collect();
        ::image::GrayImage::from_raw(self.width as u32, self.height as u32, bytes)
            .expect("buffer length matches dimensions")
            .save(path.as_ref())?;
        Ok(())
    }

    /// Appends the packed representation to `out`.
    pub fn pack_into(&self, out: &mut Vec<u8>) {
        for row in self.bits.chunks_exact(self.width) {
            for chunk in row.chunks(8) {
                let mut byte = 0u8;
                for (k, &b) in chunk.iter().enumerate() {
                    byte |= b << (7 - k);
                }
                out.push(byte);
            }
        }
    }

    pub fn pack(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(row_bytes(self.width) * self.height);
        self.pack_into(&mut out);
        out
    }

    pub fn unpack(width: usize, height: usize, bytes: &[u8]) -> Result<Self> {
        let rb = row_bytes(width);
        if bytes.len() != rb * height {
            return Err(Error::mismatch(rb * height, bytes.len()));
        }
        let mut bits = Vec::with_capacity(width * height);
        for row in bytes.chunks_exact(rb) {
            for c in 0..width {
                bits.push((row[c >> 3] >> (7 - (c & 7))) & 1);
            }
        }
        Self::new(width, height, bits)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StoreHeader {
    pub version: u32,
    pub width: usize,
    pub height: usize,
    pub frame_count: usize,
    pub frame_rate: f64,
    pub tau: f64,
}

impl StoreHeader {
    pub fn frame_bytes(&self) -> usize {
        row_bytes(self.width) * self.height
    }

    pub fn payload_bytes(&self) -> u64 {
        self.frame_bytes() as u64 * self.frame_count as u64
    }

    pub fn duration_s(&self) -> f64 {
        self.frame_count as f64 / self.frame_rate
    }

    pub fn to_bytes(&self) -> [u8; HEADER_LEN] {
        let mut b = [0u8; HEADER_LEN];
        b[..8].copy_from_slice(STORE_MAGIC);
        b[8..12].copy_from_slice(&self.version.to_le_bytes());
        b[12..16].copy_from_slice(&(self.width as u32).to_le_bytes());
        b[16..20].copy_from_slice(&(self.height as u32).to_le_bytes());
        b[20..28].copy_from_slice(&(self.frame_count as u64).to_le_bytes());
        b[28..36].copy_from_slice(&self.frame_rate.to_le_bytes());
        b[36..44].copy_from_slice(&self.tau.to_le_bytes());
        b
    }

    pub fn parse(bytes: &[u8], path: &Path) -> Result<Self> {
        if bytes.len() < HEADER_LEN {
            return Err(Error::format(path, "file shorter than the 44-byte header"));
        }
        if &bytes[..8] != STORE_MAGIC {
            return Err(Error::format(path, "bad magic, expected QRFBIN01"));
        }
        let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap());
        let f64_at = |o: usize| f64::from_le_bytes(bytes[o..o + 8].try_into().unwrap());
        let h = Self {
            version: u32_at(8),
            width: u32_at(12) as usize,
            height: u32_at(16) as usize,
            frame_count: u64::from_le_bytes(bytes[20..28].try_into().unwrap()) as usize,
            frame_rate: f64_at(28),
            tau: f64_at(36),
        };
        if h.version != STORE_VERSION {
            return Err(Error::format(path, format!("unsupported version {}", h.version)));
        }
        h.validate().map_err(|e| Error::format(path, e.to_string()))?;
        Ok(h)
    }

    pub fn validate(&self) -> Result<()> {
        if self.width == 0 || self.height == 0 {
            return Err(Error::invalid("frame dimensions must be positive"));
        }
        if !(self.frame_rate > 0.0 && self.tau > 0.0) {
            return Err(Error::invalid("frame_rate and tau must be positive"));
        }
        Ok(())
    }
}

/// Timing metadata written into a store header.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StoreMeta {
    pub frame_rate: f64,
    pub tau: f64,
}

/// Streams frames into a store file, patching the frame count on finish.
pub struct StoreWriter {
    file: BufWriter<File>,
    header: StoreHeader,
    buf: Vec<u8>,
}

impl StoreWriter {
    pub fn create(path: impl AsRef<Path>, width: usize, height: usize, meta: StoreMeta) -> Result<Self> {
        let header = StoreHeader {
            version: STORE_VERSION,
            width,
            height,
            frame_count: 0,
            frame_rate: meta.frame_rate,
            tau: meta.tau,
        };
        header.validate()?;
        let mut file = BufWriter::new(File::create(path.as_ref())?);
        file.write_all(&header.to_bytes())?;
        Ok(Self {
            file,
            header,
            buf: Vec::with_capacity(header.frame_bytes()),
        })
    }

    pub fn push(&mut self, frame: &BinaryFrame) -> Result<()> {
        if frame.width != self.header.width || frame.height != self.header.height {
            return Err(Error::mismatch(
                format!("{}x{}", self.header.width, self.header.height),
                format!("{}x{}", frame.width, frame.height),
            ));
        }
        self.buf.clear();
        frame.pack_into(&mut self.buf);
        self.file.write_all(&self.buf)?;
        self.header.frame_count += 1;
        Ok(())
    }

    /// Appends one already packed frame.
    pub fn push_packed(&mut self, bytes: &[u8]) -> Result<()> {
        if bytes.len() != self.header.frame_bytes() {
            return Err(Error::mismatch(self.header.frame_bytes(), bytes.len()));
        }
        self.file.write_all(bytes)?;
        self.header.frame_count += 1;
        Ok(())
    }

    pub fn frames_written(&self) -> usize {
        self.header.frame_count
    }

    pub fn finish(mut self) -> Result<StoreHeader> {
        self.file.flush()?;
        let mut file = self.file.into_inner().map_err(|e| e.into_error())?;
        file.seek(SeekFrom::Start(0))?;
        file.write_all(&self.header.to_bytes())?;
        Ok(self.header)
    }
}

/// Packs `frames` into a new store at `path`.
pub fn pack<'a>(
    path: impl AsRef<Path>,
    frames: impl IntoIterator<Item = &'a BinaryFrame>,
    meta: StoreMeta,
) -> Result<StoreHeader> {
    let mut frames = frames.into_iter().peekable();
    let first = frames.peek().ok_or_else(|| Error::invalid("cannot pack an empty frame sequence"))?;
    let mut writer = StoreWriter::create(path, first.width, first.height, meta)?;
    for f in frames {
        writer.push(f)?;
    }
    writer.finish()
}

/// A read-only, memory-mapped store.
pub struct BinaryFrameStore {
    header: StoreHeader,
    map: Mmap,
    row_bytes: usize,
    frame_bytes: usize,
}

impl std::fmt::Debug for BinaryFrameStore {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("BinaryFrameStore").field("header", &self.header).finish()
    }
}

impl BinaryFrameStore {
    pub fn open(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path)?;
        // SAFETY: the store is opened read-only; callers must not truncate the
        // file while it is mapped.
        let map = unsafe { Mmap::map(&file)? };
        let header = StoreHeader::parse(&map, path)?;
        let expected = HEADER_LEN as u64 + header.payload_bytes();
        if map.len() as u64 != expected {
            return Err(Error::format(
                path,
                format!("length {} does not match header (expected {expected})", map.len()),
            ));
        }
        Ok(Self {
            row_bytes: row_bytes(header.width),
            frame_bytes: header.frame_bytes(),
            header,
            map,
        })
    }

    pub fn header(&self) -> &StoreHeader {
        &self.header
    }

    pub fn width(&self) -> usize {
        self.header.width
    }

    pub fn height(&self) -> usize {
        self.header.height
    }

    pub fn frame_count(&self) -> usize {
        self.header.frame_count
    }

    pub fn pixels_per_frame(&self) -> usize {
        self.header.width * self.header.height
    }

    pub fn packed_frame(&self, index: usize) -> Result<&[u8]> {
        if index >= self.header.frame_count {
            return Err(Error::OutOfRange(format!(
                "frame {index} of {}",
                self.header.frame_count
            )));
        }
        let start = HEADER_LEN + index * self.frame_bytes;
        Ok(&self.map[start..start + self.frame_bytes])
    }

    /// One bit without bounds checks beyond the slice's own.
    #[inline]
    pub(crate) fn bit(&self, frame: usize, row: usize, col: usize) -> u8 {
        let byte = self.map[HEADER_LEN + frame * self.frame_bytes + row * self.row_bytes + (col >> 3)];
        (byte >> (7 - (col & 7))) & 1
    }

    pub fn read_pixel(&self, frame: usize, row: usize, col: usize) -> Result<u8> {
        let h = &self.header;
        if frame >= h.frame_count || row >= h.height || col >= h.width {
            return Err(Error::OutOfRange(format!(
                "(frame {frame}, row {row}, col {col}) in {}x{}x{}",
                h.frame_count, h.height, h.width
            )));
        }
        Ok(self.bit(frame, row, col))
    }

    pub fn frame(&self, index: usize) -> Result<BinaryFrame> {
        BinaryFrame::unpack(self.header.width, self.header.height, self.packed_frame(index)?)
    }

    pub fn frames(&self) -> impl Iterator<Item = Result<BinaryFrame>> + '_ {
        (0..self.header.frame_count).map(move |i| self.frame(i))
    }

    /// Lazy uniform stream; see [`SampleStream`].
    pub fn sampler(&self, seed: u64) -> Result<SampleStream<'_>> {
        SampleStream::new(self, seed)
    }

    /// `batch_size` i.i.d. uniform `(frame, pixel)` samples.
    pub fn sample_uniform(&self, batch_size: usize, seed: u64) -> Result<Vec<PixelSample>> {
        if batch_size == 0 {
            return Err(Error::invalid("batch_size must be at least 1"));
        }
        Ok(self.sampler(seed)?.take(batch_size).collect())
    }

    /// Per-pixel count of ones over `n` frames starting at `start`.
    pub fn count_ones(&self, start: usize, n: usize) -> Result<Vec<u32>> {
        if n == 0 || start.checked_add(n).is_none_or(|end| end > self.header.frame_count) {
            return Err(Error::OutOfRange(format!(
                "window [{start}, {start}+{n}) outside {} frames",
                self.header.frame_count
            )));
        }
        let (w, h) = (self.header.width, self.header.height);
        let mut counts = vec![0u32; w * h];
        for f in start..start + n {
            let frame = self.packed_frame(f)?;
            for (r, row) in frame.chunks_exact(self.row_bytes).enumerate() {
                let out = &mut counts[r * w..(r + 1) * w];
                for (c, v) in out.iter_mut().enumerate() {
                    *v += ((row[c >> 3] >> (7 - (c & 7))) & 1) as u32;
                }
            }
        }
        Ok(counts)
    }

    /// Mean of `n` consecutive frames.
    pub fn virtual_exposure(&self, start: usize, n: usize) -> Result<FloatImage> {
        let counts = self.count_ones(start, n)?;
        let inv = 1.0 / n as f64;
        FloatImage::new(
            self.header.width,
            self.header.height,
            counts.into_iter().map(|c| (c as f64 * inv) as f32).collect(),
        )
    }
}

/// Module-level form of [`BinaryFrameStore::virtual_exposure`].
pub fn virtual_exposure(store: &BinaryFrameStore, start: usize, n: usize) -> Result<FloatImage> {
    store.virtual_exposure(start, n)
}

pub fn read_pixel(store: &BinaryFrameStore, frame: usize, row: usize, col: usize) -> Result<u8> {
    store.read_pixel(frame, row, col)
}

pub fn sample_uniform(store: &BinaryFrameStore, batch_size: usize, seed: u64) -> Result<Vec<PixelSample>> {
    store.sample_uniform(batch_size, seed)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn meta() -> StoreMeta {
        StoreMeta {
            frame_rate: 1e4,
            tau: 1e-4,
        }
    }

    #[test]
    fn msb_first_byte() {
        let f = BinaryFrame::new(8, 1, vec![1, 0, 1, 0, 1, 0, 1, 0]).unwrap();
        assert_eq!(f.pack(), vec![0xAA]);
    }

    #[test]
    fn png_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.png");
        let f = BinaryFrame::new(5, 3, vec![1, 0, 0, 1, 1, 0, 1, 0, 0, 0, 1, 1, 1, 1, 0]).unwrap();
        f.write_png(&path).unwrap();
        assert_eq!(BinaryFrame::read_png(&path).unwrap(), f);
    }

    #[test]
    fn rows_are_padded() {
        let f = BinaryFrame::new(9, 2, vec![1; 18]).unwrap();
        assert_eq!(f.pack(), vec![0xFF, 0x80, 0xFF, 0x80]);
        assert_eq!(BinaryFrame::unpack(9, 2, &f.pack()).unwrap(), f);
    }

    #[test]
    fn header_is_44_bytes_and_roundtrips() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.qrfbin");
        let frames = vec![BinaryFrame::zeros(3, 2); 5];
        pack(&path, &frames, meta()).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        assert_eq!(bytes.len(), HEADER_LEN + 5 * 2);
        let store = BinaryFrameStore::open(&path).unwrap();
        assert_eq!(store.frame_count(), 5);
        assert_eq!(store.header().tau, 1e-4);
    }

    #[test]
    fn addressing_pixel_0_9() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.qrfbin");
        let mut f = BinaryFrame::zeros(16, 1);
        f.set(0, 9, true);
        pack(&path, [&f], meta()).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        assert_eq!(bytes[HEADER_LEN + 1], 0b0100_0000);
        let store = BinaryFrameStore::open(&path).unwrap();
        assert_eq!(store.read_pixel(0, 0, 9).unwrap(), 1);
        assert_eq!(store.read_pixel(0, 0, 8).unwrap(), 0);
        assert!(store.read_pixel(1, 0, 0).is_err());
        assert!(store.read_pixel(0, 0, 16).is_err());
    }

    #[test]
    fn mismatched_frames_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let frames = [BinaryFrame::zeros(4, 4), BinaryFrame::zeros(5, 4)];
        assert!(pack(dir.path().join("x"), &frames, meta()).is_err());
        assert!(pack(dir.path().join("y"), &[], meta()).is_err());
    }

    #[test]
    fn truncated_store_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.qrfbin");
        pack(&path, &vec![BinaryFrame::zeros(8, 8); 3], meta()).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        std::fs::write(&path, &bytes[..bytes.len() - 1]).unwrap();
        assert!(matches!(BinaryFrameStore::open(&path), Err(Error::Format { .. })));
    }

    #[test]
    fn virtual_exposure_of_ones() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.qrfbin");
        pack(&path, &vec![BinaryFrame::new(3, 3, vec![1; 9]).unwrap(); 6], meta()).unwrap();
        let store = BinaryFrameStore::open(&path).unwrap();
        for n in 1..=6 {
            assert!(store.virtual_exposure(0, n).unwrap().data().iter().all(|&v| v == 1.0));
        }
        assert!(store.virtual_exposure(4, 3).is_err());
        assert!(store.virtual_exposure(0, 0).is_err());
    }
}
