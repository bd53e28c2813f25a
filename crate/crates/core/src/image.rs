//! Single-channel float images and the `QRFFLUX1` raster format.
//!
//! Raster layout (little-endian): magic `QRFFLUX1` (8 bytes), `u32` width,
//! `u32` height, then `width * height` `f32` values in row-major order.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::{Error, Result};

pub const FLUX_MAGIC: &[u8; 8] = b"QRFFLUX1";
pub const FLUX_HEADER_LEN: usize = 16;

/// Row-major single-channel image with `f32` samples.
#[derive(Debug, Clone, PartialEq)]
pub struct FloatImage {
    width: usize,
    height: usize,
    data: Vec<f32>,
}

/// Output of the conventional camera model, normalised to `[0, 1]`.
pub type IntensityImage = FloatImage;

impl FloatImage {
    pub fn new(width: usize, height: usize, data: Vec<f32>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::invalid("image dimensions must be at least 1x1"));
        }
        if data.len() != width * height {
            return Err(Error::mismatch(width * height, data.len()));
        }
        Ok(Self { width, height, data })
    }

    pub fn filled(width: usize, height: usize, value: f32) -> Self {
        Self {
            width,
            height,
            data: vec![value; width * height],
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f32] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f32> {
        self.data
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f32 {
        self.data[row * self.width + col]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, v: f32) {
        self.data[row * self.width + col] = v;
    }

    pub fn map(&self, mut f: impl FnMut(f32) -> f32) -> Self {
        Self {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn max_value(&self) -> f32 {
        self.data.iter().copied().fold(f32::NEG_INFINITY, f32::max)
    }

    pub fn mean(&self) -> f64 {
        self.data.iter().map(|&v| v as f64).sum::<f64>() / self.data.len() as f64
    }

    pub fn write_raster(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = BufWriter::new(File::create(path.as_ref())?);
        w.write_all(FLUX_MAGIC)?;
        w.write_all(&(self.width as u32).to_le_bytes())?;
        w.write_all(&(self.height as u32).to_le_bytes())?;
        for v in &self.data {
            w.write_all(&v.to_le_bytes())?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_raster(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let mut r = BufReader::new(File::open(path)?);
        let mut header = [0u8; FLUX_HEADER_LEN];
        r.read_exact(&mut header)
            .map_err(|_| Error::format(path, "truncated raster header"))?;
        if &header[..8] != FLUX_MAGIC {
            return Err(Error::format(path, "bad magic, expected QRFFLUX1"));
        }
        let width = u32::from_le_bytes(header[8..12].try_into().unwrap()) as usize;
        let height = u32::from_le_bytes(header[12..16].try_into().unwrap()) as usize;
        let mut bytes = Vec::new();
        r.read_to_end(&mut bytes)?;
        if bytes.len() != width * height * 4 {
            return Err(Error::format(
                path,
                format!("payload is {} bytes, expected {}", bytes.len(), width * height * 4),
            ));
        }
        let data = bytes
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        Self::new(width, height, data)
    }

    /// Writes an 8-bit grayscale PNG; values are clamped to `[0, 1]`.
    pub fn write_png(&self, path: impl AsRef<Path>) -> Result<()> {
        let bytes: Vec<u8> = self
            .data
            .iter()
            .map(|&v| (v.clamp(0.0, 1.0) * 255.0).round() as u8)
            .collect();
        ::image::GrayImage::from_raw(self.width as u32, self.height as u32, bytes)
            .expect("buffer length matches dimensions")
            .save(path.as_ref())?;
        Ok(())
    }
}

/// Per-pixel linear radiant flux in photons per second.
#[derive(Debug, Clone, PartialEq)]
pub struct FluxImage(FloatImage);

impl FluxImage {
    /// Rejects negative or non-finite values.
    pub fn new(width: usize, height: usize, values: Vec<f32>) -> Result<Self> {
        if let Some(bad) = values.iter().find(|v| !v.is_finite() || **v < 0.0) {
            return Err(Error::invalid(format!(
                "flux must be finite and non-negative, found {bad}"
            )));
        }
        Ok(Self(FloatImage::new(width, height, values)?))
    }

    pub fn constant(width: usize, height: usize, flux: f32) -> Result<Self> {
        Self::new(width, height, vec![flux; width * height])
    }

    pub fn width(&self) -> usize {
        self.0.width
    }

    pub fn height(&self) -> usize {
        self.0.height
    }

    pub fn values(&self) -> &[f32] {
        &self.0.data
    }

    pub fn as_image(&self) -> &FloatImage {
        &self.0
    }

    pub fn into_image(self) -> FloatImage {
        self.0
    }

    /// Multiplies every pixel by `factor` (e.g. `2^-stops`).
    pub fn scaled(&self, factor: f32) -> Self {
        Self(self.0.map(|v| v * factor))
    }

    pub fn write_raster(&self, path: impl AsRef<Path>) -> Result<()> {
        self.0.write_raster(path)
    }

    pub fn read_raster(path: impl AsRef<Path>) -> Result<Self> {
        let img = FloatImage::read_raster(path)?;
        Self::new(img.width, img.height, img.data)
    }
}

impl TryFrom<FloatImage> for FluxImage {
    type Error = Error;

    fn try_from(img: FloatImage) -> Result<Self> {
        Self::new(img.width, img.height, img.data)
    }
}
