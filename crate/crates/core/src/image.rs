//! Luminance rasters.

use crate::error::{Error, Result};
use crate::geometry::PixelCoord;

pub const MAX_LUMA: f64 = 255.0;

/// Row-major grid of real luminance samples in `[0, 255]`.
#[derive(Debug, Clone, PartialEq)]
pub struct LumaImage {
    height: usize,
    width: usize,
    data: Vec<f64>,
}

impl LumaImage {
    pub fn new(height: usize, width: usize) -> Self {
        Self::filled(height, width, 0.0)
    }

    pub fn filled(height: usize, width: usize, value: f64) -> Self {
        assert!(height > 0 && width > 0, "image dimensions must be positive");
        Self {
            height,
            width,
            data: vec![value; height * width],
        }
    }

    pub fn from_vec(height: usize, width: usize, data: Vec<f64>) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(Error::InvalidParameter(format!(
                "image dimensions must be positive, got {height}x{width}"
            )));
        }
        if data.len() != height * width {
            return Err(Error::DimensionMismatch(format!(
                "{} samples supplied for a {height}x{width} image",
                data.len()
            )));
        }
        if let Some(bad) = data.iter().find(|v| !(0.0..=MAX_LUMA).contains(*v)) {
            return Err(Error::InvalidParameter(format!(
                "luminance sample {bad} outside [0, 255]"
            )));
        }
        Ok(Self {
            height,
            width,
            data,
        })
    }

    pub fn from_fn(height: usize, width: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut img = Self::new(height, width);
        for m in 0..height {
            for n in 0..width {
                img.data[m * width + n] = f(m, n).clamp(0.0, MAX_LUMA);
            }
        }
        img
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, m: usize) -> &[f64] {
        &self.data[m * self.width..(m + 1) * self.width]
    }

    #[inline]
    pub fn get(&self, m: usize, n: usize) -> f64 {
        self.data[m * self.width + n]
    }

    /// Sample at a signed position, clamped to the border.
    #[inline]
    pub fn get_clamped(&self, m: isize, n: isize) -> f64 {
        let m = m.clamp(0, self.height as isize - 1) as usize;
        let n = n.clamp(0, self.width as isize - 1) as usize;
        self.get(m, n)
    }

    /// Stores `value` clamped to `[0, 255]`.
    pub fn set(&mut self, m: usize, n: usize, value: f64) {
        self.data[m * self.width + n] = value.clamp(0.0, MAX_LUMA);
    }

    pub fn ensure_same_dims(&self, other: &LumaImage, what: &str) -> Result<()> {
        if self.dims() != other.dims() {
            return Err(Error::DimensionMismatch(format!(
                "{what}: {}x{} vs {}x{}",
                self.height, self.width, other.height, other.width
            )));
        }
        Ok(())
    }

    /// Bilinear interpolation of the four samples around `at`. Coordinates
    /// outside the raster are clamped to the border first.
    #[inline]
    pub fn sample_bilinear(&self, at: PixelCoord) -> f64 {
        let m = at.m.clamp(0.0, (self.height - 1) as f64);
        let n = at.n.clamp(0.0, (self.width - 1) as f64);
        let m0 = m.floor() as usize;
        let n0 = n.floor() as usize;
        let m1 = (m0 + 1).min(self.height - 1);
        let n1 = (n0 + 1).min(self.width - 1);
        let fm = m - m0 as f64;
        let fn_ = n - n0 as f64;
        let top = self.get(m0, n0) + fn_ * (self.get(m0, n1) - self.get(m0, n0));
        let bottom = self.get(m1, n0) + fn_ * (self.get(m1, n1) - self.get(m1, n0));
        top + fm * (bottom - top)
    }
}
