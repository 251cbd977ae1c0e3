//! Masked luminance PSNR.

use crate::error::{Error, Result};
use crate::geometry::{CameraModel, PixelCoord};
use crate::image::{LumaImage, MAX_LUMA};

/// Pixels that receive light: `true` inside the field-of-view circle.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FovMask {
    height: usize,
    width: usize,
    inside: Vec<bool>,
}

impl FovMask {
    pub fn full(height: usize, width: usize) -> Self {
        Self {
            height,
            width,
            inside: vec![true; height * width],
        }
    }

    pub fn from_fn(height: usize, width: usize, mut f: impl FnMut(usize, usize) -> bool) -> Self {
        let inside = (0..height)
            .flat_map(|m| (0..width).map(move |n| (m, n)))
            .map(|(m, n)| f(m, n))
            .collect();
        Self {
            height,
            width,
            inside,
        }
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    #[inline]
    pub fn get(&self, m: usize, n: usize) -> bool {
        self.inside[m * self.width + n]
    }

    pub fn count(&self) -> usize {
        self.inside.iter().filter(|&&b| b).count()
    }

    /// Pixels set in both masks.
    pub fn intersect(&self, other: &FovMask) -> Result<FovMask> {
        if self.dims() != other.dims() {
            return Err(Error::DimensionMismatch("masks differ in size".into()));
        }
        Ok(Self {
            height: self.height,
            width: self.width,
            inside: self
                .inside
                .iter()
                .zip(&other.inside)
                .map(|(a, b)| *a && *b)
                .collect(),
        })
    }

    /// Square erosion by `radius` pixels; pixels beyond the raster count as
    /// outside.
    pub fn erode(&self, radius: usize) -> FovMask {
        let r = radius as isize;
        let (h, w) = (self.height as isize, self.width as isize);
        Self::from_fn(self.height, self.width, |m, n| {
            let (m, n) = (m as isize, n as isize);
            (-r..=r).all(|a| {
                (-r..=r).all(|b| {
                    let (mm, nn) = (m + a, n + b);
                    mm >= 0 && nn >= 0 && mm < h && nn < w && self.get(mm as usize, nn as usize)
                })
            })
        })
    }
}

/// Marks every pixel whose fisheye radius is within the field-of-view border.
pub fn build_fov_mask(cam: &CameraModel, height: usize, width: usize) -> FovMask {
    let limit = cam.fov_radius();
    FovMask::from_fn(height, width, |m, n| {
        cam.pixel_to_polar(PixelCoord::new(m as f64, n as f64)).r_f <= limit
    })
}

/// PSNR in dB over the masked pixels with peak 255. Identical images give
/// `f64::INFINITY`.
pub fn psnr_masked(test: &LumaImage, reference: &LumaImage, mask: &FovMask) -> Result<f64> {
    test.ensure_same_dims(reference, "test and reference images differ in size")?;
    if mask.dims() != test.dims() {
        return Err(Error::DimensionMismatch(format!(
            "mask is {}x{} but images are {}x{}",
            mask.height,
            mask.width,
            test.height(),
            test.width()
        )));
    }
    let mut sum = CompensatedSum::default();
    let mut count = 0usize;
    for ((a, b), &inside) in test.data().iter().zip(reference.data()).zip(&mask.inside) {
        if inside {
            let d = a - b;
            sum.add(d * d);
            count += 1;
        }
    }
    if count == 0 {
        return Err(Error::InvalidParameter("evaluation mask is empty".into()));
    }
    let mse = sum.value() / count as f64;
    Ok(psnr_from_mse(mse))
}

pub fn psnr_from_mse(mse: f64) -> f64 {
    if mse == 0.0 {
        f64::INFINITY
    } else {
        10.0 * (MAX_LUMA * MAX_LUMA / mse).log10()
    }
}

/// Mean of per-pair PSNR values in dB. Infinite entries are skipped and
/// counted so that callers can warn about them.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PsnrAverage {
    pub mean_db: Option<f64>,
    pub used: usize,
    pub skipped_infinite: usize,
}

pub fn average_psnr(values: &[f64]) -> PsnrAverage {
    let mut sum = CompensatedSum::default();
    let mut used = 0;
    let mut skipped_infinite = 0;
    for &v in values {
        if v.is_infinite() {
            skipped_infinite += 1;
        } else {
            sum.add(v);
            used += 1;
        }
    }
    PsnrAverage {
        mean_db: (used > 0).then(|| sum.value() / used as f64),
        used,
        skipped_infinite,
    }
}

/// Neumaier summation.
#[derive(Debug, Default, Clone, Copy)]
struct CompensatedSum {
    sum: f64,
    compensation: f64,
}

impl CompensatedSum {
    fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.compensation += (self.sum - t) + x;
        } else {
            self.compensation += (x - t) + self.sum;
        }
        self.sum = t;
    }

    fn value(&self) -> f64 {
        self.sum + self.compensation
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::image_center;

    #[test]
    fn psnr_fixtures() {
        let a = LumaImage::filled(8, 8, 0.0);
        let b = LumaImage::filled(8, 8, 255.0);
        let full = FovMask::full(8, 8);
        assert_eq!(psnr_masked(&a, &a, &full).unwrap(), f64::INFINITY);
        assert!(psnr_masked(&a, &b, &full).unwrap().abs() < 1e-12);
        let r = LumaImage::from_fn(8, 8, |m, n| (m * 8 + n) as f64);
        let plus = LumaImage::from_fn(8, 8, |m, n| (m * 8 + n) as f64 + 1.0);
        assert!((psnr_masked(&plus, &r, &full).unwrap() - 48.1308036).abs() < 1e-6);
    }

    #[test]
    fn psnr_errors() {
        let a = LumaImage::filled(4, 4, 1.0);
        let b = LumaImage::filled(4, 5, 1.0);
        assert!(psnr_masked(&a, &b, &FovMask::full(4, 4)).is_err());
        assert!(psnr_masked(&a, &a, &FovMask::full(4, 5)).is_err());
        let empty = FovMask::from_fn(4, 4, |_, _| false);
        assert!(matches!(
            psnr_masked(&a, &a, &empty),
            Err(Error::InvalidParameter(_))
        ));
    }

    #[test]
    fn mask_radius() {
        let (h, w) = (301, 301);
        let cam = CameraModel::centered(100.0, h, w).unwrap();
        let mask = build_fov_mask(&cam, h, w);
        let c = image_center(h, w);
        assert!(mask.get(c.m as usize, c.n as usize));
        // 2f sin(46.25 deg) = 144.4728; 146 px out along the row is outside.
        assert!(mask.get(150, 150 + 144));
        assert!(!mask.get(150, 150 + 146));

        let wide = CameraModel::with_limits(200.0, c, 360.0, 1.0).unwrap();
        assert_eq!(build_fov_mask(&wide, h, w).count(), h * w);
    }

    #[test]
    fn erosion_shrinks_from_the_border() {
        let mask = FovMask::full(10, 12).erode(2);
        assert_eq!(mask.count(), 6 * 8);
        assert!(!mask.get(1, 5) && mask.get(2, 2));
    }

    #[test]
    fn average_skips_infinite() {
        let avg = average_psnr(&[30.0, f64::INFINITY, 40.0]);
        assert_eq!(avg.mean_db, Some(35.0));
        assert_eq!((avg.used, avg.skipped_infinite), (2, 1));
        assert_eq!(average_psnr(&[f64::INFINITY]).mean_db, None);
    }
}
