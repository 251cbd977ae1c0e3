//! Intermediate view synthesis by forward warping the right view.
//!
//! Each right-view pixel is moved toward the left view by `alpha` times its
//! disparity, then the scattered result is resampled onto the pixel grid.
//! In conventional mode the move is a column shift. In fisheye mode the
//! shift happens on the perspective plane and becomes a two-dimensional
//! move in the fisheye image.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{CameraModel, PixelCoord};
use crate::image::LumaImage;
use crate::matching::{DisparityDomain, DisparityMap};
use crate::resample::{self, Interpolation};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthesisConfig {
    /// Fraction of the disparity applied; 0.5 yields the middle view.
    pub alpha: f64,
    pub interpolation: Interpolation,
}

impl Default for SynthesisConfig {
    fn default() -> Self {
        Self {
            alpha: 0.5,
            interpolation: Interpolation::Linear,
        }
    }
}

impl SynthesisConfig {
    pub fn new(alpha: f64, interpolation: Interpolation) -> Result<Self> {
        let cfg = Self {
            alpha,
            interpolation,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::InvalidParameter(format!(
                "alpha must lie in [0, 1], got {}",
                self.alpha
            )));
        }
        Ok(())
    }
}

/// Destination of every source pixel, in source raster order, together with
/// the luminance it carries.
#[derive(Debug, Clone, PartialEq)]
pub struct WarpTargets {
    positions: Vec<PixelCoord>,
    values: Vec<f64>,
}

impl WarpTargets {
    pub fn new(positions: Vec<PixelCoord>, values: Vec<f64>) -> Result<Self> {
        if positions.len() != values.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} targets but {} values",
                positions.len(),
                values.len()
            )));
        }
        if let Some(p) = positions
            .iter()
            .find(|p| !(p.m.is_finite() && p.n.is_finite()))
        {
            return Err(Error::InvalidParameter(format!(
                "non-finite warp target ({}, {})",
                p.m, p.n
            )));
        }
        Ok(Self { positions, values })
    }

    pub fn positions(&self) -> &[PixelCoord] {
        &self.positions
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }
}

pub fn resample_scattered(
    targets: &WarpTargets,
    height: usize,
    width: usize,
    cfg: &SynthesisConfig,
) -> Result<LumaImage> {
    resample::resample_scattered(
        &targets.positions,
        &targets.values,
        height,
        width,
        cfg.interpolation,
    )
}

/// Conventional synthesis: pixel `(m, n)` moves to `(m, n + alpha * d)`.
pub fn synthesize_conventional(
    right: &LumaImage,
    disparity: &DisparityMap,
    cfg: &SynthesisConfig,
) -> Result<LumaImage> {
    cfg.validate()?;
    disparity.require_domain(DisparityDomain::PixelHorizontal)?;
    check_dims(right, disparity)?;
    let (height, width) = right.dims();
    let positions = (0..height)
        .flat_map(|m| {
            (0..width).map(move |n| {
                let d = disparity.get(m, n) as f64;
                PixelCoord::new(m as f64, n as f64 + cfg.alpha * d)
            })
        })
        .collect();
    let targets = WarpTargets::new(positions, right.data().to_vec())?;
    resample_scattered(&targets, height, width, cfg)
}

/// Fisheye targets: each pixel is shifted by `alpha * d` columns on the
/// perspective plane and projected back into the fisheye image.
pub fn compute_fisheye_warp_targets(
    right: &LumaImage,
    disparity: &DisparityMap,
    cfg: &SynthesisConfig,
    cam: &CameraModel,
) -> Result<WarpTargets> {
    cfg.validate()?;
    disparity.require_domain(DisparityDomain::PerspectiveHorizontal)?;
    check_dims(right, disparity)?;
    let (height, width) = right.dims();
    let mut positions = vec![PixelCoord::new(0.0, 0.0); height * width];
    positions
        .par_chunks_mut(width)
        .enumerate()
        .for_each(|(m, row)| {
            for (n, p) in row.iter_mut().enumerate() {
                let shift = cfg.alpha * disparity.get(m, n) as f64;
                *p = cam.shift_in_perspective(PixelCoord::new(m as f64, n as f64), shift);
            }
        });
    WarpTargets::new(positions, right.data().to_vec())
}

pub fn synthesize_fisheye(
    right: &LumaImage,
    disparity: &DisparityMap,
    cfg: &SynthesisConfig,
    cam: &CameraModel,
) -> Result<LumaImage> {
    let targets = compute_fisheye_warp_targets(right, disparity, cfg, cam)?;
    resample_scattered(&targets, right.height(), right.width(), cfg)
}

fn check_dims(right: &LumaImage, disparity: &DisparityMap) -> Result<()> {
    if right.dims() != disparity.dims() {
        return Err(Error::DimensionMismatch(format!(
            "view is {}x{} but disparity map is {}x{}",
            right.height(),
            right.width(),
            disparity.height(),
            disparity.width()
        )));
    }
    Ok(())
}
