//! Dense disparity estimation by pixel-wise block matching.
//!
//! Both estimators search integer offsets `0..=s` from the right view into
//! the left view and keep, per pixel, the offset whose `(2w+1)^2` support
//! block has the lowest SSD. Ties go to the smallest offset. Block samples
//! outside the raster are clamped to the border, so every pixel receives a
//! disparity.
//!
//! The horizontal estimator shifts blocks along image rows. The fisheye
//! estimator instead moves every block pixel by the candidate offset on the
//! virtual perspective plane (see [`CameraModel::shift_in_perspective`]) and
//! gathers left-view luminance at the resulting sub-pixel positions. The
//! shifted position depends only on the pixel and the candidate, so one
//! [`CandidateWarpGrid`] per candidate serves all blocks.
//!
//! Candidates are processed one at a time and rows in parallel; a pixel's
//! result never depends on another pixel's, so the output is bit-identical
//! for any thread count.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{CameraModel, PixelCoord};
use crate::image::LumaImage;

pub const DEFAULT_SUPPORT_WIDTH: usize = 8;
pub const DEFAULT_SEARCH_RANGE: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Metric {
    #[default]
    Ssd,
}

impl Metric {
    pub fn cost(self, a: &[f64], b: &[f64]) -> Result<f64> {
        match self {
            Metric::Ssd => ssd_cost(a, b),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MatchConfig {
    /// Margin `w` around the pixel; blocks are `(2w+1) x (2w+1)`.
    pub support_width: usize,
    /// Largest candidate offset `s`; candidates are `0..=s`.
    pub search_range: usize,
    pub metric: Metric,
}

impl Default for MatchConfig {
    fn default() -> Self {
        Self {
            support_width: DEFAULT_SUPPORT_WIDTH,
            search_range: DEFAULT_SEARCH_RANGE,
            metric: Metric::Ssd,
        }
    }
}

impl MatchConfig {
    pub fn new(support_width: usize, search_range: usize) -> Self {
        Self {
            support_width,
            search_range,
            metric: Metric::Ssd,
        }
    }

    pub fn block_size(&self) -> usize {
        2 * self.support_width + 1
    }

    fn validate(&self, height: usize, width: usize) -> Result<()> {
        let b = self.block_size();
        if b > height || b > width {
            return Err(Error::InvalidParameter(format!(
                "block size {b} (support width {}) exceeds image {height}x{width}",
                self.support_width
            )));
        }
        if self.search_range > width {
            return Err(Error::InvalidParameter(format!(
                "search range {} exceeds image width {width}",
                self.search_range
            )));
        }
        Ok(())
    }
}

/// What a disparity value measures.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DisparityDomain {
    /// Column offset in fisheye pixels.
    PixelHorizontal,
    /// Column offset on the virtual perspective plane.
    PerspectiveHorizontal,
}

impl DisparityDomain {
    pub fn as_str(self) -> &'static str {
        match self {
            DisparityDomain::PixelHorizontal => "pixel_horizontal",
            DisparityDomain::PerspectiveHorizontal => "perspective_horizontal",
        }
    }
}

impl fmt::Display for DisparityDomain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for DisparityDomain {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "pixel_horizontal" => Ok(Self::PixelHorizontal),
            "perspective_horizontal" => Ok(Self::PerspectiveHorizontal),
            other => Err(format!(
                "unknown domain tag `{other}` (expected pixel_horizontal or perspective_horizontal)"
            )),
        }
    }
}

/// Dense right-to-left disparities, one per pixel of the right view.
#[derive(Debug, Clone, PartialEq)]
pub struct DisparityMap {
    height: usize,
    width: usize,
    data: Vec<f32>,
    domain: DisparityDomain,
}

impl DisparityMap {
    pub fn filled(height: usize, width: usize, value: f32, domain: DisparityDomain) -> Self {
        Self {
            height,
            width,
            data: vec![value; height * width],
            domain,
        }
    }

    pub fn from_vec(
        height: usize,
        width: usize,
        data: Vec<f32>,
        domain: DisparityDomain,
    ) -> Result<Self> {
        if data.len() != height * width {
            return Err(Error::DimensionMismatch(format!(
                "{} disparities supplied for a {height}x{width} map",
                data.len()
            )));
        }
        Ok(Self {
            height,
            width,
            data,
            domain,
        })
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

    pub fn domain(&self) -> DisparityDomain {
        self.domain
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    #[inline]
    pub fn get(&self, m: usize, n: usize) -> f32 {
        self.data[m * self.width + n]
    }

    pub fn set(&mut self, m: usize, n: usize, d: f32) {
        self.data[m * self.width + n] = d;
    }

    pub fn require_domain(&self, expected: DisparityDomain) -> Result<()> {
        if self.domain != expected {
            return Err(Error::DomainTagMismatch {
                expected,
                found: self.domain,
            });
        }
        Ok(())
    }
}

/// Left-view sampling positions of every right-view pixel for one candidate.
#[derive(Debug, Clone)]
pub struct CandidateWarpGrid {
    offset: usize,
    height: usize,
    width: usize,
    coords: Vec<PixelCoord>,
}

impl CandidateWarpGrid {
    pub fn offset(&self) -> usize {
        self.offset
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    #[inline]
    pub fn get(&self, m: usize, n: usize) -> PixelCoord {
        self.coords[m * self.width + n]
    }

    pub fn coords(&self) -> &[PixelCoord] {
        &self.coords
    }

    /// Left view resampled through the grid.
    fn gather(&self, left: &LumaImage) -> Vec<f64> {
        let mut out = vec![0.0; self.height * self.width];
        out.par_chunks_mut(self.width)
            .zip(self.coords.par_chunks(self.width))
            .for_each(|(row, coords)| {
                for (v, &c) in row.iter_mut().zip(coords) {
                    *v = left.sample_bilinear(c);
                }
            });
        out
    }
}

pub fn build_candidate_warp_grid(
    offset: usize,
    cam: &CameraModel,
    height: usize,
    width: usize,
) -> CandidateWarpGrid {
    let mut coords = vec![PixelCoord::new(0.0, 0.0); height * width];
    let shift = offset as f64;
    coords
        .par_chunks_mut(width)
        .enumerate()
        .for_each(|(m, row)| {
            for (n, c) in row.iter_mut().enumerate() {
                *c = cam.shift_in_perspective(PixelCoord::new(m as f64, n as f64), shift);
            }
        });
    CandidateWarpGrid {
        offset,
        height,
        width,
        coords,
    }
}

/// Sum of squared differences between two equally shaped blocks.
pub fn ssd_cost(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch(format!(
            "SSD blocks hold {} and {} samples",
            a.len(),
            b.len()
        )));
    }
    Ok(a.iter().zip(b).fold(0.0, |acc, (x, y)| {
        let d = x - y;
        acc + d * d
    }))
}

/// Conventional matching: blocks are compared along image rows.
pub fn estimate_disparity_horizontal(
    left: &LumaImage,
    right: &LumaImage,
    cfg: &MatchConfig,
) -> Result<DisparityMap> {
    check_inputs(left, right, cfg)?;
    let (height, width) = right.dims();
    let w = cfg.support_width as isize;
    let search = BlockSearch::new(height, width, cfg.support_width);
    let data = search.run(cfg.search_range, |d, costs| {
        // costs[m][j + w] = (R(m, cj) - L(m, clamp(j + d)))^2 for j in -w..W+w
        costs
            .par_chunks_mut(search.padded_width)
            .enumerate()
            .for_each(|(m, row)| {
                let (r, l) = (right.row(m), left.row(m));
                for (k, e) in row.iter_mut().enumerate() {
                    let j = k as isize - w;
                    let diff = r[clamp_index(j, width)] - l[clamp_index(j + d as isize, width)];
                    *e = diff * diff;
                }
            });
    });
    DisparityMap::from_vec(height, width, data, DisparityDomain::PixelHorizontal)
}

/// Fisheye-adapted matching: candidates are horizontal offsets on the
/// perspective plane, gathered back in the fisheye left view.
pub fn estimate_disparity_fisheye(
    left: &LumaImage,
    right: &LumaImage,
    cfg: &MatchConfig,
    cam: &CameraModel,
) -> Result<DisparityMap> {
    check_inputs(left, right, cfg)?;
    let (height, width) = right.dims();
    let w = cfg.support_width as isize;
    let search = BlockSearch::new(height, width, cfg.support_width);
    let data = search.run(cfg.search_range, |d, costs| {
        let gathered = build_candidate_warp_grid(d, cam, height, width).gather(left);
        costs
            .par_chunks_mut(search.padded_width)
            .enumerate()
            .for_each(|(m, row)| {
                let r = right.row(m);
                let l = &gathered[m * width..(m + 1) * width];
                for (k, e) in row.iter_mut().enumerate() {
                    let n = clamp_index(k as isize - w, width);
                    let diff = r[n] - l[n];
                    *e = diff * diff;
                }
            });
    });
    DisparityMap::from_vec(height, width, data, DisparityDomain::PerspectiveHorizontal)
}

fn check_inputs(left: &LumaImage, right: &LumaImage, cfg: &MatchConfig) -> Result<()> {
    left.ensure_same_dims(right, "left and right views differ in size")?;
    cfg.validate(right.height(), right.width())
}

#[inline]
fn clamp_index(i: isize, len: usize) -> usize {
    i.clamp(0, len as isize - 1) as usize
}

/// Winner-takes-all search over per-candidate squared-difference images.
///
/// For each candidate the caller fills an `H x (W + 2w)` image whose entry
/// `[m][j + w]` is the squared difference contributed by block position
/// `(m, j)`, with `j` ranging over the column padding on both sides. Block
/// rows outside the raster reuse the clamped row.
struct BlockSearch {
    height: usize,
    width: usize,
    support: usize,
    padded_width: usize,
}

impl BlockSearch {
    fn new(height: usize, width: usize, support: usize) -> Self {
        Self {
            height,
            width,
            support,
            padded_width: width + 2 * support,
        }
    }

    fn run(&self, search_range: usize, mut fill: impl FnMut(usize, &mut [f64])) -> Vec<f32> {
        let (height, width, w) = (self.height, self.width, self.support as isize);
        let b = 2 * self.support + 1;
        let mut costs = vec![0.0; height * self.padded_width];
        let mut best_cost = vec![f64::INFINITY; height * width];
        let mut best_d = vec![0f32; height * width];

        for d in 0..=search_range {
            fill(d, &mut costs);
            let costs = &costs;
            best_cost
                .par_chunks_mut(width)
                .zip(best_d.par_chunks_mut(width))
                .enumerate()
                .for_each(|(m, (best_row, d_row))| {
                    let rows: Vec<&[f64]> = (-w..=w)
                        .map(|a| {
                            let r = clamp_index(m as isize + a, height);
                            &costs[r * self.padded_width..(r + 1) * self.padded_width]
                        })
                        .collect();
                    for n in 0..width {
                        let mut acc = 0.0;
                        for row in &rows {
                            for &e in &row[n..n + b] {
                                acc += e;
                            }
                        }
                        if acc < best_row[n] {
                            best_row[n] = acc;
                            d_row[n] = d as f32;
                        }
                    }
                });
        }
        best_d
    }
}
