//! Synthetic fisheye stereo scenes with exact ground truth.
//!
//! Scenes are stacks of fronto-parallel planes carrying analytic textures
//! (seeded sums of sinusoids). Cameras share one equisolid model, look down
//! +Z and sit on the X axis; a camera at offset `x` is displaced by `x` scene
//! units toward increasing image columns. The stereo pair of a scene with
//! baseline `B` is the left view at offset 0 and the right view at offset
//! `B`, so the middle view is at `B / 2`.
//!
//! World axes: X right, Y up, Z forward.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::evaluation::FovMask;
use crate::geometry::{CameraModel, PixelCoord};
use crate::image::LumaImage;
use crate::matching::{DisparityDomain, DisparityMap};

pub const MAX_TEXTURE_COMPONENTS: usize = 16;
pub const DEFAULT_TEXTURE_COMPONENTS: usize = 8;
/// Minimum samples per texture period at the most compressed image position.
pub const SAMPLES_PER_PERIOD: f64 = 4.0;
/// Angles beyond this are ignored when sizing the texture band limit.
const BAND_LIMIT_MAX_ANGLE_DEG: f64 = 80.0;

#[derive(Debug, Clone, Copy, PartialEq)]
struct Sinusoid {
    amplitude: f64,
    freq_x: f64,
    freq_y: f64,
    phase: f64,
}

/// Band-limited procedural luminance on a plane.
#[derive(Debug, Clone, PartialEq)]
pub struct Texture {
    mean: f64,
    components: Vec<Sinusoid>,
}

impl Texture {
    pub fn uniform(value: f64) -> Self {
        Self {
            mean: value,
            components: Vec::new(),
        }
    }

    /// `count` sinusoids with random orientation and phase whose spatial
    /// frequencies (cycles per scene unit) lie in `[0.3, 1] * max_freq`.
    /// Amplitudes sum to `amplitude`, so values stay in `mean +- amplitude`.
    pub fn seeded(seed: u64, count: usize, max_freq: f64, mean: f64, amplitude: f64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut components: Vec<Sinusoid> = (0..count)
            .map(|_| {
                let freq = max_freq * rng.gen_range(0.3..=1.0);
                let dir = rng.gen_range(0.0..PI);
                Sinusoid {
                    amplitude: rng.gen_range(0.5..=1.0),
                    freq_x: freq * dir.cos(),
                    freq_y: freq * dir.sin(),
                    phase: rng.gen_range(0.0..2.0 * PI),
                }
            })
            .collect();
        let total: f64 = components.iter().map(|c| c.amplitude).sum();
        for c in &mut components {
            c.amplitude *= amplitude / total;
        }
        Self { mean, components }
    }

    pub fn max_frequency(&self) -> f64 {
        self.components
            .iter()
            .map(|c| c.freq_x.hypot(c.freq_y))
            .fold(0.0, f64::max)
    }

    pub fn sample(&self, x: f64, y: f64) -> f64 {
        self.components.iter().fold(self.mean, |acc, c| {
            acc + c.amplitude * (2.0 * PI * (c.freq_x * x + c.freq_y * y) + c.phase).sin()
        })
    }
}

/// Axis-aligned extent of a plane in world X/Y.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlaneExtent {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
}

impl PlaneExtent {
    pub const UNBOUNDED: PlaneExtent = PlaneExtent {
        x_min: f64::NEG_INFINITY,
        x_max: f64::INFINITY,
        y_min: f64::NEG_INFINITY,
        y_max: f64::INFINITY,
    };

    fn contains(&self, x: f64, y: f64) -> bool {
        (self.x_min..=self.x_max).contains(&x) && (self.y_min..=self.y_max).contains(&y)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Plane {
    pub depth: f64,
    pub extent: PlaneExtent,
    pub texture: Texture,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SceneSpec {
    pub camera: CameraModel,
    pub height: usize,
    pub width: usize,
    pub baseline: f64,
    pub planes: Vec<Plane>,
}

/// Per-plane parameters before the texture is generated.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlaneParams {
    pub depth: f64,
    pub seed: u64,
    pub extent: PlaneExtent,
    pub components: usize,
    pub mean: f64,
    pub amplitude: f64,
}

impl PlaneParams {
    pub fn new(depth: f64, seed: u64) -> Self {
        Self {
            depth,
            seed,
            extent: PlaneExtent::UNBOUNDED,
            components: DEFAULT_TEXTURE_COMPONENTS,
            mean: 128.0,
            amplitude: 100.0,
        }
    }
}

impl SceneSpec {
    /// Builds textures for every plane, sized so the finest texture period
    /// still covers [`SAMPLES_PER_PERIOD`] pixels at the image periphery.
    pub fn new(
        camera: CameraModel,
        height: usize,
        width: usize,
        baseline: f64,
        planes: &[PlaneParams],
    ) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(Error::InvalidParameter(
                "scene image must be non-empty".into(),
            ));
        }
        if !(baseline.is_finite() && baseline >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "baseline must be non-negative, got {baseline}"
            )));
        }
        if planes.is_empty() {
            return Err(Error::InvalidParameter(
                "scene needs at least one plane".into(),
            ));
        }
        let mut built = Vec::with_capacity(planes.len());
        for p in planes {
            if !(p.depth.is_finite() && p.depth > 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "plane depth must be positive, got {}",
                    p.depth
                )));
            }
            if p.components > MAX_TEXTURE_COMPONENTS {
                return Err(Error::InvalidParameter(format!(
                    "at most {MAX_TEXTURE_COMPONENTS} texture components, got {}",
                    p.components
                )));
            }
            let amplitude = if p.components == 0 { 0.0 } else { p.amplitude };
            if p.mean - amplitude < 0.0 || p.mean + amplitude > 255.0 || amplitude < 0.0 {
                return Err(Error::InvalidParameter(format!(
                    "texture range {} +- {} leaves [0, 255]",
                    p.mean, p.amplitude
                )));
            }
            let max_freq = band_limit(&camera, height, width, p.depth);
            let texture = if p.components == 0 {
                Texture::uniform(p.mean)
            } else {
                Texture::seeded(p.seed, p.components, max_freq, p.mean, p.amplitude)
            };
            built.push(Plane {
                depth: p.depth,
                extent: p.extent,
                texture,
            });
        }
        Ok(Self {
            camera,
            height,
            width,
            baseline,
            planes: built,
        })
    }

    /// One unbounded textured plane at `depth` seen by a camera with its
    /// principal point at the image center.
    pub fn single_plane(
        height: usize,
        width: usize,
        focal_length_px: f64,
        depth: f64,
        baseline: f64,
        seed: u64,
    ) -> Result<Self> {
        let camera = CameraModel::centered(focal_length_px, height, width)?;
        Self::new(
            camera,
            height,
            width,
            baseline,
            &[PlaneParams::new(depth, seed)],
        )
    }

    /// Default fixture: 256x256, f = 150 px, true disparity f B / Z = 12 px.
    pub fn default_fixture() -> Self {
        Self::single_plane(256, 256, 150.0, 1.0, 0.08, 1).expect("fixture parameters are valid")
    }

    /// Nearest plane hit by the ray through pixel `p` of a camera at
    /// `offset`, with the world point it hits.
    fn trace(&self, p: PixelCoord, offset: f64) -> Option<(&Plane, f64, f64)> {
        let cam = &self.camera;
        let polar = cam.pixel_to_polar(p);
        if polar.r_f > cam.fov_radius() {
            return None;
        }
        let theta = cam.unproject(polar.r_f).ok()?;
        let (dz, sin_theta) = (theta.cos(), theta.sin());
        if dz <= 1e-12 {
            return None;
        }
        let dx = sin_theta * polar.phi.cos();
        let dy = sin_theta * polar.phi.sin();
        self.planes
            .iter()
            .filter_map(|plane| {
                let t = plane.depth / dz;
                let (x, y) = (offset + t * dx, t * dy);
                plane.extent.contains(x, y).then_some((plane, x, y))
            })
            .min_by(|a, b| a.0.depth.total_cmp(&b.0.depth))
    }

    /// Exact luminance seen at sub-pixel position `p` by a camera at
    /// `offset`; 0 where nothing is seen.
    pub fn radiance(&self, p: PixelCoord, offset: f64) -> f64 {
        self.trace(p, offset).map_or(0.0, |(plane, x, y)| {
            plane.texture.sample(x, y).clamp(0.0, 255.0)
        })
    }

    /// Fisheye pixel of world point `(x, y, z)` seen from a camera at `offset`.
    fn project_point(&self, x: f64, y: f64, z: f64, offset: f64) -> Option<PixelCoord> {
        let cam = &self.camera;
        let (dx, dy) = (x - offset, y);
        let theta = dx.hypot(dy).atan2(z);
        if theta > cam.half_fov_rad() {
            return None;
        }
        let r_f = cam.project(theta).ok()?;
        let phi = if dx == 0.0 && dy == 0.0 {
            0.0
        } else {
            dy.atan2(dx)
        };
        Some(cam.polar_to_pixel(crate::geometry::PolarFisheye { r_f, phi }))
    }
}

/// Texture band limit (cycles per scene unit) for a plane at `depth`.
///
/// A fronto-parallel plane is most compressed radially at the largest imaged
/// incident angle, where one scene unit spans
/// `f cos(theta / 2) cos^2(theta) / Z` pixels.
pub fn band_limit(camera: &CameraModel, height: usize, width: usize, depth: f64) -> f64 {
    let c = camera.principal_point;
    let corners = [
        (0.0, 0.0),
        (0.0, width as f64 - 1.0),
        (height as f64 - 1.0, 0.0),
        (height as f64 - 1.0, width as f64 - 1.0),
    ];
    let r_max = corners
        .iter()
        .map(|&(m, n)| (m - c.m).hypot(n - c.n))
        .fold(0.0, f64::max)
        .min(camera.fov_radius());
    let theta = camera
        .unproject(r_max.min(camera.max_radius()))
        .unwrap_or(PI)
        .min(BAND_LIMIT_MAX_ANGLE_DEG.to_radians());
    let f = camera.focal_length_px;
    let radial = f * (0.5 * theta).cos() * theta.cos().powi(2) / depth;
    let tangential = if theta > 0.0 {
        2.0 * f * (0.5 * theta).sin() / (depth * theta.tan())
    } else {
        f / depth
    };
    // 10% margin for the horizontally displaced cameras.
    0.9 * radial.min(tangential) / SAMPLES_PER_PERIOD
}

/// Renders the view of a camera displaced by `camera_offset` scene units.
/// Pixels outside the field of view or whose ray misses every plane are 0.
pub fn render_fisheye_view(scene: &SceneSpec, camera_offset: f64) -> LumaImage {
    let (h, w) = (scene.height, scene.width);
    let mut data = vec![0.0; h * w];
    data.par_chunks_mut(w).enumerate().for_each(|(m, row)| {
        for (n, v) in row.iter_mut().enumerate() {
            *v = scene.radiance(PixelCoord::new(m as f64, n as f64), camera_offset);
        }
    });
    LumaImage::from_vec(h, w, data).expect("rendered samples are clamped")
}

/// Exact perspective-domain disparity of the right view (offset = baseline):
/// `f B / Z` of the plane each pixel sees, 0 where nothing is seen.
pub fn ground_truth_disparity(scene: &SceneSpec) -> DisparityMap {
    let (h, w) = (scene.height, scene.width);
    let f = scene.camera.focal_length_px;
    let mut map = DisparityMap::filled(h, w, 0.0, DisparityDomain::PerspectiveHorizontal);
    for m in 0..h {
        for n in 0..w {
            if let Some((plane, _, _)) =
                scene.trace(PixelCoord::new(m as f64, n as f64), scene.baseline)
            {
                map.set(m, n, (f * scene.baseline / plane.depth) as f32);
            }
        }
    }
    map
}

/// Pixels of the view at `target_offset` whose scene point is also imaged,
/// unoccluded and inside the raster, by the camera at `source_offset`.
///
/// Warping cannot fill the complement from the source view alone, so
/// evaluations of synthesized views against renders are restricted to it.
pub fn visibility_mask(scene: &SceneSpec, target_offset: f64, source_offset: f64) -> FovMask {
    let (h, w) = (scene.height, scene.width);
    FovMask::from_fn(h, w, |m, n| {
        let Some((plane, x, y)) = scene.trace(PixelCoord::new(m as f64, n as f64), target_offset)
        else {
            return false;
        };
        let Some(p) = scene.project_point(x, y, plane.depth, source_offset) else {
            return false;
        };
        if !(p.m >= 0.0 && p.n >= 0.0 && p.m <= (h - 1) as f64 && p.n <= (w - 1) as f64) {
            return false;
        }
        match scene.trace(p, source_offset) {
            Some((seen, _, _)) => seen.depth == plane.depth,
            None => false,
        }
    })
}
