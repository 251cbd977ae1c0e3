//! Fisheye-aware stereo toolkit.
//!
//! Block-matching disparity estimation, intermediate view synthesis and
//! masked PSNR evaluation for equisolid fisheye stereo pairs. Disparities
//! can be measured either as plain column offsets or as column offsets on
//! the perspective plane of the fisheye camera; each map carries a tag
//! saying which.

pub mod error;
pub mod evaluation;
pub mod geometry;
pub mod image;
pub mod io;
pub mod matching;
pub mod resample;
pub mod synthesis;
pub mod synthetic;

pub use error::{Error, Result};
pub use evaluation::{average_psnr, build_fov_mask, psnr_masked, FovMask, PsnrAverage};
pub use geometry::{CameraModel, PixelCoord, PolarFisheye, PolarPerspective, RadialModel};
pub use image::LumaImage;
pub use matching::{
    build_candidate_warp_grid, estimate_disparity_fisheye, estimate_disparity_horizontal, ssd_cost,
    CandidateWarpGrid, DisparityDomain, DisparityMap, MatchConfig, Metric,
};
pub use resample::Interpolation;
pub use synthesis::{
    compute_fisheye_warp_targets, resample_scattered, synthesize_conventional, synthesize_fisheye,
    SynthesisConfig, WarpTargets,
};
pub use synthetic::{ground_truth_disparity, render_fisheye_view, visibility_mask, SceneSpec};
