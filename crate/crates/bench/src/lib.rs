//! Shared inputs for the benchmarks.

use fstk_core::{render_fisheye_view, LumaImage, SceneSpec};

/// Left and right renders of a single-plane scene with 12 px disparity.
pub fn plane_pair(size: usize) -> (SceneSpec, LumaImage, LumaImage) {
    let focal = size as f64 * 150.0 / 256.0;
    let scene =
        SceneSpec::single_plane(size, size, focal, 1.0, 12.0 / focal, 1).expect("valid scene");
    let left = render_fisheye_view(&scene, 0.0);
    let right = render_fisheye_view(&scene, scene.baseline);
    (scene, left, right)
}
