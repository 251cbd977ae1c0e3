//! Fixtures and brute-force oracles shared by the integration tests.
#![allow(dead_code)]

use fstk_core::{
    build_candidate_warp_grid, ssd_cost, CameraModel, DisparityMap, LumaImage, PixelCoord,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Integer-valued uniform noise.
pub fn noise_image(height: usize, width: usize, seed: u64) -> LumaImage {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let data = (0..height * width)
        .map(|_| rng.gen_range(0..=255) as f64)
        .collect();
    LumaImage::from_vec(height, width, data).unwrap()
}

/// Smooth aperiodic texture, integer valued.
pub fn smooth_texture(height: usize, width: usize, seed: u64) -> LumaImage {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let waves: Vec<(f64, f64, f64, f64)> = (0..6)
        .map(|_| {
            (
                rng.gen_range(8.0..16.0),
                rng.gen_range(-0.35..0.35),
                rng.gen_range(-0.35..0.35),
                rng.gen_range(0.0..std::f64::consts::TAU),
            )
        })
        .collect();
    LumaImage::from_fn(height, width, |m, n| {
        let v = waves.iter().fold(128.0, |acc, &(a, fm, fn_, ph)| {
            acc + a * (fm * m as f64 + fn_ * n as f64 + ph).sin()
        });
        v.round()
    })
}

/// Pair with `right(m, n) = left(m, n + shift)` on every column the base
/// image covers.
pub fn shifted_pair(base: &LumaImage, width: usize, shift: usize) -> (LumaImage, LumaImage) {
    assert!(base.width() >= width + shift);
    let h = base.height();
    let left = LumaImage::from_fn(h, width, |m, n| base.get(m, n));
    let right = LumaImage::from_fn(h, width, |m, n| base.get(m, n + shift));
    (left, right)
}

fn clamp(i: isize, len: usize) -> usize {
    i.clamp(0, len as isize - 1) as usize
}

/// Block around `(m, n)` in row-major order with border clamping.
fn block(
    m: usize,
    n: usize,
    w: usize,
    h: usize,
    wd: usize,
    mut at: impl FnMut(usize, usize) -> f64,
) -> Vec<f64> {
    let w = w as isize;
    let mut out = Vec::new();
    for a in -w..=w {
        for b in -w..=w {
            out.push(at(clamp(m as isize + a, h), clamp(n as isize + b, wd)));
        }
    }
    out
}

/// Every candidate cost of the conventional matcher, recomputed block by block.
pub fn horizontal_costs(
    left: &LumaImage,
    right: &LumaImage,
    w: usize,
    s: usize,
    m: usize,
    n: usize,
) -> Vec<f64> {
    let (h, wd) = right.dims();
    let r = block(m, n, w, h, wd, |i, j| right.get(i, j));
    (0..=s)
        .map(|d| {
            let wi = w as isize;
            let mut l = Vec::new();
            for a in -wi..=wi {
                for b in -wi..=wi {
                    let i = clamp(m as isize + a, h);
                    let j = n as isize + b;
                    l.push(left.get(i, clamp(j + d as isize, wd)));
                }
            }
            ssd_cost(&r, &l).unwrap()
        })
        .collect()
}

/// Every candidate cost of the fisheye matcher, recomputed block by block.
pub fn fisheye_costs(
    left: &LumaImage,
    right: &LumaImage,
    cam: &CameraModel,
    w: usize,
    s: usize,
    m: usize,
    n: usize,
) -> Vec<f64> {
    let (h, wd) = right.dims();
    let r = block(m, n, w, h, wd, |i, j| right.get(i, j));
    (0..=s)
        .map(|d| {
            let l = block(m, n, w, h, wd, |i, j| {
                left.sample_bilinear(
                    cam.shift_in_perspective(PixelCoord::new(i as f64, j as f64), d as f64),
                )
            });
            ssd_cost(&r, &l).unwrap()
        })
        .collect()
}

/// Pixels whose stored disparity is not the smallest minimiser of `costs`.
pub fn optimality_mismatches(
    map: &DisparityMap,
    mut costs: impl FnMut(usize, usize) -> Vec<f64>,
) -> usize {
    let (h, w) = map.dims();
    let mut bad = 0;
    for m in 0..h {
        for n in 0..w {
            let c = costs(m, n);
            let min = c.iter().copied().fold(f64::INFINITY, f64::min);
            let first = c.iter().position(|&v| v == min).unwrap();
            if map.get(m, n) != first as f32 {
                bad += 1;
            }
        }
    }
    bad
}

/// Runs `f` on a dedicated pool of `threads` workers.
pub fn with_threads<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> T {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .unwrap()
        .install(f)
}

/// Reference grid check: the fisheye gather grid equals the per-pixel shift.
pub fn grid_matches_shift(cam: &CameraModel, h: usize, w: usize, d: usize) -> bool {
    let grid = build_candidate_warp_grid(d, cam, h, w);
    (0..h).all(|m| {
        (0..w).all(|n| {
            grid.get(m, n)
                == cam.shift_in_perspective(PixelCoord::new(m as f64, n as f64), d as f64)
        })
    })
}
