#![allow(dead_code, clippy::needless_range_loop)]

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use splatforge::preprocess::Splat2D;
use splatforge::raster::RenderParams;
use splatforge::scene::{CameraView, Gaussian3D, GaussianCloud};
use splatforge::sort::DepthCode;
use splatforge::synthetic::orbit_views;

pub fn random_gaussian(rng: &mut ChaCha8Rng, degree: u8) -> Gaussian3D {
    let mut g = Gaussian3D {
        mean: std::array::from_fn(|_| rng.gen_range(-2.0..2.0)),
        log_scale: std::array::from_fn(|_| rng.gen_range(-5.0..-1.0)),
        rotation: std::array::from_fn(|_| rng.gen_range(-1.0..1.0)),
        opacity_logit: rng.gen_range(-4.0..4.0),
        ..Default::default()
    };
    let basis = (degree as usize + 1).pow(2);
    for k in &mut g.sh[..basis] {
        *k = std::array::from_fn(|_| rng.gen_range(-1.0..1.0));
    }
    g
}

pub fn random_cloud(rng: &mut ChaCha8Rng, n: usize, degree: u8) -> GaussianCloud {
    GaussianCloud::from_gaussians((0..n).map(|_| random_gaussian(rng, degree)).collect(), degree).unwrap()
}

/// A camera somewhere on a shell around the origin, looking roughly at it.
pub fn random_camera(rng: &mut ChaCha8Rng) -> CameraView {
    loop {
        let dir: [f32; 3] = std::array::from_fn(|_| rng.gen_range(-1.0..1.0));
        let n = dir.iter().map(|v| v * v).sum::<f32>().sqrt();
        if !(0.2..=1.0).contains(&n) || dir[2].abs() > 0.9 * n {
            continue;
        }
        let r = rng.gen_range(2.5..6.0);
        let eye = dir.map(|v| v / n * r);
        let target = std::array::from_fn(|_| rng.gen_range(-0.5..0.5));
        let fov = rng.gen_range(40f32..90.0).to_radians();
        let w = rng.gen_range(64..800);
        let h = rng.gen_range(64..600);
        if let Ok(c) = CameraView::look_at(eye, target, [0.0, 0.0, 1.0], fov, w, h, rng.gen_range(0.01..0.5)) {
            return c;
        }
    }
}

pub fn scene_view(width: u32, height: u32) -> CameraView {
    orbit_views(3, 4.0, 1.5, width, height).unwrap()[1]
}

/// Straightforward f64 renderer over preprocessed splats: every pixel
/// gathers the splats whose tile rectangle covers it, sorts them with the
/// standard library by (depth code, index) and composites in f64.
pub fn naive_render(splats: &[Splat2D], cam: &CameraView, tile_size: u32, params: &RenderParams) -> Vec<[f64; 3]> {
    let tiles_x = cam.width.div_ceil(tile_size);
    let tiles_y = cam.height.div_ceil(tile_size);
    let mut lists: Vec<Vec<usize>> = vec![Vec::new(); (tiles_x * tiles_y) as usize];
    for (i, s) in splats.iter().enumerate() {
        for ty in 0..tiles_y {
            for tx in 0..tiles_x {
                if s.tile_range.contains(tx, ty) {
                    lists[(ty * tiles_x + tx) as usize].push(i);
                }
            }
        }
    }
    for l in &mut lists {
        l.sort_by_key(|&i| (DepthCode::saturating_from_f32(splats[i].depth).unwrap(), i));
    }
    let mut out = vec![[0.0; 3]; (cam.width * cam.height) as usize];
    for y in 0..cam.height {
        for x in 0..cam.width {
            let list = &lists[((y / tile_size) * tiles_x + x / tile_size) as usize];
            let (px, py) = (x as f64 + 0.5, y as f64 + 0.5);
            let mut c = [0.0f64; 3];
            let mut t = 1.0f64;
            for &i in list {
                let s = &splats[i];
                let dx = px - s.mean2d[0] as f64;
                let dy = py - s.mean2d[1] as f64;
                let [a, b, cc] = s.conic.map(|v| v as f64);
                let power = (-0.5 * (a * dx * dx + cc * dy * dy) - b * dx * dy).min(0.0);
                let alpha = (s.opacity as f64 * power.exp()).min(params.alpha_max as f64);
                if alpha < params.alpha_min as f64 {
                    continue;
                }
                for k in 0..3 {
                    c[k] += t * alpha * s.color[k] as f64;
                }
                t *= 1.0 - alpha;
                if t < params.tau as f64 {
                    break;
                }
            }
            out[(y * cam.width + x) as usize] = std::array::from_fn(|k| c[k] + t * params.background[k] as f64);
        }
    }
    out
}

/// Counts (presented, terminated) pairs with an independent f32 replay in
/// library-sorted order.
pub fn recount_termination(splats: &[Splat2D], cam: &CameraView, tile_size: u32, params: &RenderParams) -> (u64, u64) {
    let tiles_x = cam.width.div_ceil(tile_size);
    let tiles_y = cam.height.div_ceil(tile_size);
    let (mut presented, mut terminated) = (0u64, 0u64);
    for ty in 0..tiles_y {
        for tx in 0..tiles_x {
            let mut list: Vec<usize> = (0..splats.len()).filter(|&i| splats[i].tile_range.contains(tx, ty)).collect();
            list.sort_by_key(|&i| (DepthCode::saturating_from_f32(splats[i].depth).unwrap(), i));
            for y in ty * tile_size..((ty + 1) * tile_size).min(cam.height) {
                for x in tx * tile_size..((tx + 1) * tile_size).min(cam.width) {
                    let (px, py) = (x as f32 + 0.5, y as f32 + 0.5);
                    let mut t = 1.0f32;
                    presented += list.len() as u64;
                    for (n, &i) in list.iter().enumerate() {
                        let s = &splats[i];
                        let dx = px - s.mean2d[0];
                        let dy = py - s.mean2d[1];
                        let [a, b, c] = s.conic;
                        let power = -0.5 * (a * dx * dx + c * dy * dy) - b * dx * dy;
                        let alpha = (s.opacity * power.min(0.0).exp()).min(params.alpha_max);
                        if alpha < params.alpha_min {
                            continue;
                        }
                        t *= 1.0 - alpha;
                        if t < params.tau {
                            terminated += (list.len() - n - 1) as u64;
                            break;
                        }
                    }
                }
            }
        }
    }
    (presented, terminated)
}

/// Near-plane decision in f64 from first principles.
pub fn recount_culled(cloud: &GaussianCloud, cam: &CameraView) -> u64 {
    cloud
        .gaussians
        .iter()
        .filter(|g| {
            let [w, x, y, z] = g.unit_rotation().map(|v| v as f64);
            let r = [
                [1.0 - 2.0 * (y * y + z * z), 2.0 * (x * y - w * z), 2.0 * (x * z + w * y)],
                [2.0 * (x * y + w * z), 1.0 - 2.0 * (x * x + z * z), 2.0 * (y * z - w * x)],
                [2.0 * (x * z - w * y), 2.0 * (y * z + w * x), 1.0 - 2.0 * (x * x + y * y)],
            ];
            let s = g.log_scale.map(|v| (v as f64).exp());
            let row = cam.world_to_camera[2].map(|v| v as f64);
            let depth = row[0] * g.mean[0] as f64 + row[1] * g.mean[1] as f64 + row[2] * g.mean[2] as f64 + row[3];
            let dz: f64 = (0..3)
                .map(|i| {
                    let var: f64 = (0..3).map(|k| (r[i][k] * s[k]).powi(2)).sum();
                    row[i].abs() * 3.0 * var.sqrt()
                })
                .sum();
            depth + dz < cam.z_near as f64
        })
        .count() as u64
}
