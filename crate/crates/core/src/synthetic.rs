//! Deterministic synthetic scenes and camera paths.
//!
//! All kinds use degree-3 SH with DC terms in `[-1, 1]` and higher bands in
//! `[-0.2, 0.2]`, random unit rotations, log-scales in `[ln 0.004, ln 0.03]`
//! (scaled by `scene_scale`) and opacity logits in `[-2, 4]`.
//!
//! | kind         | centers                                                     |
//! |--------------|-------------------------------------------------------------|
//! | `sphere`     | shell of radius 1 with ±5% radial jitter                    |
//! | `hemisphere` | dome of radius 3 over the `z ≥ 0` half space, ±5% jitter    |
//! | `grid`       | cubic lattice filling `[-1, 1]³`, row-major                 |
//! | `clustered`  | 8 balls of radius 0.25 around random centers in `[-1, 1]³`  |

use std::f32::consts::PI;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::scene::{CameraView, Gaussian3D, GaussianCloud, SceneError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SceneKind {
    Sphere,
    Hemisphere,
    Grid,
    Clustered,
}

impl FromStr for SceneKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "sphere" => Ok(Self::Sphere),
            "hemisphere" => Ok(Self::Hemisphere),
            "grid" => Ok(Self::Grid),
            "clustered" => Ok(Self::Clustered),
            _ => Err(format!("unknown scene kind {s:?} (sphere, hemisphere, grid, clustered)")),
        }
    }
}

fn unit_ball(rng: &mut ChaCha8Rng) -> [f32; 3] {
    loop {
        let p: [f32; 3] = std::array::from_fn(|_| rng.gen_range(-1.0..1.0));
        if p.iter().map(|v| v * v).sum::<f32>() <= 1.0 {
            return p;
        }
    }
}

fn unit_dir(rng: &mut ChaCha8Rng) -> [f32; 3] {
    loop {
        let p = unit_ball(rng);
        let n = p.iter().map(|v| v * v).sum::<f32>().sqrt();
        if n > 1e-3 {
            return p.map(|v| v / n);
        }
    }
}

fn attributes(rng: &mut ChaCha8Rng, mean: [f32; 3], scene_scale: f32) -> Gaussian3D {
    let (lo, hi) = ((0.004f32 * scene_scale).ln(), (0.03f32 * scene_scale).ln());
    let mut g = Gaussian3D {
        mean,
        log_scale: std::array::from_fn(|_| rng.gen_range(lo..hi)),
        rotation: std::array::from_fn(|_| rng.gen_range(-1.0..1.0)),
        opacity_logit: rng.gen_range(-2.0..4.0),
        ..Default::default()
    };
    g.rotation = g.unit_rotation();
    g.sh[0] = std::array::from_fn(|_| rng.gen_range(-1.0..1.0));
    for k in &mut g.sh[1..] {
        *k = std::array::from_fn(|_| rng.gen_range(-0.2..0.2));
    }
    g
}

/// A seeded synthetic cloud of `n` Gaussians.
pub fn gen_synthetic(kind: SceneKind, n: usize, seed: u64) -> GaussianCloud {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let side = (n as f64).cbrt().ceil().max(1.0) as usize;
    let centers: Vec<[f32; 3]> =
        (0..8).map(|_| std::array::from_fn(|_| rng.gen_range(-1.0f32..1.0))).collect();
    use SceneKind::*;
    let scene_scale = match kind {
        Sphere | Clustered | Grid => 1.0,
        Hemisphere => 3.0,
    };
    let gaussians = (0..n)
        .map(|i| {
            let mean = match kind {
                Sphere => unit_dir(&mut rng).map(|v| v * rng.gen_range(0.95..1.05)),
                Hemisphere => {
                    let mut d = unit_dir(&mut rng);
                    d[2] = d[2].abs();
                    let r = 3.0 * rng.gen_range(0.95..1.05);
                    d.map(|v| v * r)
                }
                Grid => {
                    let (x, y, z) = (i % side, (i / side) % side, i / (side * side));
                    let at = |k: usize| if side == 1 { 0.0 } else { -1.0 + 2.0 * k as f32 / (side - 1) as f32 };
                    [at(x), at(y), at(z)]
                }
                Clustered => {
                    let c = centers[rng.gen_range(0..centers.len())];
                    let p = unit_ball(&mut rng);
                    std::array::from_fn(|k| c[k] + 0.25 * p[k])
                }
            };
            attributes(&mut rng, mean, scene_scale)
        })
        .collect();
    GaussianCloud::from_gaussians(gaussians, 3).expect("degree 3 is valid")
}

/// `count` cameras on a horizontal circle of `radius` at height `height`, all looking at the origin.
pub fn orbit_views(count: usize, radius: f32, height: f32, width: u32, height_px: u32) -> Result<Vec<CameraView>, SceneError> {
    (0..count)
        .map(|i| {
            let t = 2.0 * PI * i as f32 / count.max(1) as f32;
            let eye = [radius * t.cos(), radius * t.sin(), height];
            CameraView::look_at(eye, [0.0; 3], [0.0, 0.0, 1.0], 60f32.to_radians(), width, height_px, 0.01)
        })
        .collect()
}

/// A camera at the origin looking along +x, for scenes that surround the viewer.
pub fn interior_view(width: u32, height: u32) -> CameraView {
    CameraView::look_at([0.0; 3], [1.0, 0.0, 0.3], [0.0, 0.0, 1.0], 70f32.to_radians(), width, height, 0.05)
        .expect("fixed camera is valid")
}
