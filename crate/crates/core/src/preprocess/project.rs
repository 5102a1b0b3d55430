//! Projection of 3D Gaussians to screen-space splats.
//!
//! Both datapaths share everything except the propagation
//! `Σ₂D = (J·W) Σ₃D (J·W)ᵀ`. The full path materializes the 3×3 Jacobian
//! (with its zero third row) and dense products; the zero-skip path only
//! evaluates the four nonzero Jacobian terms and the 2×2 block it needs.
//! The nonzero terms are combined in the same order on both paths, so the
//! results are bitwise identical.

use serde::{Deserialize, Serialize};

use super::real::{Fp16Emu, Real};
use super::sh::eval_sh;
use crate::scene::{CameraView, Gaussian3D};

/// Added to the diagonal of Σ₂D before inversion, in px².
pub const COVARIANCE_DILATION: f32 = 0.3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum JacobianPath {
    Full,
    #[default]
    ZeroSkip,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Precision {
    #[default]
    F32,
    /// Round to binary16 after every arithmetic operation.
    Fp16,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProjectOptions {
    pub path: JacobianPath,
    pub precision: Precision,
    pub tile_size: u32,
}

impl Default for ProjectOptions {
    fn default() -> Self {
        Self { path: JacobianPath::ZeroSkip, precision: Precision::F32, tile_size: 16 }
    }
}

/// Inclusive tile rectangle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TileRect {
    pub x0: u32,
    pub y0: u32,
    pub x1: u32,
    pub y1: u32,
}

impl TileRect {
    pub fn tile_count(&self) -> u64 {
        (self.x1 - self.x0 + 1) as u64 * (self.y1 - self.y0 + 1) as u64
    }

    pub fn contains(&self, tx: u32, ty: u32) -> bool {
        (self.x0..=self.x1).contains(&tx) && (self.y0..=self.y1).contains(&ty)
    }
}

/// A projected Gaussian.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Splat2D {
    /// Index of the source Gaussian in its cloud.
    pub source: u32,
    pub mean2d: [f32; 2],
    /// Camera-space z of the center.
    pub depth: f32,
    /// Upper triangle `(a, b, c)` of the inverse dilated Σ₂D.
    pub conic: [f32; 3],
    pub color: [f32; 3],
    pub opacity: f32,
    pub radius: u32,
    pub tile_range: TileRect,
}

impl Splat2D {
    /// Raw bit patterns of every float field, for exactness checks.
    pub fn float_bits(&self) -> [u32; 10] {
        [
            self.mean2d[0].to_bits(),
            self.mean2d[1].to_bits(),
            self.depth.to_bits(),
            self.conic[0].to_bits(),
            self.conic[1].to_bits(),
            self.conic[2].to_bits(),
            self.color[0].to_bits(),
            self.color[1].to_bits(),
            self.color[2].to_bits(),
            self.opacity.to_bits(),
        ]
    }
}

/// `Σ₃D = R S Sᵀ Rᵀ` from the unit quaternion and activated scales.
pub(crate) fn covariance_3d<R: Real>(g: &Gaussian3D) -> [[R; 3]; 3] {
    let [w, x, y, z] = g.unit_rotation().map(R::lit);
    let s = g.scale().map(R::lit);
    let one = R::lit(1.0);
    let two = R::lit(2.0);
    let rot = [
        [one - two * (y * y + z * z), two * (x * y - w * z), two * (x * z + w * y)],
        [two * (x * y + w * z), one - two * (x * x + z * z), two * (y * z - w * x)],
        [two * (x * z - w * y), two * (y * z + w * x), one - two * (x * x + y * y)],
    ];
    let mut m = rot;
    for row in &mut m {
        for (j, v) in row.iter_mut().enumerate() {
            *v = *v * s[j];
        }
    }
    let mut sigma = [[R::lit(0.0); 3]; 3];
    for i in 0..3 {
        for j in i..3 {
            let v = m[i][0] * m[j][0] + m[i][1] * m[j][1] + m[i][2] * m[j][2];
            sigma[i][j] = v;
            sigma[j][i] = v;
        }
    }
    sigma
}

/// Nonzero Jacobian entries `[[j00, 0, j02], [0, j11, j12]]`.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Jacobian<R> {
    pub j00: R,
    pub j02: R,
    pub j11: R,
    pub j12: R,
}

pub(crate) fn jacobian<R: Real>(fx: R, fy: R, x: R, y: R, inv_z: R) -> Jacobian<R> {
    let inv_z2 = inv_z * inv_z;
    Jacobian { j00: fx * inv_z, j02: -(fx * x) * inv_z2, j11: fy * inv_z, j12: -(fy * y) * inv_z2 }
}

/// Upper 2×2 block of `(J·W) Σ (J·W)ᵀ` via dense 3×3 algebra.
fn propagate_full<R: Real>(j: &Jacobian<R>, w: &[[R; 3]; 3], sigma: &[[R; 3]; 3]) -> [R; 3] {
    let zero = R::lit(0.0);
    let jm = [[j.j00, zero, j.j02], [zero, j.j11, j.j12], [zero, zero, zero]];
    let t = matmul3(&jm, w);
    let mut ts = [[zero; 3]; 3];
    for i in 0..3 {
        for k in 0..3 {
            ts[i][k] = t[i][0] * sigma[0][k] + t[i][1] * sigma[1][k] + t[i][2] * sigma[2][k];
        }
    }
    let mut cov = [[zero; 3]; 3];
    for i in 0..3 {
        for k in 0..3 {
            cov[i][k] = ts[i][0] * t[k][0] + ts[i][1] * t[k][1] + ts[i][2] * t[k][2];
        }
    }
    [cov[0][0], cov[0][1], cov[1][1]]
}

fn matmul3<R: Real>(a: &[[R; 3]; 3], b: &[[R; 3]; 3]) -> [[R; 3]; 3] {
    let mut out = [[R::lit(0.0); 3]; 3];
    for i in 0..3 {
        for k in 0..3 {
            out[i][k] = a[i][0] * b[0][k] + a[i][1] * b[1][k] + a[i][2] * b[2][k];
        }
    }
    out
}

/// Same quantity as [`propagate_full`], touching only structurally nonzero terms.
fn propagate_zeroskip<R: Real>(j: &Jacobian<R>, w: &[[R; 3]; 3], sigma: &[[R; 3]; 3]) -> [R; 3] {
    let mut t = [[R::lit(0.0); 3]; 2];
    for k in 0..3 {
        t[0][k] = j.j00 * w[0][k] + j.j02 * w[2][k];
        t[1][k] = j.j11 * w[1][k] + j.j12 * w[2][k];
    }
    let mut ts = [[R::lit(0.0); 3]; 2];
    for i in 0..2 {
        for k in 0..3 {
            ts[i][k] = t[i][0] * sigma[0][k] + t[i][1] * sigma[1][k] + t[i][2] * sigma[2][k];
        }
    }
    let dot = |a: &[R; 3], b: &[R; 3]| a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
    [dot(&ts[0], &t[0]), dot(&ts[0], &t[1]), dot(&ts[1], &t[1])]
}

pub(crate) fn project_generic<R: Real>(
    g: &Gaussian3D,
    index: u32,
    sh_degree: u8,
    cam: &CameraView,
    path: JacobianPath,
    tile_size: u32,
) -> Option<Splat2D> {
    let w32 = cam.rotation();
    let w = w32.map(|r| r.map(R::lit));
    let t = cam.translation().map(R::lit);
    let mean = g.mean.map(R::lit);
    let mut p = [R::lit(0.0); 3];
    for i in 0..3 {
        p[i] = w[i][0] * mean[0] + w[i][1] * mean[1] + w[i][2] * mean[2] + t[i];
    }
    let [x, y, z] = p;
    // Only Gaussians whose center lies in front of the near plane have a
    // well-defined perspective footprint.
    if !(z.get() >= cam.z_near) {
        return None;
    }
    let (fx, fy) = (R::lit(cam.fx), R::lit(cam.fy));
    let inv_z = R::lit(1.0) / z;
    let u = fx * (x * inv_z) + R::lit(cam.cx);
    let v = fy * (y * inv_z) + R::lit(cam.cy);

    let j = jacobian(fx, fy, x, y, inv_z);
    let sigma = covariance_3d::<R>(g);
    let [cov_a, cov_b, cov_c] = match path {
        JacobianPath::Full => propagate_full(&j, &w, &sigma),
        JacobianPath::ZeroSkip => propagate_zeroskip(&j, &w, &sigma),
    };

    let lambda = R::lit(COVARIANCE_DILATION);
    let a = cov_a + lambda;
    let b = cov_b;
    let c = cov_c + lambda;
    let det = a * c - b * b;
    if !(det.get() > 0.0 && det.get().is_finite()) {
        return None;
    }
    let inv_det = R::lit(1.0) / det;
    // `+ 0.0` canonicalizes negative zero.
    let conic = [(c * inv_det).get() + 0.0, (-b * inv_det).get() + 0.0, (a * inv_det).get() + 0.0];

    let mid = R::lit(0.5) * (a + c);
    let lambda_max = mid + (mid * mid - det).max(R::lit(0.0)).sqrt();
    let radius_f = (R::lit(3.0) * lambda_max.sqrt()).get().ceil();
    if !radius_f.is_finite() || conic.iter().any(|v| !v.is_finite()) {
        return None;
    }
    let (u, v) = (u.get(), v.get());
    let r = radius_f;
    let (width, height) = (cam.width as f32, cam.height as f32);
    if u + r < 0.0 || u - r >= width || v + r < 0.0 || v - r >= height {
        return None;
    }
    let tiles_x = cam.width.div_ceil(tile_size);
    let tiles_y = cam.height.div_ceil(tile_size);
    let ts = tile_size as f32;
    let tile = |p: f32, n: u32| ((p / ts).floor().max(0.0) as u32).min(n - 1);
    let tile_range = TileRect {
        x0: tile(u - r, tiles_x),
        y0: tile(v - r, tiles_y),
        x1: tile(u + r, tiles_x),
        y1: tile(v + r, tiles_y),
    };

    let center = cam.center().map(R::lit);
    let d = [mean[0] - center[0], mean[1] - center[1], mean[2] - center[2]];
    let n = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt();
    let dir = if n.get() > 0.0 { [d[0] / n, d[1] / n, d[2] / n] } else { [R::lit(0.0), R::lit(0.0), R::lit(1.0)] };
    let color = eval_sh::<R>(&g.sh, sh_degree, dir).map(|c| c.get().clamp(0.0, 1.0));

    Some(Splat2D {
        source: index,
        mean2d: [u, v],
        depth: z.get(),
        conic,
        color,
        opacity: g.opacity(),
        radius: radius_f as u32,
        tile_range,
    })
}

fn project_with_precision(
    g: &Gaussian3D,
    index: u32,
    sh_degree: u8,
    cam: &CameraView,
    path: JacobianPath,
    opts: &ProjectOptions,
) -> Option<Splat2D> {
    match opts.precision {
        Precision::F32 => project_generic::<f32>(g, index, sh_degree, cam, path, opts.tile_size),
        Precision::Fp16 => project_generic::<Fp16Emu>(g, index, sh_degree, cam, path, opts.tile_size),
    }
}

/// Reference projection with a dense Jacobian. `None` when the center is
/// in front of the near plane, the footprint is degenerate or off-screen.
pub fn project_full(g: &Gaussian3D, index: u32, sh_degree: u8, cam: &CameraView, opts: &ProjectOptions) -> Option<Splat2D> {
    project_with_precision(g, index, sh_degree, cam, JacobianPath::Full, opts)
}

/// Production projection that skips the structurally zero Jacobian terms.
pub fn project_zeroskip(
    g: &Gaussian3D,
    index: u32,
    sh_degree: u8,
    cam: &CameraView,
    opts: &ProjectOptions,
) -> Option<Splat2D> {
    project_with_precision(g, index, sh_degree, cam, JacobianPath::ZeroSkip, opts)
}

pub fn project(g: &Gaussian3D, index: u32, sh_degree: u8, cam: &CameraView, opts: &ProjectOptions) -> Option<Splat2D> {
    project_with_precision(g, index, sh_degree, cam, opts.path, opts)
}

/// The 2×3 projection Jacobian at camera-space point `p`, as computed by the datapath.
pub fn projection_jacobian(cam: &CameraView, p: [f32; 3]) -> [[f32; 3]; 2] {
    let j = jacobian(cam.fx, cam.fy, p[0], p[1], 1.0 / p[2]);
    [[j.j00, 0.0, j.j02], [0.0, j.j11, j.j12]]
}
