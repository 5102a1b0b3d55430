//! Scene-level domain types: Gaussians, clouds and pinhole cameras.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Highest supported SH degree.
pub const MAX_SH_DEGREE: u8 = 3;

/// Basis functions per channel at [`MAX_SH_DEGREE`].
pub const MAX_SH_BASIS: usize = 16;

/// Parameters of an uncompressed degree-3 Gaussian: 3 mean, 3 scale,
/// 4 rotation, 1 opacity and 48 SH coefficients.
pub const RAW_PARAMS_PER_GAUSSIAN: usize = 59;

/// Number of SH basis functions per channel for `degree`, i.e. `(degree + 1)^2`.
pub const fn sh_basis_count(degree: u8) -> usize {
    let d = degree as usize + 1;
    d * d
}

/// Inverse of [`sh_basis_count`]; `None` for counts that are not a supported square.
pub fn sh_degree_from_basis(basis: usize) -> Option<u8> {
    match basis {
        1 => Some(0),
        4 => Some(1),
        9 => Some(2),
        16 => Some(3),
        _ => None,
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum SceneError {
    #[error("invalid camera: {0}")]
    InvalidCamera(&'static str),
    #[error("sh degree {0} is outside 0..=3")]
    InvalidShDegree(u8),
}

pub fn sigmoid(x: f32) -> f32 {
    1.0 / (1.0 + (-x).exp())
}

/// Inverse sigmoid, with the probability clamped away from 0 and 1 so the result stays finite.
pub fn logit(p: f32) -> f32 {
    let p = p.clamp(1e-7, 1.0 - 1e-7);
    (p / (1.0 - p)).ln()
}

/// A single 3D Gaussian in the parameterization used by trained 3DGS
/// checkpoints: log-scales and an opacity logit are stored raw, and the
/// activated values are available through accessors.
///
/// SH coefficients are basis-major: `sh[k][c]` is basis function `k`,
/// channel `c`. Entries past the cloud's basis count are zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Gaussian3D {
    pub mean: [f32; 3],
    pub log_scale: [f32; 3],
    /// Quaternion `(w, x, y, z)`, not necessarily normalized.
    pub rotation: [f32; 4],
    pub opacity_logit: f32,
    pub sh: [[f32; 3]; MAX_SH_BASIS],
}

impl Default for Gaussian3D {
    fn default() -> Self {
        Self {
            mean: [0.0; 3],
            log_scale: [0.0; 3],
            rotation: [1.0, 0.0, 0.0, 0.0],
            opacity_logit: 0.0,
            sh: [[0.0; 3]; MAX_SH_BASIS],
        }
    }
}

impl Gaussian3D {
    pub fn opacity(&self) -> f32 {
        sigmoid(self.opacity_logit)
    }

    pub fn scale(&self) -> [f32; 3] {
        self.log_scale.map(f32::exp)
    }

    /// Product of the three activated scales.
    pub fn volume(&self) -> f64 {
        self.log_scale.iter().map(|&s| s as f64).sum::<f64>().exp()
    }

    /// Unit quaternion; a degenerate (zero) quaternion maps to identity.
    pub fn unit_rotation(&self) -> [f32; 4] {
        let [w, x, y, z] = self.rotation;
        let n = (w * w + x * x + y * y + z * z).sqrt();
        if n > 0.0 && n.is_finite() {
            [w / n, x / n, y / n, z / n]
        } else {
            [1.0, 0.0, 0.0, 0.0]
        }
    }
}

/// A scene: Gaussians sharing one SH degree.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianCloud {
    pub gaussians: Vec<Gaussian3D>,
    sh_degree: u8,
}

impl GaussianCloud {
    pub fn new(sh_degree: u8) -> Result<Self, SceneError> {
        Self::from_gaussians(Vec::new(), sh_degree)
    }

    /// Builds a cloud, zeroing any coefficients above `sh_degree` so the
    /// basis count is uniform.
    pub fn from_gaussians(mut gaussians: Vec<Gaussian3D>, sh_degree: u8) -> Result<Self, SceneError> {
        if sh_degree > MAX_SH_DEGREE {
            return Err(SceneError::InvalidShDegree(sh_degree));
        }
        let basis = sh_basis_count(sh_degree);
        for g in &mut gaussians {
            for k in &mut g.sh[basis..] {
                *k = [0.0; 3];
            }
        }
        Ok(Self { gaussians, sh_degree })
    }

    pub fn sh_degree(&self) -> u8 {
        self.sh_degree
    }

    pub fn sh_basis(&self) -> usize {
        sh_basis_count(self.sh_degree)
    }

    pub fn len(&self) -> usize {
        self.gaussians.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gaussians.is_empty()
    }

    /// Size of the cloud stored as 59 f32 parameters per Gaussian.
    pub fn raw_bytes(&self) -> usize {
        self.len() * RAW_PARAMS_PER_GAUSSIAN * 4
    }

    /// Drops SH bands above `degree`. Callers validate `degree <= sh_degree()`.
    pub(crate) fn truncate_degree(&mut self, degree: u8) {
        debug_assert!(degree <= self.sh_degree);
        let basis = sh_basis_count(degree);
        for g in &mut self.gaussians {
            for k in &mut g.sh[basis..] {
                *k = [0.0; 3];
            }
        }
        self.sh_degree = degree;
    }
}

/// Pinhole camera with an OpenCV-style frame: x right, y down, z forward.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CameraView {
    /// Row-major; camera-space point is `M · [p, 1]`.
    pub world_to_camera: [[f32; 4]; 4],
    pub fx: f32,
    pub fy: f32,
    pub cx: f32,
    pub cy: f32,
    pub width: u32,
    pub height: u32,
    pub z_near: f32,
}

impl CameraView {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        world_to_camera: [[f32; 4]; 4],
        fx: f32,
        fy: f32,
        cx: f32,
        cy: f32,
        width: u32,
        height: u32,
        z_near: f32,
    ) -> Result<Self, SceneError> {
        let cam = Self { world_to_camera, fx, fy, cx, cy, width, height, z_near };
        cam.validate()?;
        Ok(cam)
    }

    pub fn validate(&self) -> Result<(), SceneError> {
        if !(self.fx > 0.0 && self.fy > 0.0) {
            return Err(SceneError::InvalidCamera("focal lengths must be positive"));
        }
        if self.width == 0 || self.height == 0 {
            return Err(SceneError::InvalidCamera("image size must be nonzero"));
        }
        if !(self.z_near > 0.0) {
            return Err(SceneError::InvalidCamera("z_near must be positive"));
        }
        if self.world_to_camera.iter().flatten().any(|v| !v.is_finite()) {
            return Err(SceneError::InvalidCamera("non-finite view matrix"));
        }
        Ok(())
    }

    /// Camera at `eye` looking at `target`; `up` is the world up direction.
    /// `fov_y` is the vertical field of view in radians. The principal point
    /// sits at the image center.
    pub fn look_at(
        eye: [f32; 3],
        target: [f32; 3],
        up: [f32; 3],
        fov_y: f32,
        width: u32,
        height: u32,
        z_near: f32,
    ) -> Result<Self, SceneError> {
        let forward = normalize(sub3(target, eye)).ok_or(SceneError::InvalidCamera("eye equals target"))?;
        let right = normalize(cross(forward, up)).ok_or(SceneError::InvalidCamera("up is parallel to view direction"))?;
        let down = cross(forward, right);
        let rows = [right, down, forward];
        let mut m = [[0.0f32; 4]; 4];
        for (i, r) in rows.iter().enumerate() {
            m[i][..3].copy_from_slice(r);
            m[i][3] = -dot(*r, eye);
        }
        m[3][3] = 1.0;
        let fy = 0.5 * height as f32 / (0.5 * fov_y).tan();
        Self::new(m, fy, fy, 0.5 * width as f32, 0.5 * height as f32, width, height, z_near)
    }

    /// Rotation block `W` of the view matrix.
    pub fn rotation(&self) -> [[f32; 3]; 3] {
        let m = &self.world_to_camera;
        [
            [m[0][0], m[0][1], m[0][2]],
            [m[1][0], m[1][1], m[1][2]],
            [m[2][0], m[2][1], m[2][2]],
        ]
    }

    pub fn translation(&self) -> [f32; 3] {
        let m = &self.world_to_camera;
        [m[0][3], m[1][3], m[2][3]]
    }

    /// Camera center in world space, `-Wᵀ t`.
    pub fn center(&self) -> [f32; 3] {
        let w = self.rotation();
        let t = self.translation();
        let mut c = [0.0f32; 3];
        for (j, cj) in c.iter_mut().enumerate() {
            *cj = -(w[0][j] * t[0] + w[1][j] * t[1] + w[2][j] * t[2]);
        }
        c
    }

    /// Camera-space depth of a world point (third row of the view matrix).
    pub fn depth_of(&self, p: [f32; 3]) -> f32 {
        let r = self.world_to_camera[2];
        r[0] * p[0] + r[1] * p[1] + r[2] * p[2] + r[3]
    }
}

/// Exchange format for camera trajectories: one JSON object per view with a
/// row-major 4×4 world-to-camera matrix.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct CameraSpec {
    pub matrix: [f32; 16],
    pub fx: f32,
    pub fy: f32,
    pub cx: f32,
    pub cy: f32,
    pub width: u32,
    pub height: u32,
    pub z_near: f32,
}

impl From<&CameraView> for CameraSpec {
    fn from(cam: &CameraView) -> Self {
        let mut matrix = [0.0; 16];
        for (i, row) in cam.world_to_camera.iter().enumerate() {
            matrix[i * 4..i * 4 + 4].copy_from_slice(row);
        }
        Self {
            matrix,
            fx: cam.fx,
            fy: cam.fy,
            cx: cam.cx,
            cy: cam.cy,
            width: cam.width,
            height: cam.height,
            z_near: cam.z_near,
        }
    }
}

impl TryFrom<&CameraSpec> for CameraView {
    type Error = SceneError;

    fn try_from(spec: &CameraSpec) -> Result<Self, SceneError> {
        let mut m = [[0.0; 4]; 4];
        for (i, row) in m.iter_mut().enumerate() {
            row.copy_from_slice(&spec.matrix[i * 4..i * 4 + 4]);
        }
        CameraView::new(m, spec.fx, spec.fy, spec.cx, spec.cy, spec.width, spec.height, spec.z_near)
    }
}

/// Parses a JSON camera trajectory (a list of [`CameraSpec`]).
pub fn parse_trajectory(json: &str) -> Result<Vec<CameraView>, TrajectoryError> {
    let specs: Vec<CameraSpec> = serde_json::from_str(json)?;
    specs
        .iter()
        .enumerate()
        .map(|(i, s)| CameraView::try_from(s).map_err(|e| TrajectoryError::View(i, e)))
        .collect()
}

pub fn trajectory_to_json(views: &[CameraView]) -> String {
    let specs: Vec<CameraSpec> = views.iter().map(CameraSpec::from).collect();
    serde_json::to_string_pretty(&specs).expect("camera specs serialize")
}

#[derive(Debug, Error)]
pub enum TrajectoryError {
    #[error("malformed camera JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("view {0}: {1}")]
    View(usize, SceneError),
}

pub(crate) fn sub3(a: [f32; 3], b: [f32; 3]) -> [f32; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

pub(crate) fn dot(a: [f32; 3], b: [f32; 3]) -> f32 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub(crate) fn cross(a: [f32; 3], b: [f32; 3]) -> [f32; 3] {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

pub(crate) fn normalize(a: [f32; 3]) -> Option<[f32; 3]> {
    let n = dot(a, a).sqrt();
    (n > 1e-12 && n.is_finite()).then(|| [a[0] / n, a[1] / n, a[2] / n])
}
