use serde::{Deserialize, Serialize};

use super::project::covariance_3d;
use crate::scene::{CameraView, Gaussian3D};

/// Near-plane culling counters for one frame.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CullStats {
    pub total: u64,
    pub culled: u64,
}

impl CullStats {
    pub fn rate(&self) -> f64 {
        if self.total == 0 {
            0.0
        } else {
            self.culled as f64 / self.total as f64
        }
    }

    pub fn record(&mut self, keep: bool) {
        self.total += 1;
        self.culled += u64::from(!keep);
    }

    pub fn merge(&mut self, other: &CullStats) {
        self.total += other.total;
        self.culled += other.culled;
    }
}

/// Outcome of the near-plane test for one Gaussian.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CullDecision {
    pub keep: bool,
    /// Camera-space depth of the center.
    pub z: f32,
    /// Half-extent along the camera z axis of the world AABB of the 3σ ellipsoid.
    pub dz: f32,
}

/// Half-extent of the world-space 3σ AABB projected onto the camera z axis.
pub fn depth_half_extent(g: &Gaussian3D, cam: &CameraView) -> f32 {
    let sigma = covariance_3d::<f32>(g);
    let axis = cam.world_to_camera[2];
    (0..3).map(|i| axis[i].abs() * 3.0 * sigma[i][i].max(0.0).sqrt()).sum()
}

/// The depth interval is `[z − Δz, z + Δz]`; the Gaussian is culled iff
/// `z + Δz < z_near`. A Gaussian touching the plane exactly is kept.
pub fn cull_near_plane(g: &Gaussian3D, cam: &CameraView) -> CullDecision {
    let z = cam.depth_of(g.mean);
    let dz = depth_half_extent(g, cam);
    CullDecision { keep: !(z + dz < cam.z_near), z, dz }
}
