//! Stages 0 and 1: near-plane culling and projection to splats.

mod cull;
mod ops;
mod project;
pub mod real;
mod sh;

use rayon::prelude::*;

pub use cull::{cull_near_plane, depth_half_extent, CullDecision, CullStats};
pub use ops::{measured_op_count, op_count, FULL_DATAPATH_OPS, ZEROSKIP_DATAPATH_OPS};
pub use project::{
    project, project_full, project_zeroskip, projection_jacobian, JacobianPath, Precision, ProjectOptions, Splat2D,
    TileRect, COVARIANCE_DILATION,
};
pub use real::OpTally;
pub use sh::{evaluate_sh, sh_eval_ops, ShError, SH_C0, SH_C1, SH_C2, SH_C3};

use crate::scene::{CameraView, GaussianCloud};

/// Output of the preprocessing step for one view.
#[derive(Debug, Clone, PartialEq)]
pub struct Preprocessed {
    /// Visible splats in source order.
    pub splats: Vec<Splat2D>,
    pub cull: CullStats,
    /// Kept by the near-plane test but dropped at projection (center in
    /// front of the near plane, degenerate footprint, or off-screen).
    pub rejected: u64,
}

/// Culls and projects every Gaussian. Results are independent of the
/// rayon pool size.
pub fn preprocess(cloud: &GaussianCloud, cam: &CameraView, opts: &ProjectOptions) -> Preprocessed {
    let degree = cloud.sh_degree();
    let results: Vec<(bool, Option<Splat2D>)> = cloud
        .gaussians
        .par_iter()
        .enumerate()
        .map(|(i, g)| {
            let keep = cull_near_plane(g, cam).keep;
            (keep, keep.then(|| project(g, i as u32, degree, cam, opts)).flatten())
        })
        .collect();
    let mut cull = CullStats::default();
    let mut rejected = 0;
    let mut splats = Vec::new();
    for (keep, splat) in results {
        cull.record(keep);
        match splat {
            Some(s) => splats.push(s),
            None if keep => rejected += 1,
            None => {}
        }
    }
    Preprocessed { splats, cull, rejected }
}
