//! Operation tallies for the Stage-1 projection datapath.

use super::project::{project_generic, JacobianPath};
use super::real::{Counted, OpTally};
use crate::scene::{CameraView, Gaussian3D};

/// Per-Gaussian arithmetic of the hardware projection datapath with a dense Jacobian.
pub const FULL_DATAPATH_OPS: OpTally = OpTally::new(78, 112, 7, 1);

/// Per-Gaussian arithmetic of the hardware projection datapath with zero-Jacobian skipping.
pub const ZEROSKIP_DATAPATH_OPS: OpTally = OpTally::new(46, 42, 5, 1);

/// Static per-Gaussian tally of the projection datapath.
pub fn op_count(path: JacobianPath) -> OpTally {
    match path {
        JacobianPath::Full => FULL_DATAPATH_OPS,
        JacobianPath::ZeroSkip => ZEROSKIP_DATAPATH_OPS,
    }
}

/// Operations this crate's software projection performs for one visible,
/// degree-0 Gaussian, measured by running it on counting scalars. The
/// software datapath is organized differently from the hardware one, so
/// only the direction and rough size of the zero-skip saving carry over.
pub fn measured_op_count(path: JacobianPath) -> OpTally {
    let m = [[1.0, 0.0, 0.0, 0.0], [0.0, 1.0, 0.0, 0.0], [0.0, 0.0, 1.0, 0.0], [0.0, 0.0, 0.0, 1.0]];
    let cam = CameraView::new(m, 500.0, 500.0, 320.0, 240.0, 640, 480, 0.01).expect("valid camera");
    let g = Gaussian3D {
        mean: [0.1, -0.05, 3.0],
        log_scale: [-3.0, -3.2, -2.8],
        rotation: [0.9, 0.2, -0.1, 0.3],
        ..Default::default()
    };
    let (splat, tally) = Counted::measure(|| project_generic::<Counted>(&g, 0, 0, &cam, path, 16));
    debug_assert!(splat.is_some());
    tally
}
