//! Software model of a hardware-oriented 3D Gaussian splatting renderer.
//!
//! A frame runs through four stages: near-plane culling ([`preprocess`]),
//! projection to splats, comparison-free per-tile depth sorting ([`sort`])
//! and α-compositing with early termination ([`raster`]). [`compress`]
//! shrinks a scene into the [`container`] format and [`perf`] turns the
//! counters of a functional run into cycle and throughput estimates.

// Several checks are written as `!(x > 0.0)` on purpose so that NaN fails them.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod compress;
pub mod container;
pub mod image;
pub mod perf;
pub mod ply;
pub mod preprocess;
pub mod raster;
pub mod scene;
pub mod sort;
pub mod synthetic;

pub use container::CompressedModel;
pub use scene::{CameraView, Gaussian3D, GaussianCloud};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/scenes.md")]
    mod scenes {}
    #[doc = include_str!("../../../book/src/preprocess.md")]
    mod preprocess {}
    #[doc = include_str!("../../../book/src/sorting.md")]
    mod sorting {}
    #[doc = include_str!("../../../book/src/rasterization.md")]
    mod rasterization {}
    #[doc = include_str!("../../../book/src/compression.md")]
    mod compression {}
    #[doc = include_str!("../../../book/src/performance.md")]
    mod performance {}
}
