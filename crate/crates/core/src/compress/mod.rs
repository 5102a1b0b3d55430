//! The compression pipeline: prune, truncate SH, vector-quantize colors, pack to FP16.

mod prune;
mod vq;

use half::f16;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use prune::{prune_step, significance, survivors, truncate_sh, PruneSchedule, ShAccounting, VOLUME_EXPONENT};
pub use vq::{vq_assign, vq_train, Codebook, VqError, VqReport};

use crate::container::{CompressedModel, ContainerError};
use crate::scene::{logit, sh_basis_count, CameraView, Gaussian3D, GaussianCloud, SceneError};

#[derive(Debug, Error)]
pub enum CompressError {
    #[error("at least one view is required")]
    NoViews,
    #[error("pruning schedule is empty")]
    EmptySchedule,
    #[error("pruning rate {0} is outside (0, 1)")]
    BadRate(f64),
    #[error("{scores} scores for {gaussians} Gaussians")]
    ScoreCount { scores: usize, gaussians: usize },
    #[error("significance scores must be finite")]
    NonFiniteScore,
    #[error("target SH degree {target} is above the current degree {current}")]
    DegreeAbove { target: u8, current: u8 },
    #[error(transparent)]
    Vq(#[from] VqError),
    #[error(transparent)]
    Scene(#[from] SceneError),
    #[error(transparent)]
    Container(#[from] ContainerError),
}

/// Hook run on the cloud after every pruning round.
pub trait FineTune {
    fn fine_tune(&mut self, cloud: &mut GaussianCloud, views: &[CameraView]);
}

/// Leaves the cloud untouched.
#[derive(Debug, Clone, Copy, Default)]
pub struct NoFineTune;

impl FineTune for NoFineTune {
    fn fine_tune(&mut self, _: &mut GaussianCloud, _: &[CameraView]) {}
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompressOptions {
    /// `None` skips pruning.
    pub schedule: Option<PruneSchedule>,
    pub target_degree: u8,
    pub k_dc: usize,
    pub k_sh: usize,
    pub vq_iters: usize,
    pub seed: u64,
}

impl Default for CompressOptions {
    fn default() -> Self {
        Self { schedule: Some(PruneSchedule::default()), target_degree: 1, k_dc: 256, k_sh: 256, vq_iters: 20, seed: 0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PruneRound {
    pub rate: f64,
    pub before: usize,
    pub after: usize,
}

/// Model size after each stage, in bytes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageSizes {
    /// 59 f32 parameters per input Gaussian.
    pub raw: usize,
    pub pruned: usize,
    /// f32 parameters left after SH truncation.
    pub truncated: usize,
    /// The same parameters at FP16, before quantization.
    pub fp16: usize,
    pub container: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompressionReport {
    pub input_gaussians: usize,
    pub output_gaussians: usize,
    pub rounds: Vec<PruneRound>,
    /// Fraction of input Gaussians removed by pruning.
    pub points_removed: f64,
    /// `1 − container / raw`.
    pub size_reduction: f64,
    /// `raw / container`.
    pub ratio: f64,
    pub sizes: StageSizes,
    pub sh: ShAccounting,
    pub k_dc: usize,
    pub k_sh: usize,
    pub dc_vq: Option<VqReport>,
    pub sh_vq: Option<VqReport>,
}

impl CompressionReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

pub fn compress(
    cloud: &GaussianCloud,
    views: &[CameraView],
    opts: &CompressOptions,
) -> Result<(CompressedModel, CompressionReport), CompressError> {
    compress_with(cloud, views, opts, &mut NoFineTune)
}

pub fn compress_with(
    cloud: &GaussianCloud,
    views: &[CameraView],
    opts: &CompressOptions,
    tuner: &mut dyn FineTune,
) -> Result<(CompressedModel, CompressionReport), CompressError> {
    let mut cur = cloud.clone();
    let mut rounds = Vec::new();
    if let Some(schedule) = &opts.schedule {
        for &rate in schedule.rates() {
            let scores = significance(&cur, views)?;
            let before = cur.len();
            cur = prune_step(&cur, &scores, rate)?;
            tuner.fine_tune(&mut cur, views);
            rounds.push(PruneRound { rate, before, after: cur.len() });
        }
    }
    let pruned_bytes = cur.raw_bytes();
    let (cur, sh) = truncate_sh(&cur, opts.target_degree)?;
    let degree = cur.sh_degree();
    let basis = sh_basis_count(degree);
    let params = 11 + 3 * basis;

    let dc: Vec<f32> = cur.gaussians.iter().flat_map(|g| g.sh[0]).collect();
    let rest: Vec<f32> = cur.gaussians.iter().flat_map(|g| g.sh[1..basis].iter().flatten().copied()).collect();
    let (dc_codebook, dc_index, dc_vq) = quantize(&dc, 3, opts.k_dc, opts, opts.seed)?;
    let (sh_codebook, sh_index, sh_vq) = quantize(&rest, 3 * (basis - 1), opts.k_sh, opts, opts.seed.wrapping_add(1))?;

    let model = CompressedModel {
        sh_degree: degree,
        positions: cur.gaussians.iter().map(|g| g.mean.map(f16::from_f32)).collect(),
        geometry: cur.gaussians.iter().map(geometry_halves).collect(),
        dc_codebook: dc_codebook.chunks_exact(3).map(|c| [c[0], c[1], c[2]]).collect(),
        sh_codebook,
        dc_index,
        sh_index,
    };
    model.validate()?;
    let container = model.encoded_len();
    let raw = cloud.raw_bytes();
    let report = CompressionReport {
        input_gaussians: cloud.len(),
        output_gaussians: cur.len(),
        rounds,
        points_removed: if cloud.is_empty() { 0.0 } else { 1.0 - cur.len() as f64 / cloud.len() as f64 },
        size_reduction: if raw == 0 { 0.0 } else { 1.0 - container as f64 / raw as f64 },
        ratio: raw as f64 / container as f64,
        sizes: StageSizes { raw, pruned: pruned_bytes, truncated: cur.len() * params * 4, fp16: cur.len() * params * 2, container },
        sh,
        k_dc: model.k_dc(),
        k_sh: model.k_sh(),
        dc_vq,
        sh_vq,
    };
    Ok((model, report))
}

type Quantized = (Vec<f16>, Vec<u32>, Option<VqReport>);

/// Trains a codebook, rounds it to FP16 and assigns against the rounded entries.
fn quantize(data: &[f32], dim: usize, k: usize, opts: &CompressOptions, seed: u64) -> Result<Quantized, CompressError> {
    if dim == 0 || data.is_empty() {
        return Ok((Vec::new(), Vec::new(), None));
    }
    let (book, report) = vq_train(data, dim, k, opts.vq_iters, seed)?;
    let halves: Vec<f16> = book.as_flat().iter().map(|&v| f16::from_f32(v)).collect();
    let rounded = Codebook::new(dim, halves.iter().map(|h| h.to_f32()).collect())?;
    let index = vq_assign(data, dim, &rounded)?;
    Ok((halves, index, Some(report)))
}

fn geometry_halves(g: &Gaussian3D) -> [f16; 8] {
    let s = g.log_scale;
    let r = g.unit_rotation();
    [s[0], s[1], s[2], r[0], r[1], r[2], r[3], g.opacity()].map(f16::from_f32)
}

/// Rebuilds a cloud by codebook lookup.
pub fn decompress(model: &CompressedModel) -> Result<GaussianCloud, ContainerError> {
    model.validate()?;
    let basis = sh_basis_count(model.sh_degree);
    let gaussians = (0..model.count())
        .map(|i| {
            let geo = model.geometry[i].map(f16::to_f32);
            let mut g = Gaussian3D {
                mean: model.positions[i].map(f16::to_f32),
                log_scale: [geo[0], geo[1], geo[2]],
                rotation: [geo[3], geo[4], geo[5], geo[6]],
                opacity_logit: logit(geo[7]),
                ..Default::default()
            };
            g.sh[0] = model.dc_codebook[model.dc_index[i] as usize].map(f16::to_f32);
            if basis > 1 {
                let entry = model.sh_entry(model.sh_index[i] as usize);
                for (k, chunk) in entry.chunks_exact(3).enumerate() {
                    g.sh[k + 1] = [chunk[0].to_f32(), chunk[1].to_f32(), chunk[2].to_f32()];
                }
            }
            g
        })
        .collect();
    Ok(GaussianCloud::from_gaussians(gaussians, model.sh_degree).expect("validated degree"))
}
