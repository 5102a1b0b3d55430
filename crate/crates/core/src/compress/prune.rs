//! Significance scoring, iterative pruning and SH truncation.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::CompressError;
use crate::preprocess::{cull_near_plane, project, sh_eval_ops, ProjectOptions};
use crate::scene::{sh_basis_count, CameraView, GaussianCloud, MAX_SH_DEGREE, RAW_PARAMS_PER_GAUSSIAN};

/// Exponent applied to the Gaussian volume in the significance score.
pub const VOLUME_EXPONENT: f64 = 0.1;

/// Per-iteration pruning rates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PruneSchedule {
    rates: Vec<f64>,
}

impl PruneSchedule {
    pub fn new(rates: Vec<f64>) -> Result<Self, CompressError> {
        if rates.is_empty() {
            return Err(CompressError::EmptySchedule);
        }
        if let Some(&r) = rates.iter().find(|&&r| !(r > 0.0 && r < 1.0)) {
            return Err(CompressError::BadRate(r));
        }
        Ok(Self { rates })
    }

    pub fn rates(&self) -> &[f64] {
        &self.rates
    }

    /// Gaussians left after running the whole schedule on `n`.
    pub fn survivors(&self, n: usize) -> usize {
        self.rates.iter().fold(n, |n, &r| survivors(n, r))
    }
}

impl Default for PruneSchedule {
    fn default() -> Self {
        Self { rates: vec![0.4, 0.4, 0.4, 0.2] }
    }
}

/// Gaussians kept when pruning `n` at `rate`: `n·(1 − rate)` rounded half up.
pub fn survivors(n: usize, rate: f64) -> usize {
    (n as f64 * (1.0 - rate) + 0.5).floor() as usize
}

/// Per-Gaussian importance summed over `views`: covered tiles × opacity ×
/// volume^[`VOLUME_EXPONENT`]. Gaussians that are culled or fail to project
/// in a view add nothing for it.
pub fn significance(cloud: &GaussianCloud, views: &[CameraView]) -> Result<Vec<f64>, CompressError> {
    if views.is_empty() {
        return Err(CompressError::NoViews);
    }
    let opts = ProjectOptions::default();
    let degree = cloud.sh_degree();
    Ok(cloud
        .gaussians
        .par_iter()
        .enumerate()
        .map(|(i, g)| {
            let weight = g.opacity() as f64 * g.volume().powf(VOLUME_EXPONENT);
            views
                .iter()
                .map(|cam| {
                    if !cull_near_plane(g, cam).keep {
                        return 0.0;
                    }
                    match project(g, i as u32, degree, cam, &opts) {
                        Some(s) => s.tile_range.tile_count() as f64 * weight,
                        None => 0.0,
                    }
                })
                .sum()
        })
        .collect())
}

/// Removes the lowest-scoring Gaussians, lowest index first among equal
/// scores. Survivors keep their relative order.
pub fn prune_step(cloud: &GaussianCloud, scores: &[f64], rate: f64) -> Result<GaussianCloud, CompressError> {
    if !(rate > 0.0 && rate < 1.0) {
        return Err(CompressError::BadRate(rate));
    }
    if scores.len() != cloud.len() {
        return Err(CompressError::ScoreCount { scores: scores.len(), gaussians: cloud.len() });
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(CompressError::NonFiniteScore);
    }
    let n = cloud.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]).then(a.cmp(&b)));
    let mut keep = vec![true; n];
    for &i in &order[..n - survivors(n, rate)] {
        keep[i] = false;
    }
    let gaussians = cloud.gaussians.iter().zip(&keep).filter(|(_, &k)| k).map(|(g, _)| *g).collect();
    Ok(GaussianCloud::from_gaussians(gaussians, cloud.sh_degree()).expect("degree unchanged"))
}

/// Savings from dropping SH bands, relative to the 59-parameter Gaussian.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShAccounting {
    pub from_degree: u8,
    pub to_degree: u8,
    pub elements_removed: usize,
    /// `elements_removed / 59`.
    pub param_reduction: f64,
    /// Modeled drop in color-evaluation arithmetic, relative to a degree-3 evaluation.
    pub compute_reduction: f64,
}

impl ShAccounting {
    pub fn between(from: u8, to: u8) -> Self {
        let elements_removed = 3 * (sh_basis_count(from) - sh_basis_count(to));
        let ops = |d: u8| sh_eval_ops(d).total() as f64;
        Self {
            from_degree: from,
            to_degree: to,
            elements_removed,
            param_reduction: elements_removed as f64 / RAW_PARAMS_PER_GAUSSIAN as f64,
            compute_reduction: (ops(from) - ops(to)) / ops(MAX_SH_DEGREE),
        }
    }

    /// Parameter reduction as a whole percentage.
    pub fn param_percent(&self) -> u32 {
        (self.param_reduction * 100.0).round() as u32
    }
}

/// Hard truncation to `target` degree.
pub fn truncate_sh(cloud: &GaussianCloud, target: u8) -> Result<(GaussianCloud, ShAccounting), CompressError> {
    let from = cloud.sh_degree();
    if target > from {
        return Err(CompressError::DegreeAbove { target, current: from });
    }
    let mut out = cloud.clone();
    out.truncate_degree(target);
    Ok((out, ShAccounting::between(from, target)))
}
