//! First-order cycle model of the four-stage pipeline.
//!
//! Preprocessing (stages 0 and 1) and rendering (stages 2 and 3) are
//! pipelined at frame level, so a frame costs the slower half plus a fixed
//! fill/drain charge.

use std::io::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::preprocess::{op_count, JacobianPath, OpTally};
use crate::raster::FrameStats;

#[derive(Debug, Error)]
pub enum PerfError {
    #[error("inconsistent frame statistics: {0}")]
    Stats(String),
    #[error("invalid model parameter: {0}")]
    Config(String),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerfConfig {
    pub clock_hz: f64,
    pub stage0_latency: u64,
    /// Multiply-accumulate units in the projection array.
    pub stage1_macs: u32,
    pub stage1_utilization: f64,
    pub sorter_parallelism: u32,
    pub raster_parallelism: u32,
    pub fill_drain_cycles: u64,
    pub path: JacobianPath,
}

impl Default for PerfConfig {
    fn default() -> Self {
        Self {
            clock_hz: 800e6,
            stage0_latency: 4,
            stage1_macs: 6,
            stage1_utilization: 0.516,
            sorter_parallelism: 4,
            raster_parallelism: 4,
            fill_drain_cycles: 10_000,
            path: JacobianPath::ZeroSkip,
        }
    }
}

impl PerfConfig {
    fn validate(&self) -> Result<(), PerfError> {
        if !(self.clock_hz > 0.0) {
            return Err(PerfError::Config("clock must be positive".into()));
        }
        if !(self.stage1_utilization > 0.0 && self.stage1_utilization <= 1.0) {
            return Err(PerfError::Config("stage-1 utilization must lie in (0, 1]".into()));
        }
        if self.stage1_macs == 0 || self.sorter_parallelism == 0 || self.raster_parallelism == 0 {
            return Err(PerfError::Config("unit counts must be nonzero".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StageProfile {
    pub stage: u8,
    pub items: u64,
    pub cycles: u64,
    pub utilization: f64,
}

/// Tiles whose key count falls in `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct HistogramBin {
    pub lo: u32,
    pub hi: u32,
    pub tiles: u64,
}

pub const HISTOGRAM_BIN_WIDTH: u32 = 100;

/// Tile-density histogram at [`HISTOGRAM_BIN_WIDTH`] granularity, up to the densest tile.
pub fn tile_histogram(tile_keys: &[u32]) -> Vec<HistogramBin> {
    let max = tile_keys.iter().copied().max().unwrap_or(0);
    let mut bins: Vec<HistogramBin> = (0..=max / HISTOGRAM_BIN_WIDTH)
        .map(|b| HistogramBin { lo: b * HISTOGRAM_BIN_WIDTH, hi: b * HISTOGRAM_BIN_WIDTH + HISTOGRAM_BIN_WIDTH - 1, tiles: 0 })
        .collect();
    if tile_keys.is_empty() {
        return Vec::new();
    }
    for &k in tile_keys {
        bins[(k / HISTOGRAM_BIN_WIDTH) as usize].tiles += 1;
    }
    bins
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateReport {
    pub gaussians: u64,
    pub culled: u64,
    pub culling_rate: f64,
    pub presented_pairs: u64,
    pub terminated_pairs: u64,
    pub early_termination_rate: f64,
    pub alpha_pruned_pairs: u64,
    pub histogram: Vec<HistogramBin>,
}

pub fn rate_report(stats: &FrameStats) -> RateReport {
    RateReport {
        gaussians: stats.cull.total,
        culled: stats.cull.culled,
        culling_rate: stats.cull.rate(),
        presented_pairs: stats.render.pairs(),
        terminated_pairs: stats.render.early_terminated,
        early_termination_rate: stats.render.termination_rate(),
        alpha_pruned_pairs: stats.render.alpha_pruned,
        histogram: tile_histogram(&stats.tile_keys),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SorterSummary {
    pub total_keys: u64,
    pub max_tile_keys: u64,
    pub tiles_using_global: u64,
    pub overflow_events: u64,
    pub sorter_cycles: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerfReport {
    pub width: u32,
    pub height: u32,
    pub tiles: u64,
    pub stages: [StageProfile; 4],
    pub stage1_ops: OpTally,
    pub preprocess_cycles: u64,
    pub render_cycles: u64,
    pub frame_cycles: u64,
    pub clock_hz: f64,
    pub fps: f64,
    pub mpix_per_s: f64,
    pub rates: RateReport,
    pub sorter: SorterSummary,
}

impl PerfReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// One row per stage.
    pub fn write_stage_csv<W: Write>(&self, out: W) -> Result<(), PerfError> {
        let mut w = csv::Writer::from_writer(out);
        for s in &self.stages {
            w.serialize(s)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Writes the tile histogram as `lo,hi,tiles` rows.
pub fn write_histogram_csv<W: Write>(bins: &[HistogramBin], out: W) -> Result<(), PerfError> {
    let mut w = csv::Writer::from_writer(out);
    for b in bins {
        w.serialize(b)?;
    }
    w.flush()?;
    Ok(())
}

/// Projection work for `n` Gaussians that reach stage 1.
pub fn stage1_ops(n: u64, path: JacobianPath) -> OpTally {
    op_count(path).scaled(n)
}

pub fn fps(clock_hz: f64, frame_cycles: u64) -> f64 {
    clock_hz / frame_cycles as f64
}

pub fn mpix_per_s(fps: f64, width: u32, height: u32) -> f64 {
    fps * width as f64 * height as f64 / 1e6
}

pub fn model_frame(stats: &FrameStats, cfg: &PerfConfig) -> Result<PerfReport, PerfError> {
    cfg.validate()?;
    check_stats(stats)?;
    let n = stats.gaussians;
    let kept = stats.cull.total - stats.cull.culled;

    let stage0 = if n == 0 { 0 } else { n + cfg.stage0_latency };
    let ops = stage1_ops(kept, cfg.path);
    let stage1 = (ops.total() as f64 / (cfg.stage1_macs as f64 * cfg.stage1_utilization)).ceil() as u64;
    let stage2 = stats.sorter_cycles.div_ceil(cfg.sorter_parallelism as u64);
    let blended = stats.render.blended;
    let stage3 = blended.div_ceil(cfg.raster_parallelism as u64);

    let util = |work: f64, cycles: u64| if cycles == 0 { 0.0 } else { (work / cycles as f64).min(1.0) };
    let stages = [
        StageProfile { stage: 0, items: n, cycles: stage0, utilization: util(n as f64, stage0) },
        StageProfile { stage: 1, items: kept, cycles: stage1, utilization: if kept == 0 { 0.0 } else { cfg.stage1_utilization } },
        StageProfile {
            stage: 2,
            items: stats.total_keys(),
            cycles: stage2,
            utilization: util(stats.sorter_cycles as f64 / cfg.sorter_parallelism as f64, stage2),
        },
        StageProfile {
            stage: 3,
            items: blended,
            cycles: stage3,
            utilization: util(blended as f64 / cfg.raster_parallelism as f64, stage3),
        },
    ];
    let preprocess_cycles = stage0 + stage1;
    let render_cycles = stage2 + stage3;
    let frame_cycles = preprocess_cycles.max(render_cycles) + cfg.fill_drain_cycles;
    let fps = fps(cfg.clock_hz, frame_cycles);
    Ok(PerfReport {
        width: stats.width,
        height: stats.height,
        tiles: stats.grid.tile_count() as u64,
        stages,
        stage1_ops: ops,
        preprocess_cycles,
        render_cycles,
        frame_cycles,
        clock_hz: cfg.clock_hz,
        fps,
        mpix_per_s: mpix_per_s(fps, stats.width, stats.height),
        rates: rate_report(stats),
        sorter: SorterSummary {
            total_keys: stats.total_keys(),
            max_tile_keys: stats.max_tile_keys,
            tiles_using_global: stats.tiles_using_global,
            overflow_events: stats.overflow_events,
            sorter_cycles: stats.sorter_cycles,
        },
    })
}

fn check_stats(s: &FrameStats) -> Result<(), PerfError> {
    if s.width == 0 || s.height == 0 {
        return Err(PerfError::Stats("image size is zero".into()));
    }
    if s.tile_keys.len() != s.grid.tile_count() {
        return Err(PerfError::Stats(format!("{} tile counts for {} tiles", s.tile_keys.len(), s.grid.tile_count())));
    }
    if s.cull.total != s.gaussians || s.cull.culled > s.cull.total {
        return Err(PerfError::Stats("culling counters disagree with the Gaussian count".into()));
    }
    if s.render.pixels != s.width as u64 * s.height as u64 {
        return Err(PerfError::Stats("pixel count disagrees with the image size".into()));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn throughput_identities() {
        let f = fps(800e6, 6_200_000);
        assert!((f - 129.03).abs() < 0.01);
        let m = mpix_per_s(129.0, 1920, 1080);
        assert_eq!(m, 1920.0 * 1080.0 * 129.0 / 1e6);
        assert_eq!(format!("{m:.1}"), "267.5");
    }

    #[test]
    fn stage1_linearity() {
        assert_eq!(stage1_ops(1, JacobianPath::ZeroSkip).total(), 94);
        assert_eq!(stage1_ops(1, JacobianPath::Full).total(), 198);
        assert_eq!(stage1_ops(0, JacobianPath::ZeroSkip).total(), 0);
        assert_eq!(stage1_ops(1000, JacobianPath::ZeroSkip).total(), 94_000);
    }

    #[test]
    fn histogram_bins() {
        let h = tile_histogram(&[0, 99, 100, 250, 250]);
        assert_eq!(h.len(), 3);
        assert_eq!(h.iter().map(|b| b.tiles).collect::<Vec<_>>(), vec![2, 1, 2]);
        assert_eq!((h[2].lo, h[2].hi), (200, 299));
        assert!(tile_histogram(&[]).is_empty());
    }
}
