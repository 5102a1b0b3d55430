//! Stage 3: front-to-back α-compositing per tile, and whole-frame assembly.

use std::ops::AddAssign;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::compress::decompress;
use crate::container::{CompressedModel, ContainerError};
use crate::image::Image;
use crate::preprocess::{preprocess, CullStats, ProjectOptions, Splat2D};
use crate::scene::{CameraView, GaussianCloud};
use crate::sort::{bin_tiles, DepthCode, sort_tile, sorter_cycles, Occupancy, SortKey, SortOrder, SorterConfig, TileGrid};

pub const DEFAULT_ALPHA_MAX: f32 = 0.99;
pub const DEFAULT_ALPHA_MIN: f32 = 1.0 / 255.0;
pub const DEFAULT_TERMINATION: f32 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RenderParams {
    /// Early-termination threshold on transmittance; 0 disables it.
    pub tau: f32,
    /// Contributions with α below this are skipped; 0 disables pruning.
    pub alpha_min: f32,
    pub alpha_max: f32,
    pub background: [f32; 3],
}

impl Default for RenderParams {
    fn default() -> Self {
        Self { tau: DEFAULT_TERMINATION, alpha_min: DEFAULT_ALPHA_MIN, alpha_max: DEFAULT_ALPHA_MAX, background: [0.0; 3] }
    }
}

impl RenderParams {
    /// Every contribution blended, nothing skipped.
    pub fn exhaustive() -> Self {
        Self { tau: 0.0, alpha_min: 0.0, ..Self::default() }
    }
}

/// Effective opacity of `splat` at pixel center `px`.
pub fn splat_alpha(splat: &Splat2D, px: [f32; 2], alpha_max: f32) -> f32 {
    let dx = px[0] - splat.mean2d[0];
    let dy = px[1] - splat.mean2d[1];
    let [a, b, c] = splat.conic;
    let power = -0.5 * (a * dx * dx + c * dy * dy) - b * dx * dy;
    (splat.opacity * power.min(0.0).exp()).min(alpha_max)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PixelState {
    pub color: [f32; 3],
    pub transmittance: f32,
    pub terminated: bool,
}

impl Default for PixelState {
    fn default() -> Self {
        Self { color: [0.0; 3], transmittance: 1.0, terminated: false }
    }
}

impl PixelState {
    /// Final color over `background`.
    pub fn resolve(&self, background: [f32; 3]) -> [f32; 3] {
        std::array::from_fn(|c| self.color[c] + self.transmittance * background[c])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BlendOutcome {
    Blended,
    AlphaPruned,
    /// The pixel had already terminated.
    Skipped,
}

pub fn blend_pixel(state: &mut PixelState, alpha: f32, color: [f32; 3], params: &RenderParams) -> BlendOutcome {
    if state.terminated {
        return BlendOutcome::Skipped;
    }
    if alpha < params.alpha_min {
        return BlendOutcome::AlphaPruned;
    }
    let w = state.transmittance * alpha;
    for (acc, c) in state.color.iter_mut().zip(color) {
        *acc += w * c;
    }
    state.transmittance *= 1.0 - alpha;
    if state.transmittance < params.tau {
        state.terminated = true;
    }
    BlendOutcome::Blended
}

/// Counters over (splat, pixel) pairs presented to the blender.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct RenderStats {
    pub blended: u64,
    pub alpha_pruned: u64,
    pub early_terminated: u64,
    pub pixels: u64,
    pub terminated_pixels: u64,
}

impl RenderStats {
    pub fn pairs(&self) -> u64 {
        self.blended + self.alpha_pruned + self.early_terminated
    }

    /// Fraction of presented pairs skipped because their pixel had terminated.
    pub fn termination_rate(&self) -> f64 {
        match self.pairs() {
            0 => 0.0,
            n => self.early_terminated as f64 / n as f64,
        }
    }
}

impl AddAssign for RenderStats {
    fn add_assign(&mut self, o: Self) {
        self.blended += o.blended;
        self.alpha_pruned += o.alpha_pruned;
        self.early_terminated += o.early_terminated;
        self.pixels += o.pixels;
        self.terminated_pixels += o.terminated_pixels;
    }
}

fn depth_code(s: &Splat2D) -> DepthCode {
    DepthCode::saturating_from_f32(s.depth).expect("projected depth is positive")
}

/// A rendered tile: row-major RGB for the in-image part of the tile.
#[derive(Debug, Clone, PartialEq)]
pub struct TileBlock {
    pub width: u32,
    pub height: u32,
    pub rgb: Vec<[f32; 3]>,
    pub stats: RenderStats,
}

/// Composites `order` (indices into `splats`, nearest first) over the tile
/// whose top-left pixel is `origin`. Pixels past `image_size` are not rendered.
pub fn render_tile(
    order: &[u32],
    splats: &[Splat2D],
    origin: [u32; 2],
    tile_size: u32,
    image_size: [u32; 2],
    params: &RenderParams,
) -> TileBlock {
    debug_assert!(
        order.windows(2).all(|w| depth_code(&splats[w[0] as usize]) <= depth_code(&splats[w[1] as usize])),
        "tile keys not front to back"
    );
    let width = tile_size.min(image_size[0].saturating_sub(origin[0]));
    let height = tile_size.min(image_size[1].saturating_sub(origin[1]));
    let mut stats = RenderStats::default();
    let mut rgb = Vec::with_capacity((width * height) as usize);
    for y in 0..height {
        for x in 0..width {
            let px = [(origin[0] + x) as f32 + 0.5, (origin[1] + y) as f32 + 0.5];
            let mut state = PixelState::default();
            for (done, &i) in order.iter().enumerate() {
                if state.terminated {
                    stats.early_terminated += (order.len() - done) as u64;
                    break;
                }
                let s = &splats[i as usize];
                match blend_pixel(&mut state, splat_alpha(s, px, params.alpha_max), s.color, params) {
                    BlendOutcome::Blended => stats.blended += 1,
                    BlendOutcome::AlphaPruned => stats.alpha_pruned += 1,
                    BlendOutcome::Skipped => unreachable!(),
                }
            }
            stats.pixels += 1;
            stats.terminated_pixels += state.terminated as u64;
            rgb.push(state.resolve(params.background));
        }
    }
    TileBlock { width, height, rgb, stats }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RenderOptions {
    pub project: ProjectOptions,
    pub params: RenderParams,
    pub sorter: SorterConfig,
    /// Worker threads; `None` uses the ambient rayon pool.
    pub threads: Option<usize>,
}

/// Per-frame counters consumed by the performance model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameStats {
    pub width: u32,
    pub height: u32,
    pub grid: TileGrid,
    pub gaussians: u64,
    pub cull: CullStats,
    /// Survived culling but produced no splat.
    pub rejected: u64,
    pub splats: u64,
    /// Keys per tile, row-major.
    pub tile_keys: Vec<u32>,
    pub sorter_cycles: u64,
    pub tiles_using_global: u64,
    pub overflow_events: u64,
    pub max_tile_keys: u64,
    pub render: RenderStats,
}

impl FrameStats {
    pub fn total_keys(&self) -> u64 {
        self.tile_keys.iter().map(|&k| k as u64).sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub image: Image,
    pub stats: FrameStats,
}

/// Runs the four stages on one view. The image and every counter are
/// independent of the thread count.
pub fn render_frame(cloud: &GaussianCloud, cam: &CameraView, opts: &RenderOptions) -> Frame {
    match opts.threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build()
            .expect("thread pool")
            .install(|| render_frame_inner(cloud, cam, opts)),
        None => render_frame_inner(cloud, cam, opts),
    }
}

/// Decodes `model` through its codebooks and renders it.
pub fn render_model(model: &CompressedModel, cam: &CameraView, opts: &RenderOptions) -> Result<Frame, ContainerError> {
    Ok(render_frame(&decompress(model)?, cam, opts))
}

fn render_frame_inner(cloud: &GaussianCloud, cam: &CameraView, opts: &RenderOptions) -> Frame {
    let tile_size = opts.project.tile_size;
    let grid = TileGrid::for_image(cam.width, cam.height, tile_size);
    let pre = preprocess(cloud, cam, &opts.project);
    let bins = bin_tiles(&pre.splats, grid);
    let tiles: Vec<(TileBlock, Occupancy, u64)> = bins
        .keys
        .par_iter()
        .enumerate()
        .map(|(id, keys): (usize, &Vec<SortKey>)| {
            let sorted = sort_tile(keys, &opts.sorter, SortOrder::FrontToBack);
            let (tx, ty) = grid.tile_coords(id as u32);
            let block = render_tile(
                &sorted.values,
                &pre.splats,
                [tx * tile_size, ty * tile_size],
                tile_size,
                [cam.width, cam.height],
                &opts.params,
            );
            (block, sorted.occupancy, sorter_cycles(keys.len(), &opts.sorter))
        })
        .collect();

    let mut image = Image::filled(cam.width, cam.height, opts.params.background);
    let mut render = RenderStats::default();
    let (mut cycles, mut using_global, mut overflow) = (0, 0, 0);
    for (id, (block, occ, c)) in tiles.iter().enumerate() {
        let (tx, ty) = grid.tile_coords(id as u32);
        for y in 0..block.height {
            for x in 0..block.width {
                image.set(tx * tile_size + x, ty * tile_size + y, block.rgb[(y * block.width + x) as usize]);
            }
        }
        render += block.stats;
        cycles += c;
        using_global += occ.uses_global() as u64;
        overflow += occ.overflow_beyond_capacity;
    }
    let tile_keys = bins.counts();
    let stats = FrameStats {
        width: cam.width,
        height: cam.height,
        grid,
        gaussians: cloud.len() as u64,
        cull: pre.cull,
        rejected: pre.rejected,
        splats: pre.splats.len() as u64,
        max_tile_keys: tile_keys.iter().copied().max().unwrap_or(0) as u64,
        tile_keys,
        sorter_cycles: cycles,
        tiles_using_global: using_global,
        overflow_events: overflow,
        render,
    };
    Frame { image, stats }
}
