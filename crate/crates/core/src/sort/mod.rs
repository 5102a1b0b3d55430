//! Stage 2: tile binning and comparison-free depth sorting.

mod evt;
mod tile;

use half::f16;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use evt::{evt_select_max, EvtState};
pub use tile::{sort_tile, sorter_cycles, Occupancy, SortOrder, TileSort};

use crate::preprocess::Splat2D;

/// Width of a depth code: binary16 without its sign bit.
pub const DEPTH_CODE_BITS: usize = 15;
pub const DEFAULT_BIT_GROUPS: [u8; 4] = [3, 4, 4, 4];

#[derive(Debug, Error, PartialEq)]
pub enum SortError {
    #[error("depth must be positive, got {0}")]
    NonPositiveDepth(f32),
    #[error("depth must be finite")]
    NonFiniteDepth,
    #[error("element vector table is empty")]
    EmptyEvt,
    #[error("{codes} codes for an EVT of {evt} elements")]
    LengthMismatch { codes: usize, evt: usize },
    #[error("invalid sorter config: {0}")]
    Config(String),
}

/// Low 15 bits of a positive binary16 depth. For positive finite values the
/// bit pattern orders exactly like the value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct DepthCode(u16);

impl DepthCode {
    pub const MAX: DepthCode = DepthCode(0x7BFF);

    /// A raw code; `None` outside the positive finite binary16 range.
    pub fn from_bits(bits: u16) -> Option<Self> {
        (1..=Self::MAX.0).contains(&bits).then_some(Self(bits))
    }

    pub fn bits(self) -> u16 {
        self.0
    }

    /// The code the max-first sorter ranks on: nearer depths get larger keys.
    pub fn front_to_back_key(self) -> u16 {
        0x7FFF ^ self.0
    }

    /// Rounds `depth` to binary16 and saturates into the positive finite
    /// range; only nonpositive or NaN input is rejected.
    pub fn saturating_from_f32(depth: f32) -> Result<Self, SortError> {
        if depth.is_nan() {
            return Err(SortError::NonFiniteDepth);
        }
        if !(depth > 0.0) {
            return Err(SortError::NonPositiveDepth(depth));
        }
        let bits = f16::from_f32(depth).to_bits() & 0x7FFF;
        Ok(Self(bits.clamp(1, Self::MAX.0)))
    }
}

/// Sign-bit-skipping conversion of a positive finite binary16 depth.
pub fn depth_to_code(depth: f16) -> Result<DepthCode, SortError> {
    if !depth.is_finite() {
        return Err(SortError::NonFiniteDepth);
    }
    let bits = depth.to_bits();
    if bits & 0x8000 != 0 || bits == 0 {
        return Err(SortError::NonPositiveDepth(depth.to_f32()));
    }
    Ok(DepthCode(bits))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SortKey {
    pub tile_id: u32,
    pub depth: DepthCode,
    /// Splat index.
    pub value: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SorterConfig {
    pub sub_sorters: usize,
    /// Elements one sub-sorter selects over at a time.
    pub sub_capacity: usize,
    /// Keys per tile held in the sub-sorters' local key/value buffers.
    pub per_tile_local: usize,
    /// Bits handled per cascaded cluster block, most significant first.
    pub bit_groups: Vec<u8>,
    /// Shared overflow key buffer, bytes (the value buffer is the same size).
    pub global_key_bytes: usize,
    /// Bytes per overflow entry: 15-bit depth code and tile id packed.
    pub global_entry_bytes: usize,
    pub cycles_per_output: u64,
    /// Cycles charged per batch when more than one batch must be merged.
    pub merge_overhead_per_batch: u64,
}

impl Default for SorterConfig {
    fn default() -> Self {
        Self {
            sub_sorters: 4,
            sub_capacity: 256,
            per_tile_local: 2000,
            bit_groups: DEFAULT_BIT_GROUPS.to_vec(),
            global_key_bytes: 12 * 1024,
            global_entry_bytes: 4,
            cycles_per_output: 2,
            merge_overhead_per_batch: 16,
        }
    }
}

impl SorterConfig {
    pub fn global_overflow_entries(&self) -> usize {
        self.global_key_bytes / self.global_entry_bytes.max(1)
    }

    /// Keys selected per batch across all sub-sorters.
    pub fn batch_size(&self) -> usize {
        self.sub_sorters * self.sub_capacity
    }

    pub fn validate(&self) -> Result<(), SortError> {
        let bits: usize = self.bit_groups.iter().map(|&b| b as usize).sum();
        if bits != DEPTH_CODE_BITS {
            return Err(SortError::Config(format!("bit groups sum to {bits}, expected {DEPTH_CODE_BITS}")));
        }
        if self.sub_sorters == 0 || self.sub_capacity == 0 {
            return Err(SortError::Config("sub-sorter count and capacity must be nonzero".into()));
        }
        if self.global_entry_bytes == 0 {
            return Err(SortError::Config("overflow entry size must be nonzero".into()));
        }
        Ok(())
    }
}

/// Tile layout of an image.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TileGrid {
    pub tiles_x: u32,
    pub tiles_y: u32,
    pub tile_size: u32,
}

impl TileGrid {
    pub fn for_image(width: u32, height: u32, tile_size: u32) -> Self {
        assert!(tile_size > 0, "tile size must be nonzero");
        Self { tiles_x: width.div_ceil(tile_size), tiles_y: height.div_ceil(tile_size), tile_size }
    }

    pub fn tile_count(&self) -> usize {
        self.tiles_x as usize * self.tiles_y as usize
    }

    pub fn tile_id(&self, tx: u32, ty: u32) -> u32 {
        ty * self.tiles_x + tx
    }

    pub fn tile_coords(&self, id: u32) -> (u32, u32) {
        (id % self.tiles_x, id / self.tiles_x)
    }
}

/// Per-tile key lists, each in splat order.
#[derive(Debug, Clone, PartialEq)]
pub struct TileBins {
    pub grid: TileGrid,
    pub keys: Vec<Vec<SortKey>>,
}

impl TileBins {
    /// Keys per tile.
    pub fn counts(&self) -> Vec<u32> {
        self.keys.iter().map(|k| k.len() as u32).collect()
    }

    pub fn total_keys(&self) -> u64 {
        self.keys.iter().map(|k| k.len() as u64).sum()
    }
}

/// Emits one key per (splat, covered tile). `value` is the splat's position in `splats`.
pub fn bin_tiles(splats: &[Splat2D], grid: TileGrid) -> TileBins {
    let mut keys = vec![Vec::new(); grid.tile_count()];
    for (i, s) in splats.iter().enumerate() {
        let depth = DepthCode::saturating_from_f32(s.depth).expect("projected splats have positive depth");
        let r = s.tile_range;
        debug_assert!(r.x1 < grid.tiles_x && r.y1 < grid.tiles_y);
        for ty in r.y0..=r.y1 {
            for tx in r.x0..=r.x1 {
                let tile_id = grid.tile_id(tx, ty);
                keys[tile_id as usize].push(SortKey { tile_id, depth, value: i as u32 });
            }
        }
    }
    TileBins { grid, keys }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::preprocess::TileRect;

    fn splat(range: TileRect, depth: f32) -> Splat2D {
        Splat2D {
            source: 0,
            mean2d: [0.0; 2],
            depth,
            conic: [1.0, 0.0, 1.0],
            color: [1.0; 3],
            opacity: 1.0,
            radius: 1,
            tile_range: range,
        }
    }

    #[test]
    fn one_tile_one_key_and_rectangles() {
        let grid = TileGrid::for_image(64, 64, 16);
        let bins = bin_tiles(&[splat(TileRect { x0: 1, y0: 2, x1: 1, y1: 2 }, 1.0)], grid);
        assert_eq!(bins.total_keys(), 1);
        assert_eq!(bins.keys[grid.tile_id(1, 2) as usize][0].value, 0);

        let bins = bin_tiles(&[splat(TileRect { x0: 0, y0: 1, x1: 1, y1: 3 }, 1.0)], grid);
        assert_eq!(bins.total_keys(), 6);
    }

    #[test]
    fn full_hd_grid() {
        let g = TileGrid::for_image(1920, 1080, 16);
        assert_eq!((g.tiles_x, g.tiles_y, g.tile_count()), (120, 68, 8160));
    }

    #[test]
    fn depth_codes() {
        assert_eq!(depth_to_code(f16::from_f32(1.0)).unwrap().bits(), 0x3C00);
        assert!(matches!(depth_to_code(f16::from_f32(0.0)), Err(SortError::NonPositiveDepth(_))));
        assert!(matches!(depth_to_code(f16::from_f32(-2.0)), Err(SortError::NonPositiveDepth(_))));
        assert_eq!(depth_to_code(f16::INFINITY), Err(SortError::NonFiniteDepth));
        assert_eq!(depth_to_code(f16::NAN), Err(SortError::NonFiniteDepth));
        assert_eq!(DepthCode::saturating_from_f32(1e9).unwrap(), DepthCode::MAX);
        assert_eq!(DepthCode::saturating_from_f32(1e-12).unwrap().bits(), 1);
        assert!(DepthCode::saturating_from_f32(0.0).is_err());
    }

    #[test]
    fn config_validation() {
        assert!(SorterConfig::default().validate().is_ok());
        assert_eq!(SorterConfig::default().global_overflow_entries(), 3072);
        let bad = SorterConfig { bit_groups: vec![4, 4, 4, 4], ..Default::default() };
        assert!(bad.validate().is_err());
    }
}
