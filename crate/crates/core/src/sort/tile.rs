//! Per-tile sorting on the EVT selector with the sub-sorter and buffer model.

use serde::{Deserialize, Serialize};

use super::evt::{select_max, BitColumns, EvtState};
use super::{SortKey, SorterConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SortOrder {
    /// Ascending depth, the order blending consumes.
    #[default]
    FrontToBack,
    BackToFront,
}

/// Where a tile's keys land in the sorter's buffers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Occupancy {
    pub keys: u64,
    /// Keys held in the sub-sorters' local buffers.
    pub local: u64,
    /// Keys spilled to the shared overflow buffer.
    pub global: u64,
    /// Keys beyond both capacities. Still sorted, but flagged.
    pub overflow_beyond_capacity: u64,
    /// Full sub-sorter batches needed.
    pub batches: u64,
}

impl Occupancy {
    pub fn for_count(n: usize, cfg: &SorterConfig) -> Self {
        let local = n.min(cfg.per_tile_local);
        let global = (n - local).min(cfg.global_overflow_entries());
        Self {
            keys: n as u64,
            local: local as u64,
            global: global as u64,
            overflow_beyond_capacity: (n - local - global) as u64,
            batches: n.div_ceil(cfg.batch_size()) as u64,
        }
    }

    pub fn uses_global(&self) -> bool {
        self.global > 0
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TileSort {
    /// Key values (splat indices) in blending order.
    pub values: Vec<u32>,
    pub occupancy: Occupancy,
}

/// Sorts one tile's keys. Keys are cut into sub-sorter-sized runs in
/// arrival order, each run is drained by repeated max selection, and the
/// runs are merged by a last selection pass over their heads. Ties keep
/// arrival order: within a run the lowest element index wins, across runs
/// the lowest run index does.
pub fn sort_tile(keys: &[SortKey], cfg: &SorterConfig, order: SortOrder) -> TileSort {
    debug_assert!(keys.windows(2).all(|w| w[0].tile_id == w[1].tile_id), "keys span several tiles");
    let occupancy = Occupancy::for_count(keys.len(), cfg);
    let rank = |k: &SortKey| match order {
        SortOrder::FrontToBack => k.depth.front_to_back_key(),
        SortOrder::BackToFront => k.depth.bits(),
    };
    let codes: Vec<u16> = keys.iter().map(rank).collect();
    let width = cfg.sub_capacity.max(1);
    let mut scratch = Default::default();
    let runs: Vec<Vec<usize>> = codes
        .chunks(width)
        .enumerate()
        .map(|(r, chunk)| {
            let cols = BitColumns::new(chunk);
            let mut evt = EvtState::full(chunk.len());
            (0..chunk.len())
                .map(|_| r * width + select_max(&cols, &mut evt, &cfg.bit_groups, &mut scratch).expect("pending"))
                .collect()
        })
        .collect();

    let values = if runs.len() <= 1 {
        runs.into_iter().flatten().map(|i| keys[i].value).collect()
    } else {
        let mut heads = vec![0usize; runs.len()];
        let head_codes: Vec<u16> = runs.iter().map(|run| codes[run[0]]).collect();
        let mut cols = BitColumns::new(&head_codes);
        let mut evt = EvtState::full(runs.len());
        let mut out = Vec::with_capacity(keys.len());
        while !evt.is_exhausted() {
            let r = select_max(&cols, &mut evt, &cfg.bit_groups, &mut scratch).expect("pending");
            out.push(keys[runs[r][heads[r]]].value);
            heads[r] += 1;
            if let Some(&next) = runs[r].get(heads[r]) {
                cols.set(r, codes[next]);
                evt.restore(r);
            }
        }
        out
    };
    TileSort { values, occupancy }
}

/// Modeled sorter cycles for one tile: one output every
/// `cycles_per_output` cycles, plus a merge charge per batch when the tile
/// needs more than one batch.
pub fn sorter_cycles(n_keys: usize, cfg: &SorterConfig) -> u64 {
    let batches = n_keys.div_ceil(cfg.batch_size()) as u64;
    let merge = if batches > 1 { batches * cfg.merge_overhead_per_batch } else { 0 };
    cfg.cycles_per_output * n_keys as u64 + merge
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sort::DepthCode;

    fn keys(codes: &[u16]) -> Vec<SortKey> {
        codes
            .iter()
            .enumerate()
            .map(|(i, &c)| SortKey { tile_id: 0, depth: DepthCode::from_bits(c).unwrap(), value: i as u32 })
            .collect()
    }

    #[test]
    fn single_key() {
        let s = sort_tile(&keys(&[100]), &SorterConfig::default(), SortOrder::FrontToBack);
        assert_eq!(s.values, vec![0]);
        assert_eq!(s.occupancy.global, 0);
        assert_eq!(s.occupancy.overflow_beyond_capacity, 0);
    }

    #[test]
    fn ascending_with_stable_ties_across_runs() {
        let codes: Vec<u16> = (0..1500u32).map(|i| (1 + (i * 7919) % 97) as u16).collect();
        let ks = keys(&codes);
        let got = sort_tile(&ks, &SorterConfig::default(), SortOrder::FrontToBack).values;
        let mut expect: Vec<u32> = (0..ks.len() as u32).collect();
        expect.sort_by_key(|&i| codes[i as usize]);
        assert_eq!(got, expect);

        let back = sort_tile(&ks, &SorterConfig::default(), SortOrder::BackToFront).values;
        let mut expect: Vec<u32> = (0..ks.len() as u32).collect();
        expect.sort_by_key(|&i| std::cmp::Reverse(codes[i as usize]));
        assert_eq!(back, expect);
    }

    #[test]
    fn buffer_boundaries() {
        let cfg = SorterConfig::default();
        let at = Occupancy::for_count(2000, &cfg);
        assert_eq!((at.local, at.global), (2000, 0));
        assert!(!at.uses_global());
        let over = Occupancy::for_count(2001, &cfg);
        assert_eq!((over.local, over.global), (2000, 1));
        let spill = Occupancy::for_count(2000 + 3072 + 5, &cfg);
        assert_eq!((spill.global, spill.overflow_beyond_capacity), (3072, 5));
    }

    #[test]
    fn cycle_model() {
        let cfg = SorterConfig::default();
        assert_eq!(sorter_cycles(0, &cfg), 0);
        assert_eq!(sorter_cycles(256, &cfg), 512);
        assert_eq!(sorter_cycles(1024, &cfg), 2048);
        assert_eq!(sorter_cycles(1025, &cfg), 2050 + 2 * cfg.merge_overhead_per_batch);
    }
}
