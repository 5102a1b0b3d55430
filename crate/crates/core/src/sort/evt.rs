//! Comparison-free max selection over an Element Vector Table.
//!
//! Each selection walks the key bits from the most significant down. At
//! every bit, the candidates that have a 1 there survive if any exist;
//! otherwise all candidates carry over. Whatever is left holds the largest
//! value, possibly several times, and `Fo & (~Fo + 1)` isolates the lowest
//! set bit so the smallest element index wins the tie.

use super::{SortError, DEPTH_CODE_BITS};

/// Bitmask of not-yet-emitted elements; bit `i` is element `i`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EvtState {
    words: Vec<u64>,
    len: usize,
    emitted: usize,
}

impl EvtState {
    /// All `n` elements pending.
    pub fn full(n: usize) -> Self {
        let mut words = vec![u64::MAX; n.div_ceil(64)];
        if !n.is_multiple_of(64) {
            *words.last_mut().unwrap() = (1u64 << (n % 64)) - 1;
        }
        Self { words, len: n, emitted: 0 }
    }

    /// From an explicit mask; bit `i` of the `u128` is element `i`.
    pub fn from_mask(mask: u128, n: usize) -> Self {
        assert!(n <= 128);
        let masked = if n == 128 { mask } else { mask & ((1u128 << n) - 1) };
        let words = (0..n.div_ceil(64)).map(|w| (masked >> (64 * w)) as u64).collect();
        let emitted = n - masked.count_ones() as usize;
        Self { words, len: n, emitted }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn pending(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn emitted(&self) -> usize {
        self.emitted
    }

    pub fn is_exhausted(&self) -> bool {
        self.words.iter().all(|&w| w == 0)
    }

    pub fn is_set(&self, i: usize) -> bool {
        self.words[i / 64] >> (i % 64) & 1 == 1
    }

    /// Low 128 bits of the mask.
    pub fn mask(&self) -> u128 {
        self.words.iter().take(2).enumerate().fold(0, |acc, (i, &w)| acc | (w as u128) << (64 * i))
    }

    fn clear(&mut self, i: usize) {
        self.words[i / 64] &= !(1u64 << (i % 64));
        self.emitted += 1;
    }

    /// Marks an emitted slot pending again, for a slot refilled with a new element.
    pub(crate) fn restore(&mut self, i: usize) {
        debug_assert!(!self.is_set(i));
        self.words[i / 64] |= 1u64 << (i % 64);
        self.emitted -= 1;
    }
}

/// Bit-sliced copy of a set of keys: `columns[b]` holds bit `b` of every element.
#[derive(Debug, Clone)]
pub(crate) struct BitColumns {
    columns: [Vec<u64>; DEPTH_CODE_BITS],
}

impl BitColumns {
    pub(crate) fn new(codes: &[u16]) -> Self {
        let words = codes.len().div_ceil(64);
        let mut columns: [Vec<u64>; DEPTH_CODE_BITS] = std::array::from_fn(|_| vec![0u64; words]);
        for (i, &c) in codes.iter().enumerate() {
            for (b, col) in columns.iter_mut().enumerate() {
                col[i / 64] |= (((c >> b) & 1) as u64) << (i % 64);
            }
        }
        Self { columns }
    }

    /// Overwrites element `i` with `code`.
    pub(crate) fn set(&mut self, i: usize, code: u16) {
        for (b, col) in self.columns.iter_mut().enumerate() {
            let bit = 1u64 << (i % 64);
            if (code >> b) & 1 == 1 {
                col[i / 64] |= bit;
            } else {
                col[i / 64] &= !bit;
            }
        }
    }
}

/// Selects the largest pending element, clears it from `evt`, and returns its index.
/// `scratch` is reusable working storage.
pub(crate) fn select_max(
    cols: &BitColumns,
    evt: &mut EvtState,
    bit_groups: &[u8],
    scratch: &mut (Vec<u64>, Vec<u64>),
) -> Result<usize, SortError> {
    if evt.is_exhausted() {
        return Err(SortError::EmptyEvt);
    }
    let (fo, filtered) = scratch;
    fo.clear();
    fo.extend_from_slice(&evt.words);
    filtered.clear();
    filtered.resize(fo.len(), 0);
    let mut bit = DEPTH_CODE_BITS;
    for &group in bit_groups {
        // One cascaded block per bit of the group.
        for _ in 0..group {
            bit -= 1;
            let col = &cols.columns[bit];
            let mut any = 0u64;
            for ((s, &f), &c) in filtered.iter_mut().zip(fo.iter()).zip(col) {
                *s = f & c;
                any |= *s;
            }
            if any != 0 {
                std::mem::swap(fo, filtered);
            }
        }
    }
    let (w, word) = fo.iter().enumerate().find(|(_, &w)| w != 0).expect("pending element survives filtering");
    let lowest = word & (!word).wrapping_add(1);
    let index = w * 64 + lowest.trailing_zeros() as usize;
    evt.clear(index);
    Ok(index)
}

/// One selection step over raw 15-bit codes with the default (3, 4, 4, 4) grouping.
pub fn evt_select_max(codes: &[u16], evt: &mut EvtState) -> Result<usize, SortError> {
    if codes.len() != evt.len() {
        return Err(SortError::LengthMismatch { codes: codes.len(), evt: evt.len() });
    }
    select_max(&BitColumns::new(codes), evt, &super::DEFAULT_BIT_GROUPS, &mut Default::default())
}
