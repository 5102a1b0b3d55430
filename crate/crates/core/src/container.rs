//! The compressed model and its `SPLC` container.
//!
//! Layout (all little-endian):
//!
//! | bytes            | content                                                     |
//! |------------------|-------------------------------------------------------------|
//! | 24               | header: `SPLC`, version u16, sh_degree u8, dc bits u8, count u32, K_dc u32, K_sh u32, sh bits u8, 3 reserved |
//! | 6 · count        | positions, 3 × f16                                          |
//! | 16 · count       | geometry, 8 × f16: log-scale ×3, rotation ×4, opacity (post-sigmoid) |
//! | 6 · K_dc         | DC codebook, 3 × f16 per entry                              |
//! | 2 · D_sh · K_sh  | SH codebook, `D_sh = 3·(B−1)` f16 per entry, basis-major    |
//! | r · count        | packed indices, `r = ceil((dc bits + sh bits) / 8)`         |
//!
//! Index widths are `ceil(log2 K)`; the DC index occupies the low bits of
//! each record.

use std::path::Path;

use half::f16;
use thiserror::Error;

use crate::scene::sh_basis_count;

pub const MAGIC: &[u8; 4] = b"SPLC";
pub const VERSION: u16 = 1;
pub const HEADER_BYTES: usize = 24;

#[derive(Debug, Error)]
pub enum ContainerError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("bad magic: not an SPLC container")]
    BadMagic,
    #[error("unsupported container version {0}")]
    UnsupportedVersion(u16),
    #[error("truncated container: need {needed} bytes, found {found}")]
    Truncated { needed: usize, found: usize },
    #[error("{which} index out of range: {index} >= codebook size {size}")]
    IndexOutOfRange { which: &'static str, index: u32, size: usize },
    #[error("invalid container: {0}")]
    Invalid(String),
}

/// Bits needed to address `k` codebook entries.
pub fn index_bits(k: usize) -> u8 {
    if k <= 1 {
        0
    } else {
        (usize::BITS - (k - 1).leading_zeros()) as u8
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompressedModel {
    pub sh_degree: u8,
    pub positions: Vec<[f16; 3]>,
    /// `[log_scale ×3, rotation (w,x,y,z), opacity]`.
    pub geometry: Vec<[f16; 8]>,
    pub dc_codebook: Vec<[f16; 3]>,
    /// Flat `K_sh × sh_dim()` matrix.
    pub sh_codebook: Vec<f16>,
    pub dc_index: Vec<u32>,
    /// Empty when `sh_degree == 0`.
    pub sh_index: Vec<u32>,
}

impl CompressedModel {
    pub fn count(&self) -> usize {
        self.positions.len()
    }

    /// Width of one SH codebook entry, `3·(B−1)`.
    pub fn sh_dim(&self) -> usize {
        3 * (sh_basis_count(self.sh_degree) - 1)
    }

    pub fn k_dc(&self) -> usize {
        self.dc_codebook.len()
    }

    pub fn k_sh(&self) -> usize {
        match self.sh_dim() {
            0 => 0,
            d => self.sh_codebook.len() / d,
        }
    }

    pub fn record_bytes(&self) -> usize {
        (index_bits(self.k_dc()) as usize + index_bits(self.k_sh()) as usize).div_ceil(8)
    }

    pub fn sh_entry(&self, i: usize) -> &[f16] {
        let d = self.sh_dim();
        &self.sh_codebook[i * d..(i + 1) * d]
    }

    /// Exact size of the encoded container.
    pub fn encoded_len(&self) -> usize {
        HEADER_BYTES
            + self.count() * (6 + 16 + self.record_bytes())
            + self.k_dc() * 6
            + self.sh_codebook.len() * 2
    }

    pub fn validate(&self) -> Result<(), ContainerError> {
        let n = self.count();
        if self.sh_degree > 3 {
            return Err(ContainerError::Invalid(format!("sh degree {}", self.sh_degree)));
        }
        if self.geometry.len() != n || self.dc_index.len() != n {
            return Err(ContainerError::Invalid("per-Gaussian arrays disagree on count".into()));
        }
        let d = self.sh_dim();
        if d == 0 {
            if !self.sh_index.is_empty() || !self.sh_codebook.is_empty() {
                return Err(ContainerError::Invalid("degree-0 model carries an SH codebook".into()));
            }
        } else {
            if self.sh_index.len() != n {
                return Err(ContainerError::Invalid("sh index count disagrees".into()));
            }
            if !self.sh_codebook.len().is_multiple_of(d) {
                return Err(ContainerError::Invalid("ragged SH codebook".into()));
            }
        }
        if n > 0 && self.k_dc() == 0 {
            return Err(ContainerError::Invalid("empty DC codebook".into()));
        }
        if n > 0 && d > 0 && self.k_sh() == 0 {
            return Err(ContainerError::Invalid("empty SH codebook".into()));
        }
        check_indices("dc", &self.dc_index, self.k_dc())?;
        check_indices("sh", &self.sh_index, self.k_sh())?;
        Ok(())
    }

    pub fn encode(&self) -> Result<Vec<u8>, ContainerError> {
        self.validate()?;
        let mut out = Vec::with_capacity(self.encoded_len());
        let dc_bits = index_bits(self.k_dc());
        let sh_bits = index_bits(self.k_sh());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.push(self.sh_degree);
        out.push(dc_bits);
        out.extend_from_slice(&(self.count() as u32).to_le_bytes());
        out.extend_from_slice(&(self.k_dc() as u32).to_le_bytes());
        out.extend_from_slice(&(self.k_sh() as u32).to_le_bytes());
        out.push(sh_bits);
        out.extend_from_slice(&[0; 3]);
        debug_assert_eq!(out.len(), HEADER_BYTES);

        let mut put = |v: f16| out.extend_from_slice(&v.to_bits().to_le_bytes());
        self.positions.iter().flatten().for_each(|&v| put(v));
        self.geometry.iter().flatten().for_each(|&v| put(v));
        self.dc_codebook.iter().flatten().for_each(|&v| put(v));
        self.sh_codebook.iter().for_each(|&v| put(v));

        let rb = self.record_bytes();
        for i in 0..self.count() {
            let sh = self.sh_index.get(i).copied().unwrap_or(0) as u64;
            let packed = self.dc_index[i] as u64 | (sh << dc_bits);
            out.extend_from_slice(&packed.to_le_bytes()[..rb]);
        }
        debug_assert_eq!(out.len(), self.encoded_len());
        Ok(out)
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, ContainerError> {
        if bytes.len() < 4 || &bytes[..4] != MAGIC {
            return Err(ContainerError::BadMagic);
        }
        need(bytes, HEADER_BYTES)?;
        let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap()) as usize;
        let version = u16::from_le_bytes([bytes[4], bytes[5]]);
        if version != VERSION {
            return Err(ContainerError::UnsupportedVersion(version));
        }
        let sh_degree = bytes[6];
        if sh_degree > 3 {
            return Err(ContainerError::Invalid(format!("sh degree {sh_degree}")));
        }
        let dc_bits = bytes[7];
        let count = u32_at(8);
        let k_dc = u32_at(12);
        let k_sh = u32_at(16);
        let sh_bits = bytes[20];
        if dc_bits != index_bits(k_dc) || sh_bits != index_bits(k_sh) {
            return Err(ContainerError::Invalid("index widths disagree with codebook sizes".into()));
        }
        let sh_dim = 3 * (sh_basis_count(sh_degree) - 1);
        if sh_dim == 0 && k_sh != 0 {
            return Err(ContainerError::Invalid("degree-0 model carries an SH codebook".into()));
        }
        let rb = (dc_bits as usize + sh_bits as usize).div_ceil(8);
        let total = HEADER_BYTES + count * (22 + rb) + k_dc * 6 + k_sh * sh_dim * 2;
        need(bytes, total)?;
        if bytes.len() > total {
            return Err(ContainerError::Invalid(format!("{} trailing bytes", bytes.len() - total)));
        }

        let mut halves = bytes[HEADER_BYTES..]
            .chunks_exact(2)
            .map(|c| f16::from_bits(u16::from_le_bytes([c[0], c[1]])));
        let mut take = |n: usize| -> Vec<f16> { halves.by_ref().take(n).collect() };
        let positions = take(3 * count).chunks_exact(3).map(|c| [c[0], c[1], c[2]]).collect();
        let geometry = take(8 * count).chunks_exact(8).map(|c| c.try_into().unwrap()).collect();
        let dc_codebook = take(3 * k_dc).chunks_exact(3).map(|c| [c[0], c[1], c[2]]).collect();
        let sh_codebook = take(sh_dim * k_sh);

        let idx_start = total - count * rb;
        let mut dc_index = Vec::with_capacity(count);
        let mut sh_index = Vec::with_capacity(if sh_dim > 0 { count } else { 0 });
        for rec in bytes[idx_start..total].chunks_exact(rb.max(1)).take(if rb == 0 { 0 } else { count }) {
            let mut buf = [0u8; 8];
            buf[..rb].copy_from_slice(rec);
            let packed = u64::from_le_bytes(buf);
            dc_index.push((packed & ((1u64 << dc_bits) - 1)) as u32);
            if sh_dim > 0 {
                sh_index.push(((packed >> dc_bits) & ((1u64 << sh_bits) - 1)) as u32);
            }
        }
        if rb == 0 {
            dc_index.resize(count, 0);
            if sh_dim > 0 {
                sh_index.resize(count, 0);
            }
        }

        let model = Self { sh_degree, positions, geometry, dc_codebook, sh_codebook, dc_index, sh_index };
        check_indices("dc", &model.dc_index, k_dc)?;
        check_indices("sh", &model.sh_index, k_sh)?;
        model.validate()?;
        Ok(model)
    }
}

fn need(bytes: &[u8], needed: usize) -> Result<(), ContainerError> {
    if bytes.len() < needed {
        Err(ContainerError::Truncated { needed, found: bytes.len() })
    } else {
        Ok(())
    }
}

fn check_indices(which: &'static str, idx: &[u32], size: usize) -> Result<(), ContainerError> {
    match idx.iter().find(|&&i| i as usize >= size) {
        Some(&index) => Err(ContainerError::IndexOutOfRange { which, index, size }),
        None => Ok(()),
    }
}

pub fn write_compressed(model: &CompressedModel, path: impl AsRef<Path>) -> Result<(), ContainerError> {
    std::fs::write(path, model.encode()?)?;
    Ok(())
}

pub fn read_compressed(path: impl AsRef<Path>) -> Result<CompressedModel, ContainerError> {
    CompressedModel::decode(&std::fs::read(path)?)
}
