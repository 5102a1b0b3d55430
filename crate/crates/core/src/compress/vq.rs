//! k-means vector quantization.
//!
//! Costs are accumulated as fixed-point integers so totals are exact and
//! independent of summation order. The update step only moves a centroid
//! when that does not raise its cluster's cost, which keeps the total MSE
//! non-increasing from one iteration to the next.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum VqError {
    #[error("vector dimension must be nonzero")]
    ZeroDim,
    #[error("{len} values do not split into vectors of dimension {dim}")]
    DimMismatch { len: usize, dim: usize },
    #[error("no vectors to quantize")]
    Empty,
    #[error("codebook size must be nonzero")]
    ZeroK,
    #[error("non-finite value in the input")]
    NonFinite,
}

/// Fixed-point scale for squared distances.
const SCALE: f64 = (1u64 << 40) as f64;

#[derive(Debug, Clone, PartialEq)]
pub struct Codebook {
    dim: usize,
    centroids: Vec<f32>,
}

impl Codebook {
    pub fn new(dim: usize, centroids: Vec<f32>) -> Result<Self, VqError> {
        if dim == 0 {
            return Err(VqError::ZeroDim);
        }
        if !centroids.len().is_multiple_of(dim) {
            return Err(VqError::DimMismatch { len: centroids.len(), dim });
        }
        Ok(Self { dim, centroids })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.centroids.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.centroids.is_empty()
    }

    pub fn entry(&self, i: usize) -> &[f32] {
        &self.centroids[i * self.dim..(i + 1) * self.dim]
    }

    pub fn as_flat(&self) -> &[f32] {
        &self.centroids
    }

    /// Centroids equal to an earlier centroid.
    pub fn duplicates(&self) -> usize {
        let mut seen = std::collections::HashSet::new();
        (0..self.len())
            .filter(|&i| !seen.insert(self.entry(i).iter().map(|v| v.to_bits()).collect::<Vec<_>>()))
            .count()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VqReport {
    /// Mean squared error per component after the initial assignment and after each iteration.
    pub mse_history: Vec<f64>,
    pub iterations: usize,
    /// Set when more centroids were requested than there are vectors.
    pub k_exceeds_vectors: bool,
    pub duplicate_centroids: usize,
}

impl VqReport {
    pub fn final_mse(&self) -> f64 {
        self.mse_history.last().copied().unwrap_or(0.0)
    }

    pub fn is_monotone(&self) -> bool {
        self.mse_history.windows(2).all(|w| w[1] <= w[0])
    }
}

fn dist(a: &[f32], b: &[f32]) -> f64 {
    a.iter().zip(b).map(|(&x, &y)| (x as f64 - y as f64).powi(2)).sum()
}

fn fixed(d: f64) -> i128 {
    (d * SCALE).round() as i128
}

fn check(data: &[f32], dim: usize) -> Result<usize, VqError> {
    if dim == 0 {
        return Err(VqError::ZeroDim);
    }
    if !data.len().is_multiple_of(dim) {
        return Err(VqError::DimMismatch { len: data.len(), dim });
    }
    if data.is_empty() {
        return Err(VqError::Empty);
    }
    if data.iter().any(|v| !v.is_finite()) {
        return Err(VqError::NonFinite);
    }
    Ok(data.len() / dim)
}

/// Nearest centroid by squared distance, lowest index on ties.
fn nearest(v: &[f32], centroids: &[f32], dim: usize) -> (u32, f64) {
    let mut best = (0u32, f64::INFINITY);
    for (j, c) in centroids.chunks_exact(dim).enumerate() {
        let d = dist(v, c);
        if d < best.1 {
            best = (j as u32, d);
        }
    }
    best
}

/// Index of the nearest codebook entry for every vector.
pub fn vq_assign(data: &[f32], dim: usize, codebook: &Codebook) -> Result<Vec<u32>, VqError> {
    if data.is_empty() && dim > 0 {
        return Ok(Vec::new());
    }
    check(data, dim)?;
    if dim != codebook.dim {
        return Err(VqError::DimMismatch { len: codebook.dim, dim });
    }
    if codebook.is_empty() {
        return Err(VqError::ZeroK);
    }
    Ok(data.par_chunks_exact(dim).map(|v| nearest(v, &codebook.centroids, dim).0).collect())
}

/// Trains a `k`-entry codebook with farthest-point initialization from
/// `seed` and up to `iters` Lloyd iterations.
pub fn vq_train(data: &[f32], dim: usize, k: usize, iters: usize, seed: u64) -> Result<(Codebook, VqReport), VqError> {
    let m = check(data, dim)?;
    if k == 0 {
        return Err(VqError::ZeroK);
    }
    let vec_at = |i: usize| &data[i * dim..(i + 1) * dim];

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let first = rng.gen_range(0..m);
    let mut centroids = Vec::with_capacity(k * dim);
    centroids.extend_from_slice(vec_at(first));
    let mut min_d: Vec<f64> = (0..m).into_par_iter().map(|i| dist(vec_at(i), vec_at(first))).collect();
    for _ in 1..k {
        let (pick, _) = min_d.iter().enumerate().fold((0, -1.0), |best, (i, &d)| if d > best.1 { (i, d) } else { best });
        let c = vec_at(pick);
        centroids.extend_from_slice(c);
        min_d.par_iter_mut().enumerate().for_each(|(i, d)| *d = d.min(dist(vec_at(i), c)));
    }

    let assign_all = |centroids: &[f32]| -> Vec<(u32, i128)> {
        data.par_chunks_exact(dim)
            .map(|v| {
                let (j, d) = nearest(v, centroids, dim);
                (j, fixed(d))
            })
            .collect()
    };
    let mse = |a: &[(u32, i128)]| a.iter().map(|&(_, c)| c).sum::<i128>() as f64 / SCALE / (m * dim) as f64;

    let mut assignment = assign_all(&centroids);
    let mut history = vec![mse(&assignment)];
    let mut iterations = 0;
    for _ in 0..iters {
        iterations += 1;
        let mut sums = vec![0f64; k * dim];
        let mut counts = vec![0usize; k];
        let mut cost = vec![0i128; k];
        for (i, &(j, c)) in assignment.iter().enumerate() {
            let j = j as usize;
            counts[j] += 1;
            cost[j] += c;
            for (s, &v) in sums[j * dim..(j + 1) * dim].iter_mut().zip(vec_at(i)) {
                *s += v as f64;
            }
        }
        let mut candidates = centroids.clone();
        for j in 0..k {
            if counts[j] == 0 {
                continue;
            }
            for d in 0..dim {
                candidates[j * dim + d] = (sums[j * dim + d] / counts[j] as f64) as f32;
            }
        }
        let new_cost: Vec<i128> = assignment
            .par_iter()
            .enumerate()
            .map(|(i, &(j, _))| {
                let j = j as usize;
                (j, fixed(dist(vec_at(i), &candidates[j * dim..(j + 1) * dim])))
            })
            .collect::<Vec<_>>()
            .into_iter()
            .fold(vec![0i128; k], |mut acc, (j, c)| {
                acc[j] += c;
                acc
            });
        let mut moved = false;
        for j in 0..k {
            let (old, new) = (&centroids[j * dim..(j + 1) * dim], &candidates[j * dim..(j + 1) * dim]);
            if counts[j] > 0 && new_cost[j] <= cost[j] && old != new {
                moved = true;
            } else {
                candidates[j * dim..(j + 1) * dim].copy_from_slice(&centroids[j * dim..(j + 1) * dim]);
            }
        }
        centroids = candidates;
        let next = assign_all(&centroids);
        let changed = next.iter().zip(&assignment).any(|(a, b)| a.0 != b.0);
        assignment = next;
        history.push(mse(&assignment));
        if !moved && !changed {
            break;
        }
    }
    let book = Codebook { dim, centroids };
    let report = VqReport {
        mse_history: history,
        iterations,
        k_exceeds_vectors: k > m,
        duplicate_centroids: book.duplicates(),
    };
    Ok((book, report))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_centroid_per_distinct_vector() {
        let data: Vec<f32> = (0..30).map(|i| (i * i % 17) as f32 * 0.1).collect();
        let (book, report) = vq_train(&data, 3, 10, 5, 7).unwrap();
        assert_eq!(report.final_mse(), 0.0);
        assert_eq!(book.duplicates(), 0);
    }

    #[test]
    fn single_centroid_is_the_mean() {
        let data = [1.0f32, 2.0, 3.0, 4.0, 5.0, 9.0];
        let (book, _) = vq_train(&data, 2, 1, 10, 0).unwrap();
        assert!((book.entry(0)[0] - 3.0).abs() < 1e-6 && (book.entry(0)[1] - 5.0).abs() < 1e-6);
    }

    #[test]
    fn assign_rules() {
        let book = Codebook::new(1, (0..8).map(|i| i as f32 * 10.0).collect()).unwrap();
        assert_eq!(vq_assign(&[50.0], 1, &book).unwrap(), vec![5]);
        let book = Codebook::new(1, vec![9.0, 9.0, 0.0, 9.0, 9.0, 9.0, 9.0, 2.0]).unwrap();
        assert_eq!(vq_assign(&[1.0], 1, &book).unwrap(), vec![2]);
    }

    #[test]
    fn k_above_m_is_flagged() {
        let (book, report) = vq_train(&[0.0, 1.0], 1, 4, 3, 1).unwrap();
        assert!(report.k_exceeds_vectors);
        assert_eq!(book.len(), 4);
        assert_eq!(report.duplicate_centroids, 2);
        assert_eq!(report.final_mse(), 0.0);
    }

    #[test]
    fn errors() {
        assert_eq!(vq_train(&[1.0, 2.0, 3.0], 2, 1, 1, 0).unwrap_err(), VqError::DimMismatch { len: 3, dim: 2 });
        assert_eq!(vq_train(&[], 2, 1, 1, 0).unwrap_err(), VqError::Empty);
        assert_eq!(vq_train(&[1.0], 1, 0, 1, 0).unwrap_err(), VqError::ZeroK);
    }
}
