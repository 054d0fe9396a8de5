//! Seeded k-means for the IVF coarse quantizer.
//!
//! k-means++ initialization followed by a fixed number of Lloyd steps — no
//! convergence early-exit, so the iteration count never depends on the data
//! arriving in a different order. Every random draw comes from the caller's
//! seed; empty clusters are re-seeded deterministically from the current
//! farthest point.

use super::l2_sq;
use crate::core::EmbeddingMatrix;
use crate::parallel::par_map_indexed;
use crate::rng::SplitMix64;
use crate::{Error, Result};

/// nlist x d cluster centroids.
#[derive(Debug, Clone, PartialEq)]
pub struct CentroidSet {
    nlist: usize,
    dims: usize,
    data: Vec<f32>,
}

impl CentroidSet {
    pub fn new(nlist: usize, dims: usize, data: Vec<f32>) -> Result<Self> {
        if data.len() != nlist * dims {
            return Err(Error::ShapeMismatch(format!(
                "centroid data length {} != nlist {} x dims {}",
                data.len(),
                nlist,
                dims
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("centroid set".into()));
        }
        Ok(Self { nlist, dims, data })
    }

    pub fn nlist(&self) -> usize {
        self.nlist
    }

    pub fn dims(&self) -> usize {
        self.dims
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.data[i * self.dims..(i + 1) * self.dims]
    }

    /// Index of the nearest centroid (squared L2), ties to the lowest index.
    pub fn nearest(&self, point: &[f32]) -> usize {
        let mut best = 0usize;
        let mut best_d = l2_sq(point, self.row(0));
        for c in 1..self.nlist {
            let d = l2_sq(point, self.row(c));
            if d < best_d {
                best_d = d;
                best = c;
            }
        }
        best
    }
}

/// Seeded k-means: k-means++ init, `iters` Lloyd steps, deterministic for a
/// given (data, nlist, iters, seed).
pub fn kmeans(data: &EmbeddingMatrix, nlist: usize, iters: usize, seed: u64) -> Result<CentroidSet> {
    let rows = data.rows();
    let dims = data.dims();
    if nlist == 0 {
        return Err(Error::InvalidArgument("nlist must be >= 1".into()));
    }
    if nlist > rows {
        return Err(Error::InvalidArgument(format!(
            "nlist {nlist} exceeds {rows} data points"
        )));
    }
    let mut rng = SplitMix64::new(seed);
    let mut centroids = init_plus_plus(data, nlist, &mut rng);

    for _ in 0..iters {
        let cset = CentroidSet::new(nlist, dims, centroids.clone())?;
        let assignment: Vec<u32> = par_map_indexed(rows, |i| cset.nearest(data.row(i)) as u32);

        // Accumulate in f64 so the update is insensitive to magnitude, then
        // store back as f32. Sequential over points: fixed summation order.
        let mut sums = vec![0.0f64; nlist * dims];
        let mut counts = vec![0usize; nlist];
        for (i, &a) in assignment.iter().enumerate() {
            let row = data.row(i);
            let acc = &mut sums[a as usize * dims..(a as usize + 1) * dims];
            for (s, &v) in acc.iter_mut().zip(row) {
                *s += v as f64;
            }
            counts[a as usize] += 1;
        }
        for c in 0..nlist {
            if counts[c] > 0 {
                for d in 0..dims {
                    centroids[c * dims + d] = (sums[c * dims + d] / counts[c] as f64) as f32;
                }
            }
        }

        // Re-seed empty clusters from the farthest point. Assignment of the
        // stolen point moves to the empty cluster so multiple empties pick
        // distinct points.
        let empties: Vec<usize> = (0..nlist).filter(|&c| counts[c] == 0).collect();
        if !empties.is_empty() {
            let cset = CentroidSet::new(nlist, dims, centroids.clone())?;
            let mut assignment = assignment;
            let mut dists: Vec<f32> = (0..rows)
                .map(|i| l2_sq(data.row(i), cset.row(assignment[i] as usize)))
                .collect();
            for c in empties {
                let far = (0..rows)
                    .max_by(|&a, &b| dists[a].partial_cmp(&dists[b]).unwrap().then(b.cmp(&a)))
                    .unwrap();
                centroids[c * dims..(c + 1) * dims].copy_from_slice(data.row(far));
                assignment[far] = c as u32;
                dists[far] = 0.0;
            }
        }
    }

    CentroidSet::new(nlist, dims, centroids)
}

/// k-means++ seeding: first center uniform, each next center sampled with
/// probability proportional to squared distance from the chosen set.
fn init_plus_plus(data: &EmbeddingMatrix, nlist: usize, rng: &mut SplitMix64) -> Vec<f32> {
    let rows = data.rows();
    let dims = data.dims();
    let mut centroids = Vec::with_capacity(nlist * dims);
    let mut chosen = vec![false; rows];

    let first = rng.next_range(rows as u64) as usize;
    centroids.extend_from_slice(data.row(first));
    chosen[first] = true;

    let mut d2: Vec<f64> = (0..rows)
        .map(|i| l2_sq(data.row(i), data.row(first)) as f64)
        .collect();

    for _ in 1..nlist {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let mut r = rng.next_f64() * total;
            let mut pick = rows - 1;
            for (i, &w) in d2.iter().enumerate() {
                if r < w {
                    pick = i;
                    break;
                }
                r -= w;
            }
            // The prefix walk can land on a zero-weight (already chosen)
            // point through accumulated rounding; step to the next eligible.
            if chosen[pick] {
                (0..rows).find(|&i| !chosen[i]).unwrap()
            } else {
                pick
            }
        } else {
            // All remaining mass is zero (duplicate points); take the first
            // unchosen point.
            (0..rows).find(|&i| !chosen[i]).unwrap()
        };
        chosen[pick] = true;
        let row = data.row(pick);
        centroids.extend_from_slice(row);
        for (i, d) in d2.iter_mut().enumerate() {
            let nd = l2_sq(data.row(i), row) as f64;
            if nd < *d {
                *d = nd;
            }
        }
    }
    centroids
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::core::PrecisionTag;

    fn matrix(rows: usize, dims: usize, seed: u64) -> EmbeddingMatrix {
        let mut rng = SplitMix64::new(seed);
        let data: Vec<f32> = (0..rows * dims).map(|_| rng.next_gaussian() as f32).collect();
        EmbeddingMatrix::new(rows, dims, data, PrecisionTag::FP32).unwrap()
    }

    #[test]
    fn nlist_equals_rows_gives_zero_cost() {
        let m = matrix(12, 4, 3);
        let c = kmeans(&m, 12, 5, 42).unwrap();
        // every point must be distance zero from some centroid
        for i in 0..m.rows() {
            let d = l2_sq(m.row(i), c.row(c.nearest(m.row(i))));
            assert_eq!(d, 0.0, "point {i}");
        }
    }

    #[test]
    fn single_cluster_is_coordinate_mean() {
        let m = matrix(50, 3, 9);
        let c = kmeans(&m, 1, 1, 42).unwrap();
        for d in 0..3 {
            let mean: f64 =
                (0..50).map(|i| m.row(i)[d] as f64).sum::<f64>() / 50.0;
            assert!((c.row(0)[d] as f64 - mean).abs() < 1e-6);
        }
    }

    #[test]
    fn same_seed_bit_identical() {
        let m = matrix(200, 8, 5);
        let a = kmeans(&m, 10, 20, 42).unwrap();
        let b = kmeans(&m, 10, 20, 42).unwrap();
        assert_eq!(a.data(), b.data());
    }

    #[test]
    fn different_seeds_usually_differ() {
        let m = matrix(200, 8, 5);
        let a = kmeans(&m, 10, 20, 42).unwrap();
        let b = kmeans(&m, 10, 20, 43).unwrap();
        assert_ne!(a.data(), b.data());
    }

    #[test]
    fn rejects_nlist_above_rows() {
        let m = matrix(5, 2, 1);
        assert!(kmeans(&m, 6, 3, 0).is_err());
    }

    #[test]
    fn duplicate_points_handled() {
        // 10 copies of the same point: k-means++ hits the zero-mass path.
        let data = vec![1.0f32; 20];
        let m = EmbeddingMatrix::new(10, 2, data, PrecisionTag::FP32).unwrap();
        let c = kmeans(&m, 3, 4, 7).unwrap();
        assert_eq!(c.nlist(), 3);
        for v in c.data() {
            assert!(v.is_finite());
        }
    }
}
