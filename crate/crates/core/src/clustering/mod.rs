//! Partitioning hidden activations into discrete states.

mod kmeans;
mod quantize;
mod silhouette;

use std::collections::HashMap;

pub use kmeans::{kmeans, KMEANS_MAX_ITERS};
pub use quantize::{binary_code, quantize_binary};
pub use silhouette::{silhouette, silhouette_sampled, SILHOUETTE_CAP};

use crate::error::{Error, Result};

/// Borrowed row-major matrix of points.
#[derive(Clone, Copy, Debug)]
pub struct Points<'a> {
    data: &'a [f64],
    dim: usize,
}

impl<'a> Points<'a> {
    pub fn new(data: &'a [f64], dim: usize) -> Result<Self> {
        if dim == 0 || !data.len().is_multiple_of(dim) {
            return Err(Error::InvalidConfig(format!(
                "{} values do not form rows of dimension {dim}",
                data.len()
            )));
        }
        Ok(Self { data, dim })
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, i: usize) -> &'a [f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn iter(&self) -> impl Iterator<Item = &'a [f64]> + 'a {
        self.data.chunks_exact(self.dim)
    }
}

/// A partition of points into `k` clusters with dense ids `0..k`.
#[derive(Clone, Debug, PartialEq)]
pub struct Clustering {
    pub k: usize,
    pub centroids: Vec<Vec<f64>>,
    /// Cluster id of every input point.
    pub assignment: Vec<usize>,
    /// Inertia after each Lloyd iteration (empty for quantization).
    pub inertia_history: Vec<f64>,
    /// Ids (before compaction) of clusters that ended up empty and were removed.
    pub removed_empty: Vec<usize>,
}

impl Clustering {
    /// Index of the centroid nearest to `x`; ties go to the lowest id.
    pub fn nearest(&self, x: &[f64]) -> usize {
        nearest(&self.centroids, x).0
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &c in &self.assignment {
            sizes[c] += 1;
        }
        sizes
    }

    /// Sum of squared distances from each point to its centroid.
    pub fn inertia(&self, points: Points<'_>) -> f64 {
        points
            .iter()
            .zip(&self.assignment)
            .map(|(p, &c)| sq_dist(p, &self.centroids[c]))
            .sum()
    }

    /// Drops empty clusters and renumbers the rest densely, recording which ids went away.
    pub(crate) fn compact(mut self) -> Self {
        let sizes = self.sizes();
        if sizes.iter().all(|&s| s > 0) {
            return self;
        }
        let mut rename = vec![usize::MAX; self.k];
        let mut centroids = Vec::new();
        for (old, &size) in sizes.iter().enumerate() {
            if size > 0 {
                rename[old] = centroids.len();
                centroids.push(std::mem::take(&mut self.centroids[old]));
            } else {
                self.removed_empty.push(old);
            }
        }
        for c in &mut self.assignment {
            *c = rename[*c];
        }
        self.k = centroids.len();
        self.centroids = centroids;
        self
    }
}

#[inline]
pub(crate) fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Nearest centroid and its squared distance; ties resolve to the lowest index.
#[inline]
pub(crate) fn nearest(centroids: &[Vec<f64>], x: &[f64]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (c, centroid) in centroids.iter().enumerate() {
        let d = sq_dist(x, centroid);
        if d < best.1 {
            best = (c, d);
        }
    }
    best
}

/// Exact duplicates collapsed: distinct rows, their multiplicities, and the
/// distinct-row index of every original point. Distinct rows keep the order
/// of their first occurrence.
pub(crate) struct Deduped {
    pub rows: Vec<f64>,
    pub weights: Vec<f64>,
    pub index_of: Vec<usize>,
}

pub(crate) fn dedupe(points: Points<'_>) -> Deduped {
    let mut seen: HashMap<Vec<u64>, usize> = HashMap::with_capacity(points.len() / 4);
    let mut rows = Vec::new();
    let mut weights: Vec<f64> = Vec::new();
    let mut index_of = Vec::with_capacity(points.len());
    for p in points.iter() {
        let key: Vec<u64> = p.iter().map(|v| (v + 0.0).to_bits()).collect();
        let id = *seen.entry(key).or_insert_with(|| {
            rows.extend_from_slice(p);
            weights.push(0.0);
            weights.len() - 1
        });
        weights[id] += 1.0;
        index_of.push(id);
    }
    Deduped {
        rows,
        weights,
        index_of,
    }
}
