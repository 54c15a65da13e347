use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{dedupe, Clustering, Points};
use crate::error::{Error, Result};

/// Points beyond this count are subsampled before scoring.
pub const SILHOUETTE_CAP: usize = 5_000;

/// Mean silhouette coefficient with the default subsample cap and seed 0.
pub fn silhouette(points: Points<'_>, clustering: &Clustering) -> Result<f64> {
    silhouette_sampled(points, clustering, SILHOUETTE_CAP, 0)
}

/// Mean over points of `(b - a) / max(a, b)`, where `a` is the mean Euclidean
/// distance to the other members of the point's cluster and `b` the smallest
/// mean distance to the members of another cluster. Points in singleton
/// clusters score 0. When there are more than `cap` points a seeded uniform
/// subsample of `cap` points is scored instead.
pub fn silhouette_sampled(
    points: Points<'_>,
    clustering: &Clustering,
    cap: usize,
    seed: u64,
) -> Result<f64> {
    if clustering.k < 2 {
        return Err(Error::NeedTwoClusters { k: clustering.k });
    }
    if points.len() != clustering.assignment.len() {
        return Err(Error::InvalidConfig(format!(
            "{} points but {} assignments",
            points.len(),
            clustering.assignment.len()
        )));
    }
    let dim = points.dim();
    let chosen: Vec<usize> = if points.len() > cap {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut idx = sample(&mut rng, points.len(), cap).into_vec();
        idx.sort_unstable();
        idx
    } else {
        (0..points.len()).collect()
    };

    // Collapse identical (point, cluster) pairs into weighted rows; identical
    // points always share a cluster, so deduping on coordinates is enough.
    let mut flat = Vec::with_capacity(chosen.len() * dim);
    for &i in &chosen {
        flat.extend_from_slice(points.get(i));
    }
    let sub = Points::new(&flat, dim)?;
    let uniq = dedupe(sub);
    let rows = Points::new(&uniq.rows, dim)?;
    let mut label = vec![0usize; rows.len()];
    for (pos, &u) in uniq.index_of.iter().enumerate() {
        label[u] = clustering.assignment[chosen[pos]];
    }
    let k = clustering.k;
    let mut size = vec![0.0; k];
    for (u, &w) in uniq.weights.iter().enumerate() {
        size[label[u]] += w;
    }
    if size.iter().filter(|&&s| s > 0.0).count() < 2 {
        // the sample only hit one cluster; nothing to separate
        return Ok(0.0);
    }

    let mut dist_sum = vec![0.0; k];
    let mut total = 0.0;
    for (u, p) in rows.iter().enumerate() {
        dist_sum.iter_mut().for_each(|d| *d = 0.0);
        for (v, q) in rows.iter().enumerate() {
            if u != v {
                let d: f64 = p.iter().zip(q).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
                dist_sum[label[v]] += uniq.weights[v] * d;
            }
        }
        let own = label[u];
        if size[own] <= 1.0 {
            continue;
        }
        let a = dist_sum[own] / (size[own] - 1.0);
        let b = (0..k)
            .filter(|&c| c != own && size[c] > 0.0)
            .map(|c| dist_sum[c] / size[c])
            .fold(f64::INFINITY, f64::min);
        let s = if a.max(b) > 0.0 { (b - a) / a.max(b) } else { 0.0 };
        total += uniq.weights[u] * s;
    }
    Ok(total / chosen.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clustering::kmeans;

    fn labelled(k: usize, assignment: Vec<usize>, dim: usize) -> Clustering {
        Clustering {
            k,
            centroids: vec![vec![0.0; dim]; k],
            assignment,
            inertia_history: vec![],
            removed_empty: vec![],
        }
    }

    /// Direct O(n^2) definition, no deduplication.
    fn naive(points: Points<'_>, c: &Clustering) -> f64 {
        let n = points.len();
        let dist = |i: usize, j: usize| {
            points.get(i).iter().zip(points.get(j)).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
        };
        let mut total = 0.0;
        for i in 0..n {
            let own = c.assignment[i];
            let members = (0..n).filter(|&j| c.assignment[j] == own).count();
            if members == 1 {
                continue;
            }
            let a = (0..n).filter(|&j| j != i && c.assignment[j] == own).map(|j| dist(i, j)).sum::<f64>()
                / (members - 1) as f64;
            let b = (0..c.k)
                .filter(|&o| o != own)
                .map(|o| {
                    let m: Vec<usize> = (0..n).filter(|&j| c.assignment[j] == o).collect();
                    m.iter().map(|&j| dist(i, j)).sum::<f64>() / m.len() as f64
                })
                .fold(f64::INFINITY, f64::min);
            total += (b - a) / a.max(b);
        }
        total / n as f64
    }

    #[test]
    fn point_masses_score_one() {
        let data = [0.0, 0.0, 0.0, 0.0, 3.0, 4.0, 3.0, 4.0];
        let c = labelled(2, vec![0, 0, 1, 1], 2);
        assert_eq!(silhouette(Points::new(&data, 2).unwrap(), &c).unwrap(), 1.0);
    }

    #[test]
    fn needs_two_clusters() {
        let data = [0.0, 1.0];
        let c = labelled(1, vec![0, 0], 1);
        assert!(matches!(
            silhouette(Points::new(&data, 1).unwrap(), &c),
            Err(Error::NeedTwoClusters { k: 1 })
        ));
    }

    #[test]
    fn matches_naive_definition_with_duplicates() {
        let data = [0.0, 0.1, 0.1, 0.4, 0.5, 0.5, 0.9, 2.0, 0.0];
        let c = labelled(3, vec![0, 0, 0, 1, 1, 1, 1, 2, 0], 1);
        let pts = Points::new(&data, 1).unwrap();
        let fast = silhouette(pts, &c).unwrap();
        assert!((fast - naive(pts, &c)).abs() < 1e-12);
    }

    #[test]
    fn blobs_prefer_two_clusters() {
        let mut data = Vec::new();
        for i in 0..30 {
            let jitter = (i as f64 * 0.37).sin() * 0.02;
            data.extend_from_slice(&[0.1 + jitter, 0.2 - jitter]);
            data.extend_from_slice(&[0.8 - jitter, 0.9 + jitter]);
        }
        let pts = Points::new(&data, 2).unwrap();
        let two = silhouette(pts, &kmeans(pts, 2, 3, 100).unwrap()).unwrap();
        let five = silhouette(pts, &kmeans(pts, 5, 3, 100).unwrap()).unwrap();
        assert!(two > five, "{two} vs {five}");
        assert!(two > 0.9);
    }

    #[test]
    fn subsample_is_seeded_and_bounded() {
        let data: Vec<f64> = (0..400).map(|i| ((i * 7919) % 400) as f64 / 400.0).collect();
        let assignment: Vec<usize> = data.iter().map(|&v| usize::from(v > 0.5)).collect();
        let c = labelled(2, assignment, 1);
        let pts = Points::new(&data, 1).unwrap();
        let a = silhouette_sampled(pts, &c, 50, 9).unwrap();
        assert_eq!(a, silhouette_sampled(pts, &c, 50, 9).unwrap());
        assert!((-1.0..=1.0).contains(&a));
    }
}
