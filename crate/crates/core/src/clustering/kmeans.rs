//! Lloyd's algorithm from k-means++ seeding.
//!
//! Exact duplicate points are collapsed into weighted rows first. Hidden
//! activations repeat heavily (every string starts from the same state and
//! shares prefixes), and the weighted problem has the same optimum, the same
//! Lloyd iterates and the same seeding distribution as the original one.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{dedupe, nearest, sq_dist, Clustering, Points};
use crate::error::{Error, Result};

pub const KMEANS_MAX_ITERS: usize = 300;

/// Picks an index with probability proportional to `mass`. Falls back to the
/// first positive entry if rounding leaves the draw past the end.
fn weighted_pick<R: Rng>(rng: &mut R, mass: &[f64]) -> usize {
    let total: f64 = mass.iter().sum();
    let mut r = rng.random::<f64>() * total;
    for (i, &m) in mass.iter().enumerate() {
        if m <= 0.0 {
            continue;
        }
        if r < m {
            return i;
        }
        r -= m;
    }
    mass.iter()
        .rposition(|&m| m > 0.0)
        .expect("at least one point with positive mass")
}

/// Clusters `points` into `k` groups.
///
/// Seeding is k-means++ driven by `seed`; Lloyd iterations run until the
/// assignment stops changing or `max_iters` is reached. A cluster that loses
/// all its points is re-seeded at the point farthest from its current
/// centroid. Nearest-centroid ties go to the lowest cluster id.
pub fn kmeans(points: Points<'_>, k: usize, seed: u64, max_iters: usize) -> Result<Clustering> {
    if points.is_empty() {
        return Err(Error::EmptyTraceSet);
    }
    if k == 0 {
        return Err(Error::InvalidConfig("K must be at least 1".into()));
    }
    let dim = points.dim();
    let uniq = dedupe(points);
    let rows = Points::new(&uniq.rows, dim)?;
    let m = rows.len();
    if k > m {
        return Err(Error::KTooLarge { k, distinct: m });
    }
    let w = &uniq.weights;

    // k-means++ seeding
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centroids: Vec<Vec<f64>> = Vec::with_capacity(k);
    let first = weighted_pick(&mut rng, w);
    centroids.push(rows.get(first).to_vec());
    let mut d2: Vec<f64> = rows.iter().map(|p| sq_dist(p, &centroids[0])).collect();
    while centroids.len() < k {
        let mass: Vec<f64> = d2.iter().zip(w).map(|(d, w)| d * w).collect();
        // k <= distinct rows, so some row is still uncovered and has positive mass
        let pick = weighted_pick(&mut rng, &mass);
        let c = rows.get(pick).to_vec();
        for (d, p) in d2.iter_mut().zip(rows.iter()) {
            *d = d.min(sq_dist(p, &c));
        }
        centroids.push(c);
    }

    let mut assign = vec![usize::MAX; m];
    let mut history = Vec::new();
    let mut sums = vec![0.0; k * dim];
    let mut counts = vec![0.0; k];
    for _ in 0..max_iters.max(1) {
        let mut changed = false;
        for (i, p) in rows.iter().enumerate() {
            let (c, _) = nearest(&centroids, p);
            if assign[i] != c {
                assign[i] = c;
                changed = true;
            }
        }
        if !changed {
            break;
        }

        // fixed-order accumulation keeps runs bit-identical
        sums.iter_mut().for_each(|s| *s = 0.0);
        counts.iter_mut().for_each(|c| *c = 0.0);
        for (i, p) in rows.iter().enumerate() {
            let c = assign[i];
            counts[c] += w[i];
            for (s, &v) in sums[c * dim..(c + 1) * dim].iter_mut().zip(p) {
                *s += w[i] * v;
            }
        }
        for c in 0..k {
            if counts[c] > 0.0 {
                for (x, s) in centroids[c].iter_mut().zip(&sums[c * dim..(c + 1) * dim]) {
                    *x = s / counts[c];
                }
            }
        }
        for c in 0..k {
            if counts[c] > 0.0 {
                continue;
            }
            // re-seed from the point farthest from its own centroid
            let far = (0..m)
                .filter(|&i| w[i] < counts[assign[i]])
                .max_by(|&a, &b| {
                    let da = sq_dist(rows.get(a), &centroids[assign[a]]);
                    let db = sq_dist(rows.get(b), &centroids[assign[b]]);
                    da.total_cmp(&db).then(b.cmp(&a))
                });
            if let Some(far) = far {
                counts[assign[far]] -= w[far];
                assign[far] = c;
                counts[c] = w[far];
                centroids[c] = rows.get(far).to_vec();
            }
        }
        history.push(
            rows.iter()
                .zip(&assign)
                .zip(w)
                .map(|((p, &c), w)| w * sq_dist(p, &centroids[c]))
                .sum(),
        );
    }

    let assignment = uniq.index_of.iter().map(|&u| assign[u]).collect();
    Ok(Clustering {
        k,
        centroids,
        assignment,
        inertia_history: history,
        removed_empty: Vec::new(),
    }
    .compact())
}
