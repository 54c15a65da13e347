use std::collections::BTreeMap;

use super::{Clustering, Points};
use crate::error::{Error, Result};

/// Equipartition clustering with two bins per unit: a coordinate above
/// `threshold` maps to 1, anything else (including the threshold itself) to 0.
/// Every distinct bit pattern becomes one cluster; cluster ids follow the
/// lexicographic order of the patterns so they do not depend on point order.
pub fn quantize_binary(points: Points<'_>, threshold: f64) -> Result<Clustering> {
    if points.is_empty() {
        return Err(Error::EmptyTraceSet);
    }
    let dim = points.dim();
    let patterns: Vec<Vec<bool>> = points
        .iter()
        .map(|p| p.iter().map(|&v| v > threshold).collect())
        .collect();
    let mut ids: BTreeMap<&[bool], usize> = patterns.iter().map(|p| (p.as_slice(), 0)).collect();
    for (next, id) in ids.values_mut().enumerate() {
        *id = next;
    }
    let k = ids.len();
    let assignment: Vec<usize> = patterns.iter().map(|p| ids[p.as_slice()]).collect();

    let mut centroids = vec![vec![0.0; dim]; k];
    let mut counts = vec![0usize; k];
    for (p, &c) in points.iter().zip(&assignment) {
        counts[c] += 1;
        for (s, v) in centroids[c].iter_mut().zip(p) {
            *s += v;
        }
    }
    for (centroid, &n) in centroids.iter_mut().zip(&counts) {
        centroid.iter_mut().for_each(|s| *s /= n as f64);
    }
    Ok(Clustering {
        k,
        centroids,
        assignment,
        inertia_history: Vec::new(),
        removed_empty: Vec::new(),
    })
}

/// Bit pattern of a single vector under the same rule.
pub fn binary_code(p: &[f64], threshold: f64) -> Vec<u8> {
    p.iter().map(|&v| u8::from(v > threshold)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_vector() {
        assert_eq!(binary_code(&[0.6, 0.4, 0.2], 0.5), vec![1, 0, 0]);
        assert_eq!(binary_code(&[0.5], 0.5), vec![0]);
    }

    #[test]
    fn groups_by_pattern() {
        let data = [0.6, 0.4, 0.2, 0.9, 0.1, 0.3, 0.1, 0.7, 0.5];
        let c = quantize_binary(Points::new(&data, 3).unwrap(), 0.5).unwrap();
        assert_eq!(c.k, 2);
        assert_eq!(c.assignment[0], c.assignment[1]);
        assert_ne!(c.assignment[0], c.assignment[2]);
        assert!((c.centroids[c.assignment[0]][0] - 0.75).abs() < 1e-12);
    }
}
