//! Seeded k-means (k-means++ initialisation) used to coarsen embeddings
//! into a small label set.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::StatsError;
use crate::model::seeded_rng;

pub const MAX_ITERATIONS: usize = 100;
pub const TOLERANCE: f64 = 1e-6;
pub const MAX_CLUSTERS: usize = 50;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KMeansResult {
    pub labels: Vec<usize>,
    pub centroids: Vec<Vec<f64>>,
    pub iterations: usize,
    pub converged: bool,
    pub inertia: f64,
}

/// `k = max(1, min(floor(0.05 n), 50))`.
pub fn coarsening_k(n: usize) -> usize {
    (n / 20).clamp(1, MAX_CLUSTERS)
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn check_points(points: &[Vec<f64>]) -> Result<usize, StatsError> {
    let dim = points.first().ok_or(StatsError::Empty)?.len();
    if dim == 0 {
        return Err(StatsError::InvalidParameter("zero-dimensional vectors".into()));
    }
    if let Some(p) = points.iter().find(|p| p.len() != dim) {
        return Err(StatsError::DimensionMismatch { expected: dim, found: p.len() });
    }
    if points.iter().flatten().any(|v| !v.is_finite()) {
        return Err(StatsError::InvalidParameter("non-finite coordinate".into()));
    }
    Ok(dim)
}

fn nearest(point: &[f64], centroids: &[Vec<f64>]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (c, centroid) in centroids.iter().enumerate() {
        let d = sq_dist(point, centroid);
        if d < best.1 {
            best = (c, d);
        }
    }
    best
}

fn plus_plus_init<R: Rng>(points: &[Vec<f64>], k: usize, rng: &mut R) -> Vec<Vec<f64>> {
    let mut centroids = vec![points[rng.random_range(0..points.len())].clone()];
    let mut d2: Vec<f64> = points.iter().map(|p| sq_dist(p, &centroids[0])).collect();
    while centroids.len() < k {
        let next = match WeightedIndex::new(&d2) {
            Ok(w) => w.sample(rng),
            // Every point coincides with a centroid.
            Err(_) => rng.random_range(0..points.len()),
        };
        centroids.push(points[next].clone());
        let c = centroids.last().expect("just pushed");
        for (d, p) in d2.iter_mut().zip(points) {
            *d = d.min(sq_dist(p, c));
        }
    }
    centroids
}

/// Lloyd iterations from a k-means++ start, deterministic under `seed`.
pub fn kmeans(points: &[Vec<f64>], k: usize, seed: u64) -> Result<KMeansResult, StatsError> {
    let dim = check_points(points)?;
    if k == 0 || k > points.len() {
        return Err(StatsError::InvalidParameter(format!(
            "k = {k} with {} points",
            points.len()
        )));
    }
    let mut rng = seeded_rng(seed);
    let mut centroids = plus_plus_init(points, k, &mut rng);
    let mut labels = vec![0usize; points.len()];
    let mut iterations = 0;
    let mut converged = false;
    while iterations < MAX_ITERATIONS {
        iterations += 1;
        for (label, p) in labels.iter_mut().zip(points) {
            *label = nearest(p, &centroids).0;
        }
        let mut sums = vec![vec![0.0; dim]; k];
        let mut counts = vec![0usize; k];
        for (p, &l) in points.iter().zip(&labels) {
            counts[l] += 1;
            for (s, v) in sums[l].iter_mut().zip(p) {
                *s += v;
            }
        }
        let mut shift = 0.0f64;
        for c in 0..k {
            // An empty cluster keeps its previous centroid.
            if counts[c] == 0 {
                continue;
            }
            let updated: Vec<f64> = sums[c].iter().map(|s| s / counts[c] as f64).collect();
            shift = shift.max(sq_dist(&updated, &centroids[c]).sqrt());
            centroids[c] = updated;
        }
        if shift <= TOLERANCE {
            converged = true;
            break;
        }
    }
    let mut inertia = 0.0;
    for (label, p) in labels.iter_mut().zip(points) {
        let (c, d) = nearest(p, &centroids);
        *label = c;
        inertia += d;
    }
    Ok(KMeansResult { labels, centroids, iterations, converged, inertia })
}

/// Cluster embeddings with `k` from [`coarsening_k`].
pub fn coarsen(embeddings: &[Vec<f64>], seed: u64) -> Result<KMeansResult, StatsError> {
    kmeans(embeddings, coarsening_k(embeddings.len()), seed)
}

#[cfg(test)]
mod unit {
    use super::*;

    #[test]
    fn k_rule() {
        assert_eq!(coarsening_k(100), 5);
        assert_eq!(coarsening_k(2000), 50);
        assert_eq!(coarsening_k(10), 1);
        assert_eq!(coarsening_k(19), 1);
        assert_eq!(coarsening_k(20), 1);
        assert_eq!(coarsening_k(40), 2);
        assert_eq!(coarsening_k(1), 1);
    }

    fn blobs(seed: u64) -> Vec<Vec<f64>> {
        let mut rng = seeded_rng(seed);
        let centers = [[0.0, 0.0], [10.0, 0.0], [0.0, 10.0]];
        (0..90)
            .map(|i| {
                let c = centers[i % 3];
                vec![c[0] + rng.random_range(-1.0..1.0), c[1] + rng.random_range(-1.0..1.0)]
            })
            .collect()
    }

    #[test]
    fn separates_blobs() {
        let pts = blobs(1);
        let res = kmeans(&pts, 3, 7).unwrap();
        assert!(res.converged);
        for i in 0..pts.len() {
            for j in 0..pts.len() {
                assert_eq!(res.labels[i] == res.labels[j], i % 3 == j % 3);
            }
        }
    }

    #[test]
    fn deterministic_under_seed() {
        let pts = blobs(2);
        assert_eq!(kmeans(&pts, 4, 9).unwrap(), kmeans(&pts, 4, 9).unwrap());
        let c = coarsen(&pts, 1).unwrap();
        assert_eq!(c.centroids.len(), 4);
    }

    #[test]
    fn duplicates_and_errors() {
        let pts = vec![vec![1.0, 1.0]; 5];
        let res = kmeans(&pts, 3, 0).unwrap();
        assert_eq!(res.inertia, 0.0);
        assert!(kmeans(&[], 1, 0).is_err());
        assert!(matches!(
            kmeans(&[vec![1.0], vec![1.0, 2.0]], 1, 0),
            Err(StatsError::DimensionMismatch { .. })
        ));
        assert!(kmeans(&pts, 6, 0).is_err());
    }
}
