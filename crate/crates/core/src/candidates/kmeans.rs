use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct ClusterConfig {
    pub k: usize,
    pub max_iters: usize,
    pub seed: u64,
}

impl Default for ClusterConfig {
    fn default() -> Self {
        Self {
            k: 20,
            max_iters: 100,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KMeansResult<T> {
    pub assignments: Vec<usize>,
    pub centroids: Vec<Vec<T>>,
    /// Within-cluster sum of squared distances.
    pub objective: T,
    /// Objective after every assignment step.
    pub objective_trace: Vec<T>,
}

pub(crate) fn sq_dist<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).map(|(&x, &y)| (x - y) * (x - y)).sum()
}

fn nearest<T: Scalar>(x: &[T], centroids: &[Vec<T>]) -> (usize, T) {
    let mut best = (0, T::infinity());
    for (c, centroid) in centroids.iter().enumerate() {
        let d = sq_dist(x, centroid);
        if d < best.1 {
            best = (c, d);
        }
    }
    best
}

/// k-means++ seeding; stops early when every remaining point coincides with
/// a chosen center.
fn seed_centroids<T: Scalar>(vectors: &[Vec<T>], k: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<T>> {
    let mut centroids = vec![vectors[rng.random_range(0..vectors.len())].clone()];
    while centroids.len() < k {
        let d2: Vec<f64> = vectors.iter().map(|x| nearest(x, &centroids).1.as_f64()).collect();
        let Ok(dist) = WeightedIndex::new(&d2) else { break };
        centroids.push(vectors[dist.sample(rng)].clone());
    }
    centroids
}

/// Lloyd's algorithm from a k-means++ start, until the assignment stops
/// changing or `max_iters` rounds. A cluster that empties is re-seeded at
/// the point farthest from its current centroid. `k` is capped at the
/// number of points.
pub fn kmeans_cluster<T: Scalar>(vectors: &[Vec<T>], config: &ClusterConfig) -> Result<KMeansResult<T>> {
    if vectors.is_empty() {
        return Err(Error::invalid("k-means on zero points"));
    }
    if config.k == 0 {
        return Err(Error::invalid("k must be at least 1"));
    }
    let dim = vectors[0].len();
    if vectors.iter().any(|v| v.len() != dim) {
        return Err(Error::invalid("k-means points differ in dimension"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut centroids = seed_centroids(vectors, config.k.min(vectors.len()), &mut rng);
    let k = centroids.len();
    let mut assignments: Vec<usize> = Vec::new();
    let mut trace = Vec::new();
    for _ in 0..config.max_iters.max(1) {
        let mut objective = T::zero();
        let next: Vec<usize> = vectors
            .iter()
            .map(|x| {
                let (c, d) = nearest(x, &centroids);
                objective = objective + d;
                c
            })
            .collect();
        trace.push(objective);
        if next == assignments {
            break;
        }
        assignments = next;

        let mut sums = vec![vec![T::zero(); dim]; k];
        let mut counts = vec![0usize; k];
        for (x, &c) in vectors.iter().zip(&assignments) {
            counts[c] += 1;
            for (s, &v) in sums[c].iter_mut().zip(x) {
                *s = *s + v;
            }
        }
        for c in 0..k {
            if counts[c] > 0 {
                let n = T::from_usize_lossy(counts[c]);
                centroids[c] = sums[c].iter().map(|&s| s / n).collect();
            }
        }
        for c in 0..k {
            if counts[c] == 0 {
                let far = (0..vectors.len())
                    .max_by(|&a, &b| {
                        let da = sq_dist(&vectors[a], &centroids[assignments[a]]);
                        let db = sq_dist(&vectors[b], &centroids[assignments[b]]);
                        da.partial_cmp(&db).unwrap_or(std::cmp::Ordering::Equal).then(b.cmp(&a))
                    })
                    .unwrap_or(0);
                centroids[c] = vectors[far].clone();
            }
        }
    }
    let objective = vectors
        .iter()
        .zip(&assignments)
        .map(|(x, &c)| sq_dist(x, &centroids[c]))
        .sum();
    Ok(KMeansResult {
        assignments,
        centroids,
        objective,
        objective_trace: trace,
    })
}
