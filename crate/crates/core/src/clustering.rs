//! Lloyd's k-means with k-means++ seeding, and two-class accuracy.

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::matrix::{squared_distance, DataMatrix};
use crate::rng::{RngSeed, StreamRng};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KMeansConfig {
    pub n_init: usize,
    pub max_iter: usize,
    /// Stop once no centroid moves farther than this (Euclidean).
    pub tol: f64,
}

impl Default for KMeansConfig {
    fn default() -> Self {
        Self {
            n_init: 10,
            max_iter: 300,
            tol: 1e-4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClusteringResult {
    pub centroids: DataMatrix,
    pub assignments: Vec<usize>,
    pub inertia: f64,
    pub iterations: usize,
    /// Inertia after every assignment step of the winning run, final one last.
    pub inertia_history: Vec<f64>,
}

/// Best of `config.n_init` k-means++ seeded Lloyd runs, by inertia. Run `i`
/// uses child stream `i` of `rng`; ties go to the lowest run index.
pub fn kmeans(
    x: &DataMatrix,
    k_clusters: usize,
    config: KMeansConfig,
    rng: RngSeed,
) -> Result<ClusteringResult> {
    if k_clusters == 0 {
        return Err(invalid("k_clusters must be at least 1"));
    }
    if k_clusters > x.rows() {
        return Err(invalid(format!(
            "k_clusters={k_clusters} exceeds the number of points {}",
            x.rows()
        )));
    }
    if config.n_init == 0 || config.max_iter == 0 {
        return Err(invalid("n_init and max_iter must be at least 1"));
    }
    if config.tol.is_nan() || config.tol < 0.0 {
        return Err(invalid(format!(
            "tol must be non-negative, got {}",
            config.tol
        )));
    }

    let runs: Vec<ClusteringResult> = (0..config.n_init)
        .into_par_iter()
        .map(|i| lloyd(x, k_clusters, config, &mut rng.derive(i as u64).rng()))
        .collect();
    let mut best = None::<ClusteringResult>;
    for run in runs {
        if best.as_ref().is_none_or(|b| run.inertia < b.inertia) {
            best = Some(run);
        }
    }
    Ok(best.expect("n_init >= 1"))
}

fn plus_plus_init(x: &DataMatrix, k_clusters: usize, rng: &mut StreamRng) -> Vec<Vec<f64>> {
    let n = x.rows();
    let mut centroids = vec![x.row(rng.random_range(0..n)).to_vec()];
    let mut nearest: Vec<f64> = x
        .iter_rows()
        .map(|r| squared_distance(r, &centroids[0]))
        .collect();
    while centroids.len() < k_clusters {
        let total: f64 = nearest.iter().sum();
        let pick = if total > 0.0 {
            let target = rng.random::<f64>() * total;
            let mut acc = 0.0;
            nearest
                .iter()
                .position(|&w| {
                    acc += w;
                    acc > target
                })
                .unwrap_or_else(|| nearest.iter().rposition(|&w| w > 0.0).unwrap())
        } else {
            rng.random_range(0..n)
        };
        let c = x.row(pick).to_vec();
        for (dist, row) in nearest.iter_mut().zip(x.iter_rows()) {
            *dist = dist.min(squared_distance(row, &c));
        }
        centroids.push(c);
    }
    centroids
}

/// Assigns each row to its nearest centroid (lowest index on ties).
/// Returns the inertia and each row's squared distance to its centroid.
fn assign(
    x: &DataMatrix,
    centroids: &[Vec<f64>],
    assignments: &mut [usize],
    dists: &mut [f64],
) -> f64 {
    for ((row, a), dist) in x
        .iter_rows()
        .zip(assignments.iter_mut())
        .zip(dists.iter_mut())
    {
        let (mut best, mut best_d) = (0, f64::INFINITY);
        for (c, centroid) in centroids.iter().enumerate() {
            let d = squared_distance(row, centroid);
            if d < best_d {
                best = c;
                best_d = d;
            }
        }
        *a = best;
        *dist = best_d;
    }
    dists.iter().sum()
}

fn lloyd(
    x: &DataMatrix,
    k_clusters: usize,
    config: KMeansConfig,
    rng: &mut StreamRng,
) -> ClusteringResult {
    let (n, dim) = (x.rows(), x.cols());
    let mut centroids = plus_plus_init(x, k_clusters, rng);
    let mut assignments = vec![0; n];
    let mut dists = vec![0.0; n];
    let mut history = Vec::new();
    let mut iterations = 0;

    for it in 1..=config.max_iter {
        history.push(assign(x, &centroids, &mut assignments, &mut dists));
        iterations = it;

        let mut sums = vec![vec![0.0; dim]; k_clusters];
        let mut counts = vec![0usize; k_clusters];
        for (row, &a) in x.iter_rows().zip(&assignments) {
            counts[a] += 1;
            for (s, v) in sums[a].iter_mut().zip(row) {
                *s += v;
            }
        }

        // Empty clusters take the points farthest from their centroids.
        let mut taken = vec![false; n];
        let mut updated = Vec::with_capacity(k_clusters);
        for (sum, &count) in sums.into_iter().zip(&counts) {
            if count > 0 {
                updated.push(sum.into_iter().map(|s| s / count as f64).collect());
            } else {
                let far = (0..n)
                    .filter(|&i| !taken[i])
                    .max_by(|&a, &b| dists[a].total_cmp(&dists[b]).then(b.cmp(&a)))
                    .expect("k_clusters <= n");
                taken[far] = true;
                updated.push(x.row(far).to_vec());
            }
        }

        let shift = centroids
            .iter()
            .zip(&updated)
            .map(|(a, b)| squared_distance(a, b).sqrt())
            .fold(0.0, f64::max);
        centroids = updated;
        if shift <= config.tol {
            break;
        }
    }

    let inertia = assign(x, &centroids, &mut assignments, &mut dists);
    history.push(inertia);
    ClusteringResult {
        centroids: DataMatrix::new(k_clusters, dim, centroids.concat())
            .expect("means of finite rows"),
        assignments,
        inertia,
        iterations,
        inertia_history: history,
    }
}

/// Fraction of rows whose cluster matches its label under the better of the
/// two possible cluster-to-label matchings.
pub fn clustering_accuracy(assignments: &[usize], labels: &[usize]) -> Result<f64> {
    if assignments.len() != labels.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} assignments for {} labels",
            assignments.len(),
            labels.len()
        )));
    }
    if assignments.is_empty() {
        return Err(invalid("no rows to score"));
    }
    if assignments.iter().chain(labels).any(|&v| v > 1) {
        return Err(invalid(
            "accuracy is defined for two classes labelled 0 and 1",
        ));
    }
    let agree = assignments
        .iter()
        .zip(labels)
        .filter(|(a, l)| a == l)
        .count();
    let n = labels.len();
    Ok(agree.max(n - agree) as f64 / n as f64)
}
