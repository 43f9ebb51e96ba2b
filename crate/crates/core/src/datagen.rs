//! Two isotropic Gaussian blobs.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{invalid, Result};
use crate::matrix::DataMatrix;
use crate::rng::RngSeed;

pub const DEFAULT_N_PER_CLUSTER: usize = 1000;
pub const DEFAULT_CENTER_DISTANCE: f64 = 4.0;
pub const DEFAULT_CLUSTER_STD: f64 = 1.0;

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    pub data: DataMatrix,
    /// Cluster index of each row, 0 or 1.
    pub labels: Vec<usize>,
    pub centers: [Vec<f64>; 2],
}

/// Draws `n_per_cluster` points around each of two centers placed at
/// `-/+ center_distance / 2` on the first axis, then shuffles the rows.
pub fn make_blobs(
    n_per_cluster: usize,
    d: usize,
    center_distance: f64,
    cluster_std: f64,
    rng: RngSeed,
) -> Result<LabeledDataset> {
    if n_per_cluster == 0 || d == 0 {
        return Err(invalid(format!(
            "need n_per_cluster >= 1 and d >= 1, got {n_per_cluster} and {d}"
        )));
    }
    if !(center_distance >= 0.0 && center_distance.is_finite()) {
        return Err(invalid(format!(
            "center distance must be non-negative, got {center_distance}"
        )));
    }
    if !(cluster_std > 0.0 && cluster_std.is_finite()) {
        return Err(invalid(format!(
            "cluster std must be positive, got {cluster_std}"
        )));
    }

    let mut centers = [vec![0.0; d], vec![0.0; d]];
    centers[0][0] = -center_distance / 2.0;
    centers[1][0] = center_distance / 2.0;

    let mut noise = rng.derive(0).rng();
    let mut points: Vec<(Vec<f64>, usize)> = Vec::with_capacity(2 * n_per_cluster);
    for (label, center) in centers.iter().enumerate() {
        for _ in 0..n_per_cluster {
            let row = center
                .iter()
                .map(|c| c + cluster_std * noise.sample::<f64, _>(StandardNormal))
                .collect();
            points.push((row, label));
        }
    }
    points.shuffle(&mut rng.derive(1).rng());

    let labels = points.iter().map(|(_, l)| *l).collect();
    let values = points.into_iter().flat_map(|(row, _)| row).collect();
    Ok(LabeledDataset {
        data: DataMatrix::new(2 * n_per_cluster, d, values)?,
        labels,
        centers,
    })
}
