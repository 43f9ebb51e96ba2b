use rayon::prelude::*;
use serde::Serialize;

use super::{ExperimentKind, Summary};
use crate::clustering::{clustering_accuracy, kmeans, KMeansConfig};
use crate::datagen::{
    make_blobs, DEFAULT_CENTER_DISTANCE, DEFAULT_CLUSTER_STD, DEFAULT_N_PER_CLUSTER,
};
use crate::error::{invalid, Result};
use crate::mechanism::release;
use crate::noise::calibrate;
use crate::params::PrivacyMode;
use crate::rng::RngSeed;

/// Reference k-means accuracies: `(d, k, none, element-wise, row-wise)`.
pub const REFERENCE_ACCURACIES: [(usize, usize, f64, f64, f64); 4] = [
    (3, 2, 0.9783, 0.9441, 0.9477),
    (10, 3, 0.9772, 0.9082, 0.909),
    (50, 10, 0.9771, 0.6954, 0.6796),
    (100, 20, 0.9797, 0.6927, 0.6668),
];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Table1Config {
    pub grid: Vec<(usize, usize)>,
    pub epsilon: f64,
    pub alpha: f64,
    pub t_multiplier: f64,
    pub seeds: usize,
    pub seed: u64,
    pub n_per_cluster: usize,
    pub center_distance: f64,
    pub cluster_std: f64,
}

impl Default for Table1Config {
    fn default() -> Self {
        Self {
            grid: REFERENCE_ACCURACIES.iter().map(|r| (r.0, r.1)).collect(),
            epsilon: 4.0,
            alpha: 1.0,
            t_multiplier: 1.0,
            seeds: 20,
            seed: 0,
            n_per_cluster: DEFAULT_N_PER_CLUSTER,
            center_distance: DEFAULT_CENTER_DISTANCE,
            cluster_std: DEFAULT_CLUSTER_STD,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Table1Cell {
    pub d: usize,
    pub k: usize,
    /// `none`, `element` or `row`.
    pub privacy: String,
    pub b: Option<f64>,
    pub failure_bound: Option<f64>,
    pub accuracy: Summary,
    pub per_seed: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Table1Report {
    pub experiment: ExperimentKind,
    pub config: Table1Config,
    pub cells: Vec<Table1Cell>,
}

impl Table1Report {
    pub fn cell(&self, d: usize, k: usize, privacy: &str) -> Option<&Table1Cell> {
        self.cells
            .iter()
            .find(|c| c.d == d && c.k == k && c.privacy == privacy)
    }
}

/// k-means accuracy on raw, element-wise private, and row-wise private
/// two-blob data, for each `(d, k)` in the grid.
///
/// Each seed draws a fresh dataset and a fresh release per mode; k-means
/// with two clusters runs directly on the released `n x k` matrix.
pub fn table1(config: &Table1Config) -> Result<Table1Report> {
    if config.grid.is_empty() {
        return Err(invalid("the (d, k) grid is empty"));
    }
    if config.seeds == 0 {
        return Err(invalid("at least one seed is required"));
    }
    let root = RngSeed::new(config.seed);
    let jobs: Vec<(usize, usize)> = (0..config.grid.len())
        .flat_map(|cell| (0..config.seeds).map(move |s| (cell, s)))
        .collect();
    let trials: Vec<[f64; 3]> = jobs
        .par_iter()
        .map(|&(cell, s)| {
            let (d, k) = config.grid[cell];
            let stream = root.derive(cell as u64).derive(s as u64);
            run_seed(config, d, k, stream)
        })
        .collect::<Result<_>>()?;

    let mut cells = Vec::new();
    for (cell_idx, &(d, k)) in config.grid.iter().enumerate() {
        let rows = &trials[cell_idx * config.seeds..(cell_idx + 1) * config.seeds];
        for (slot, privacy) in ["none", "element", "row"].into_iter().enumerate() {
            let per_seed: Vec<f64> = rows.iter().map(|r| r[slot]).collect();
            let params = match slot {
                0 => None,
                1 => Some(calibrate(
                    PrivacyMode::ElementWise,
                    k,
                    config.epsilon,
                    d,
                    config.alpha,
                    config.t_multiplier,
                )?),
                _ => Some(calibrate(
                    PrivacyMode::RowWise,
                    k,
                    config.epsilon,
                    d,
                    config.alpha,
                    config.t_multiplier,
                )?),
            };
            cells.push(Table1Cell {
                d,
                k,
                privacy: privacy.to_owned(),
                b: params.as_ref().map(|p| p.b()),
                failure_bound: params.as_ref().map(|p| p.failure_bound()),
                accuracy: Summary::of(&per_seed),
                per_seed,
            });
        }
    }
    Ok(Table1Report {
        experiment: ExperimentKind::Table1,
        config: config.clone(),
        cells,
    })
}

fn run_seed(config: &Table1Config, d: usize, k: usize, stream: RngSeed) -> Result<[f64; 3]> {
    let ds = make_blobs(
        config.n_per_cluster,
        d,
        config.center_distance,
        config.cluster_std,
        stream.derive(0),
    )?;
    let cluster = |x: &crate::matrix::DataMatrix, s: RngSeed| -> Result<f64> {
        let r = kmeans(x, 2, KMeansConfig::default(), s)?;
        clustering_accuracy(&r.assignments, &ds.labels)
    };
    let mut out = [cluster(&ds.data, stream.derive(1))?, 0.0, 0.0];
    for (i, mode) in PrivacyMode::ALL.into_iter().enumerate() {
        let params = calibrate(
            mode,
            k,
            config.epsilon,
            d,
            config.alpha,
            config.t_multiplier,
        )?;
        let z = release(&ds.data, &params, stream.derive(2 + 2 * i as u64))?;
        out[i + 1] = cluster(z.z(), stream.derive(3 + 2 * i as u64))?;
    }
    Ok(out)
}

impl Table1Report {
    /// One line per cell: `d,k,privacy,b,mean_accuracy,std,std_error,trials`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("d,k,privacy,b,mean_accuracy,std,std_error,trials\n");
        for c in &self.cells {
            let b = c.b.map(|b| b.to_string()).unwrap_or_default();
            s.push_str(&format!(
                "{},{},{},{},{},{},{},{}\n",
                c.d,
                c.k,
                c.privacy,
                b,
                c.accuracy.mean,
                c.accuracy.std,
                c.accuracy.std_error,
                c.accuracy.trials
            ));
        }
        s
    }
}
