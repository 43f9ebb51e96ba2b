use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::{ExperimentKind, Histogram, Summary};
use crate::datagen::{
    make_blobs, DEFAULT_CENTER_DISTANCE, DEFAULT_CLUSTER_STD, DEFAULT_N_PER_CLUSTER,
};
use crate::error::{invalid, Result};
use crate::matrix::{squared_distance, DataMatrix};
use crate::mechanism::release;
use crate::noise::calibrate;
use crate::params::PrivacyMode;
use crate::recovery::recover_distance;
use crate::rng::RngSeed;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DistanceRecoveryConfig {
    pub n_pairs: usize,
    pub n_repeats: usize,
    pub d: usize,
    pub k: usize,
    pub epsilon: f64,
    pub alpha: f64,
    pub t_multiplier: f64,
    pub modes: Vec<PrivacyMode>,
    pub seed: u64,
    pub n_per_cluster: usize,
    pub center_distance: f64,
    pub cluster_std: f64,
}

impl Default for DistanceRecoveryConfig {
    fn default() -> Self {
        Self {
            n_pairs: 1000,
            n_repeats: 1000,
            d: 3,
            k: 2,
            epsilon: 4.0,
            alpha: 1.0,
            t_multiplier: 1.0,
            modes: PrivacyMode::ALL.to_vec(),
            seed: 0,
            n_per_cluster: DEFAULT_N_PER_CLUSTER,
            center_distance: DEFAULT_CENTER_DISTANCE,
            cluster_std: DEFAULT_CLUSTER_STD,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModeRecovery {
    pub mode: PrivacyMode,
    pub b: f64,
    pub sigma2: f64,
    /// Recovered minus true squared distance, over all pairs and repeats.
    pub difference: Summary,
    /// `|mean difference| / standard error`.
    pub bias_z_score: f64,
    pub histogram: Histogram,
    /// Pair-major: all repeats of pair 0, then pair 1, ...
    #[serde(skip)]
    pub differences: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DistanceRecoveryReport {
    pub experiment: ExperimentKind,
    pub config: DistanceRecoveryConfig,
    /// Sampled row indices and their true squared distance.
    #[serde(skip)]
    pub pairs: Vec<(usize, usize, f64)>,
    pub modes: Vec<ModeRecovery>,
}

impl DistanceRecoveryReport {
    pub fn mode(&self, mode: PrivacyMode) -> Option<&ModeRecovery> {
        self.modes.iter().find(|m| m.mode == mode)
    }

    /// `pair,i,j,true_distance2,difference` for every private pair of `mode`.
    pub fn differences_csv(&self, mode: &ModeRecovery) -> String {
        let mut s = String::from("pair,i,j,true_distance2,difference\n");
        let repeats = self.config.n_repeats;
        for (idx, diff) in mode.differences.iter().enumerate() {
            let p = idx / repeats;
            let (i, j, true_d) = self.pairs[p];
            s.push_str(&format!("{p},{i},{j},{true_d},{diff}\n"));
        }
        s
    }

    /// `bin_lower,bin_upper,count` for `mode`'s histogram.
    pub fn histogram_csv(mode: &ModeRecovery) -> String {
        let edges = mode.histogram.bin_edges();
        let mut s = String::from("bin_lower,bin_upper,count\n");
        for (i, c) in mode.histogram.counts.iter().enumerate() {
            s.push_str(&format!("{},{},{}\n", edges[i], edges[i + 1], c));
        }
        s
    }
}

fn mode_stream(mode: PrivacyMode) -> u64 {
    match mode {
        PrivacyMode::ElementWise => 2,
        PrivacyMode::RowWise => 3,
    }
}

/// Samples pairs of rows from a two-blob dataset and passes each pair
/// through the mechanism `n_repeats` times with a fresh projection and
/// fresh noise, recording recovered minus true squared distance.
pub fn distance_recovery(config: &DistanceRecoveryConfig) -> Result<DistanceRecoveryReport> {
    if config.n_pairs == 0 || config.n_repeats == 0 {
        return Err(invalid("n_pairs and n_repeats must be at least 1"));
    }
    if config.modes.is_empty() {
        return Err(invalid("no privacy mode selected"));
    }
    let root = RngSeed::new(config.seed);
    let ds = make_blobs(
        config.n_per_cluster,
        config.d,
        config.center_distance,
        config.cluster_std,
        root.derive(0),
    )?;
    let n = ds.data.rows();

    let mut pick = root.derive(1).rng();
    let pairs: Vec<(usize, usize, f64)> = (0..config.n_pairs)
        .map(|_| {
            let i = pick.random_range(0..n);
            let mut j = pick.random_range(0..n - 1);
            if j >= i {
                j += 1;
            }
            (i, j, squared_distance(ds.data.row(i), ds.data.row(j)))
        })
        .collect();

    let mut modes = Vec::new();
    for &mode in &config.modes {
        let params = calibrate(
            mode,
            config.k,
            config.epsilon,
            config.d,
            config.alpha,
            config.t_multiplier,
        )?;
        let stream = root.derive(mode_stream(mode));
        let per_pair: Vec<Vec<f64>> = pairs
            .par_iter()
            .enumerate()
            .map(|(p, &(i, j, true_d))| {
                let x = DataMatrix::from_rows(&[ds.data.row(i), ds.data.row(j)])?;
                let pair_stream = stream.derive(p as u64);
                (0..config.n_repeats)
                    .map(|r| {
                        let z = release(&x, &params, pair_stream.derive(r as u64))?;
                        let d = recover_distance(z.row(0), z.row(1), params.k(), params.sigma2())?;
                        Ok(d.estimate - true_d)
                    })
                    .collect()
            })
            .collect::<Result<_>>()?;
        let differences: Vec<f64> = per_pair.concat();
        let difference = Summary::of(&differences);
        modes.push(ModeRecovery {
            mode,
            b: params.b(),
            sigma2: params.sigma2(),
            bias_z_score: if difference.std_error > 0.0 {
                difference.mean.abs() / difference.std_error
            } else {
                0.0
            },
            difference,
            histogram: Histogram::symmetric(&differences, Histogram::DEFAULT_BINS),
            differences,
        });
    }
    Ok(DistanceRecoveryReport {
        experiment: ExperimentKind::DistanceRecovery,
        config: config.clone(),
        pairs,
        modes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_pair_single_repeat() {
        let config = DistanceRecoveryConfig {
            n_pairs: 1,
            n_repeats: 1,
            modes: vec![PrivacyMode::ElementWise],
            ..Default::default()
        };
        let r = distance_recovery(&config).unwrap();
        assert_eq!(r.modes.len(), 1);
        assert_eq!(r.modes[0].differences.len(), 1);
        assert_eq!(r.modes[0].histogram.counts.iter().sum::<u64>(), 1);
        assert_eq!(r.differences_csv(&r.modes[0]).lines().count(), 2);
    }

    #[test]
    fn mode_results_do_not_depend_on_selection() {
        let both = DistanceRecoveryConfig {
            n_pairs: 3,
            n_repeats: 4,
            ..Default::default()
        };
        let row_only = DistanceRecoveryConfig {
            modes: vec![PrivacyMode::RowWise],
            ..both.clone()
        };
        let a = distance_recovery(&both).unwrap();
        let b = distance_recovery(&row_only).unwrap();
        assert_eq!(a.mode(PrivacyMode::RowWise), b.mode(PrivacyMode::RowWise));
    }

    #[test]
    fn rejects_empty_runs() {
        let config = DistanceRecoveryConfig {
            n_pairs: 0,
            ..Default::default()
        };
        assert!(distance_recovery(&config).is_err());
    }
}
