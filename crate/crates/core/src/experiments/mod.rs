//! Experiment drivers behind the command-line harness.
//!
//! Every driver is a pure function of its config: trials run on derived
//! child streams and are aggregated in trial order, so reruns with the same
//! seed give identical reports.

mod distance_recovery;
mod std_curve;
mod table1;
pub mod verify;

use serde::Serialize;

pub use distance_recovery::{
    distance_recovery, DistanceRecoveryConfig, DistanceRecoveryReport, ModeRecovery,
};
pub use std_curve::{std_curve, StdCurveConfig, StdCurvePoint, StdCurveReport};
pub use table1::{table1, Table1Cell, Table1Config, Table1Report, REFERENCE_ACCURACIES};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ExperimentKind {
    Table1,
    DistanceRecovery,
    StdCurve,
    Verify,
}

/// Mean, sample standard deviation, and standard error of a set of trials.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Summary {
    pub mean: f64,
    pub std: f64,
    pub std_error: f64,
    pub trials: usize,
}

impl Summary {
    pub fn of(values: &[f64]) -> Self {
        let n = values.len();
        let mean = values.iter().sum::<f64>() / n as f64;
        let std = if n > 1 {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
        } else {
            0.0
        };
        Self {
            mean,
            std,
            std_error: std / (n as f64).sqrt(),
            trials: n,
        }
    }
}

/// Equal-width histogram over `[-m, m]` where `m = max |value|`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Histogram {
    pub lower: f64,
    pub upper: f64,
    pub counts: Vec<u64>,
}

impl Histogram {
    pub const DEFAULT_BINS: usize = 101;

    pub fn symmetric(values: &[f64], bins: usize) -> Self {
        assert!(bins > 0);
        let m = values.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
        let mut counts = vec![0u64; bins];
        for v in values {
            let bin = if m > 0.0 {
                (((v + m) / (2.0 * m)) * bins as f64).floor() as usize
            } else {
                bins / 2
            };
            counts[bin.min(bins - 1)] += 1;
        }
        Self {
            lower: -m,
            upper: m,
            counts,
        }
    }

    pub fn bin_edges(&self) -> Vec<f64> {
        let bins = self.counts.len();
        (0..=bins)
            .map(|i| self.lower + (self.upper - self.lower) * i as f64 / bins as f64)
            .collect()
    }
}
