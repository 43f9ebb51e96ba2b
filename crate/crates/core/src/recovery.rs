//! Distance recovery from a released matrix.
//!
//! `D(z_i, z_j) = ||z_i - z_j||^2 - 2 k sigma2` is an unbiased estimate of
//! the original squared distance `delta = ||x_i - x_j||^2`. Its variance
//! splits into three uncorrelated parts:
//!
//! * projection: `Var ||aP||^2 = (2/k) delta^2`
//! * noise: `Var ||Delta_i - Delta_j||^2 = 14 k sigma2^2`
//! * cross: `Var 2<aP, Delta_i - Delta_j> = 8 sigma2 delta`
//!
//! The cross term's coefficient is 8 because the difference of two noise
//! rows has per-entry variance `2 sigma2`. The constant shift `2 k sigma2`
//! does not enter the variance.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::matrix::{squared_distance, DataMatrix};
use crate::params::ReleasedMatrix;

/// Coefficient of `sigma2 * delta` in the cross-term variance.
pub const CROSS_TERM_COEFFICIENT: f64 = 8.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RecoveredDistance {
    /// Squared-distance estimate. May be negative.
    pub estimate: f64,
    pub k: usize,
    pub sigma2: f64,
}

impl RecoveredDistance {
    /// The estimate floored at zero, for consumers that need a metric.
    /// Biased; prefer `estimate` for averaging.
    pub fn clamped(&self) -> f64 {
        self.estimate.max(0.0)
    }

    /// Variance report with the clamped estimate plugged in for the unknown
    /// true distance.
    pub fn plug_in_variance(&self) -> Result<VarianceReport> {
        analytic_variance(self.clamped(), self.k, self.sigma2)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct VarianceReport {
    pub var_z1: f64,
    pub var_z2: f64,
    pub var_z3: f64,
    pub total: f64,
    /// `(2/k) delta^2 + 2k(7 sigma2^2 - sigma2) + 4 sigma2 delta`, a closed
    /// form that subtracts the mean shift and undercounts the cross term.
    /// Reported next to `total` for comparison only.
    pub uncorrected_total: f64,
}

pub fn recover_distance(
    zi: &[f64],
    zj: &[f64],
    k: usize,
    sigma2: f64,
) -> Result<RecoveredDistance> {
    if zi.len() != k || zj.len() != k {
        return Err(Error::DimensionMismatch(format!(
            "rows of length {} and {} do not match k={k}",
            zi.len(),
            zj.len()
        )));
    }
    if !(sigma2 >= 0.0 && sigma2.is_finite()) {
        return Err(invalid(format!(
            "sigma2 must be non-negative and finite, got {sigma2}"
        )));
    }
    Ok(RecoveredDistance {
        estimate: squared_distance(zi, zj) - 2.0 * k as f64 * sigma2,
        k,
        sigma2,
    })
}

pub fn analytic_variance(dist2: f64, k: usize, sigma2: f64) -> Result<VarianceReport> {
    if !(dist2 >= 0.0 && dist2.is_finite()) {
        return Err(invalid(format!(
            "squared distance must be non-negative, got {dist2}"
        )));
    }
    if k == 0 {
        return Err(invalid("k must be at least 1"));
    }
    if !(sigma2 >= 0.0 && sigma2.is_finite()) {
        return Err(invalid(format!(
            "sigma2 must be non-negative, got {sigma2}"
        )));
    }
    let kf = k as f64;
    let var_z1 = 2.0 / kf * dist2 * dist2;
    let var_z2 = 14.0 * kf * sigma2 * sigma2;
    let var_z3 = CROSS_TERM_COEFFICIENT * sigma2 * dist2;
    let uncorrected_total = 2.0 / kf * dist2 * dist2
        + 2.0 * kf * (7.0 * sigma2 * sigma2 - sigma2)
        + 4.0 * sigma2 * dist2;
    Ok(VarianceReport {
        var_z1,
        var_z2,
        var_z3,
        total: var_z1 + var_z2 + var_z3,
        uncorrected_total,
    })
}

/// `min(1, variance / lambda^2)`: bound on `P(|D - delta| > lambda)`.
pub fn chebyshev_error_bound(variance: f64, lambda: f64) -> Result<f64> {
    if lambda.is_nan() || lambda <= 0.0 {
        return Err(invalid(format!("lambda must be positive, got {lambda}")));
    }
    if variance.is_nan() || variance < 0.0 {
        return Err(invalid(format!(
            "variance must be non-negative, got {variance}"
        )));
    }
    Ok((variance / (lambda * lambda)).min(1.0))
}

/// All-pairs distance recovery; entry `(i, j)` is `D(z_i, z_j)`.
pub fn pairwise_distances(z: &ReleasedMatrix) -> DataMatrix {
    let n = z.n();
    let shift = 2.0 * z.k() as f64 * z.params().sigma2();
    let mut out = vec![0.0; n * n];
    out.par_chunks_mut(n).enumerate().for_each(|(i, row)| {
        let zi = z.row(i);
        for (j, cell) in row.iter_mut().enumerate() {
            *cell = squared_distance(zi, z.row(j)) - shift;
        }
    });
    DataMatrix::new(n, n, out).expect("distances of finite rows are finite")
}
