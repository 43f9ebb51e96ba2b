//! Privacy parameters and the released matrix.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error};
use crate::matrix::DataMatrix;

/// Which neighbouring relation the privacy guarantee covers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PrivacyMode {
    /// Databases differing in a single element, `||X - X'||_1 <= 1`.
    #[serde(rename = "element")]
    ElementWise,
    /// Databases differing in a single row, `||X_m - X'_m||_2^2 <= alpha`.
    #[serde(rename = "row")]
    RowWise,
}

impl PrivacyMode {
    pub const ALL: [PrivacyMode; 2] = [PrivacyMode::ElementWise, PrivacyMode::RowWise];

    pub fn as_str(self) -> &'static str {
        match self {
            PrivacyMode::ElementWise => "element",
            PrivacyMode::RowWise => "row",
        }
    }
}

impl fmt::Display for PrivacyMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PrivacyMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "element" | "element-wise" | "elementwise" => Ok(PrivacyMode::ElementWise),
            "row" | "row-wise" | "rowwise" => Ok(PrivacyMode::RowWise),
            other => Err(invalid(format!(
                "unknown privacy mode {other:?}, expected element or row"
            ))),
        }
    }
}

/// Fully calibrated mechanism parameters.
///
/// Only the calibration functions in [`crate::noise`] construct this type,
/// so a value always satisfies `b = c / epsilon` and `sigma2 = 2 b^2`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PrivacyParams {
    pub(crate) mode: PrivacyMode,
    pub(crate) epsilon: f64,
    pub(crate) k: usize,
    pub(crate) d: Option<usize>,
    pub(crate) alpha: Option<f64>,
    pub(crate) t: Option<f64>,
    pub(crate) t_multiplier: Option<f64>,
    pub(crate) c: f64,
    pub(crate) b: f64,
    pub(crate) sigma2: f64,
    pub(crate) failure_bound: f64,
    pub(crate) unclamped_failure_bound: f64,
    pub(crate) vacuous_bound: bool,
}

impl PrivacyParams {
    pub fn mode(&self) -> PrivacyMode {
        self.mode
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    /// Projection dimension.
    pub fn k(&self) -> usize {
        self.k
    }

    /// Input dimension; only element-wise calibration depends on it.
    pub fn d(&self) -> Option<usize> {
        self.d
    }

    pub fn alpha(&self) -> Option<f64> {
        self.alpha
    }

    pub fn t(&self) -> Option<f64> {
        self.t
    }

    pub fn t_multiplier(&self) -> Option<f64> {
        self.t_multiplier
    }

    /// Sensitivity constant.
    pub fn c(&self) -> f64 {
        self.c
    }

    /// Laplace scale.
    pub fn b(&self) -> f64 {
        self.b
    }

    /// Per-entry noise variance, `2 b^2`.
    pub fn sigma2(&self) -> f64 {
        self.sigma2
    }

    /// Upper bound on the probability that the epsilon guarantee fails for
    /// the drawn projection, clamped to `[0, 1]`.
    pub fn failure_bound(&self) -> f64 {
        self.failure_bound
    }

    pub fn unclamped_failure_bound(&self) -> f64 {
        self.unclamped_failure_bound
    }

    /// True when the unclamped bound is at least 1, i.e. no guarantee.
    pub fn vacuous_bound(&self) -> bool {
        self.vacuous_bound
    }
}

/// The private output `Z = XP + Delta` plus its public metadata.
///
/// Neither the projection nor the noise is stored here.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReleasedMatrix {
    z: DataMatrix,
    params: PrivacyParams,
    n: usize,
    k: usize,
}

impl ReleasedMatrix {
    pub(crate) fn new(z: DataMatrix, params: PrivacyParams) -> Self {
        debug_assert_eq!(z.cols(), params.k);
        Self {
            n: z.rows(),
            k: z.cols(),
            z,
            params,
        }
    }

    pub fn z(&self) -> &DataMatrix {
        &self.z
    }

    pub fn params(&self) -> &PrivacyParams {
        &self.params
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn row(&self, i: usize) -> &[f64] {
        self.z.row(i)
    }

    pub fn into_matrix(self) -> DataMatrix {
        self.z
    }
}
