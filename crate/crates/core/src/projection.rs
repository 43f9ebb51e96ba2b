//! Gaussian Johnson-Lindenstrauss projections.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::error::{invalid, Result};
use crate::matrix::DataMatrix;
use crate::rng::RngSeed;

/// `d x k` projection with entries i.i.d. `N(0, 1/k)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProjectionMatrix {
    values: DataMatrix,
}

impl ProjectionMatrix {
    /// Wraps an arbitrary `d x k` matrix, e.g. a hand-built one in tests.
    pub fn from_matrix(values: DataMatrix) -> Self {
        Self { values }
    }

    pub fn d(&self) -> usize {
        self.values.rows()
    }

    pub fn k(&self) -> usize {
        self.values.cols()
    }

    pub fn values(&self) -> &DataMatrix {
        &self.values
    }

    pub fn row(&self, i: usize) -> &[f64] {
        self.values.row(i)
    }
}

pub fn sample_projection(d: usize, k: usize, rng: RngSeed) -> Result<ProjectionMatrix> {
    if d == 0 || k == 0 {
        return Err(invalid(format!(
            "projection needs d >= 1 and k >= 1, got d={d}, k={k}"
        )));
    }
    if let Some(msg) = dimension_warning(d, k) {
        log::debug!("{msg}");
    }
    let std = (k as f64).recip().sqrt();
    let mut rng = rng.rng();
    let values = (0..d * k)
        .map(|_| std * rng.sample::<f64, _>(StandardNormal))
        .collect();
    Ok(ProjectionMatrix {
        values: DataMatrix::new(d, k, values)?,
    })
}

/// `Y = X P`.
pub fn project(x: &DataMatrix, p: &ProjectionMatrix) -> Result<DataMatrix> {
    x.matmul(&p.values)
}

/// Largest Euclidean norm over the rows of `p`.
pub fn max_row_norm2(p: &ProjectionMatrix) -> f64 {
    p.values
        .iter_rows()
        .map(|row| row.iter().map(|v| v * v).sum::<f64>().sqrt())
        .fold(0.0, f64::max)
}

/// Returned when the projection does not reduce dimension.
pub fn dimension_warning(d: usize, k: usize) -> Option<String> {
    (k >= d).then(|| {
        format!("projection dimension k={k} is not smaller than the input dimension d={d}")
    })
}

/// Distortion `Lambda` for which `k >= 4 ln n / (Lambda^2/2 - Lambda^3/3)`
/// holds, i.e. the pairwise-distance distortion a Gaussian projection to
/// `k` dimensions guarantees w.h.p. for `n` points. `None` when no
/// `Lambda <= 1` qualifies.
pub fn jl_distortion(k: usize, n: usize) -> Option<f64> {
    if k == 0 || n == 0 {
        return None;
    }
    let need = 4.0 * (n as f64).ln() / k as f64;
    let gain = |l: f64| l * l / 2.0 - l * l * l / 3.0;
    if need <= 0.0 {
        return Some(0.0);
    }
    if need > gain(1.0) {
        return None;
    }
    let (mut lo, mut hi) = (0.0, 1.0);
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if gain(mid) >= need {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Some(hi)
}
