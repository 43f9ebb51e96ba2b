//! Laplace noise and privacy calibration.

use rand::distr::Open01;
use rand::Rng;
use serde::Serialize;

use crate::error::{invalid, Result};
use crate::matrix::DataMatrix;
use crate::params::{PrivacyMode, PrivacyParams};
use crate::rng::RngSeed;

/// `n x k` matrix of i.i.d. Laplace(0, b) entries.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NoiseMatrix {
    values: DataMatrix,
    b: f64,
}

impl NoiseMatrix {
    pub fn values(&self) -> &DataMatrix {
        &self.values
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn n(&self) -> usize {
        self.values.rows()
    }

    pub fn k(&self) -> usize {
        self.values.cols()
    }

    #[cfg(test)]
    pub(crate) fn zeros(n: usize, k: usize, b: f64) -> Self {
        Self {
            values: DataMatrix::zeros(n, k).unwrap(),
            b,
        }
    }
}

/// Inverse CDF of Laplace(0, b) on `u` uniform in `(-1/2, 1/2)`.
pub fn laplace_from_uniform(u: f64, b: f64) -> f64 {
    -b * u.signum() * (1.0 - 2.0 * u.abs()).ln()
}

pub(crate) fn sample_laplace<R: Rng + ?Sized>(rng: &mut R, b: f64) -> f64 {
    let v: f64 = rng.sample(Open01);
    laplace_from_uniform(v - 0.5, b)
}

pub fn sample_laplace_matrix(n: usize, k: usize, b: f64, rng: RngSeed) -> Result<NoiseMatrix> {
    if !(b > 0.0 && b.is_finite()) {
        return Err(invalid(format!(
            "Laplace scale must be positive and finite, got {b}"
        )));
    }
    let mut rng = rng.rng();
    let values = (0..n * k).map(|_| sample_laplace(&mut rng, b)).collect();
    Ok(NoiseMatrix {
        values: DataMatrix::new(n, k, values)?,
        b,
    })
}

fn check_common(k: usize, epsilon: f64) -> Result<()> {
    if k == 0 {
        return Err(invalid("projection dimension k must be at least 1"));
    }
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(invalid(format!(
            "epsilon must be positive and finite, got {epsilon}"
        )));
    }
    Ok(())
}

/// Calibration for single-element neighbours with `||X - X'||_1 <= 1`.
///
/// `c = 2 sqrt(k)`; the guarantee fails with probability at most
/// `d exp(-k/2)`.
pub fn calibrate_element_wise(k: usize, epsilon: f64, d: usize) -> Result<PrivacyParams> {
    check_common(k, epsilon)?;
    if d == 0 {
        return Err(invalid("input dimension d must be at least 1"));
    }
    let c = 2.0 * (k as f64).sqrt();
    let b = c / epsilon;
    let unclamped = d as f64 * (-(k as f64) / 2.0).exp();
    Ok(PrivacyParams {
        mode: PrivacyMode::ElementWise,
        epsilon,
        k,
        d: Some(d),
        alpha: None,
        t: None,
        t_multiplier: None,
        c,
        b,
        sigma2: 2.0 * b * b,
        failure_bound: unclamped.min(1.0),
        unclamped_failure_bound: unclamped,
        vacuous_bound: unclamped >= 1.0,
    })
}

/// Smallest admissible tail parameter for row-wise calibration,
/// `sqrt(2 ln(2k) alpha / k)`.
pub fn min_row_tail(k: usize, alpha: f64) -> f64 {
    let k = k as f64;
    (2.0 * (2.0 * k).ln() * alpha / k).sqrt()
}

/// Calibration for single-row neighbours with `||X_m - X'_m||_2^2 <= alpha`.
///
/// `t = t_multiplier * min_row_tail(k, alpha)`, `c = k t`. The failure bound
/// `2k exp(-k t^2 / (2 alpha))` simplifies to `(2k)^(1 - t_multiplier^2)`,
/// which is exactly 1 at the smallest admissible `t`.
pub fn calibrate_row_wise(
    k: usize,
    epsilon: f64,
    alpha: f64,
    t_multiplier: f64,
) -> Result<PrivacyParams> {
    check_common(k, epsilon)?;
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(invalid(format!(
            "alpha must be positive and finite, got {alpha}"
        )));
    }
    if !(t_multiplier >= 1.0 && t_multiplier.is_finite()) {
        return Err(invalid(format!(
            "t multiplier must be at least 1 (t below its minimum voids the guarantee), got {t_multiplier}"
        )));
    }
    let t = t_multiplier * min_row_tail(k, alpha);
    let c = k as f64 * t;
    let b = c / epsilon;
    let unclamped = (((2 * k) as f64).ln() * (1.0 - t_multiplier * t_multiplier)).exp();
    Ok(PrivacyParams {
        mode: PrivacyMode::RowWise,
        epsilon,
        k,
        d: None,
        alpha: Some(alpha),
        t: Some(t),
        t_multiplier: Some(t_multiplier),
        c,
        b,
        sigma2: 2.0 * b * b,
        failure_bound: unclamped.min(1.0),
        unclamped_failure_bound: unclamped,
        vacuous_bound: unclamped >= 1.0,
    })
}

/// Calibrates `mode` with the shared defaults for the parameters the mode
/// does not use.
pub fn calibrate(
    mode: PrivacyMode,
    k: usize,
    epsilon: f64,
    d: usize,
    alpha: f64,
    t_multiplier: f64,
) -> Result<PrivacyParams> {
    match mode {
        PrivacyMode::ElementWise => calibrate_element_wise(k, epsilon, d),
        PrivacyMode::RowWise => calibrate_row_wise(k, epsilon, alpha, t_multiplier),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs()
    }

    #[test]
    fn element_wise_k4_eps4() {
        let p = calibrate_element_wise(4, 4.0, 10).unwrap();
        assert_eq!(p.c(), 4.0);
        assert_eq!(p.b(), 1.0);
        assert_eq!(p.sigma2(), 2.0);
        assert_eq!(p.mode(), PrivacyMode::ElementWise);
    }

    #[test]
    fn element_wise_failure_bounds() {
        let p = calibrate_element_wise(20, 4.0, 100).unwrap();
        assert!(rel(p.failure_bound(), 4.539_992_976_248_485e-3) < 1e-12);
        assert!(!p.vacuous_bound());

        let p = calibrate_element_wise(2, 4.0, 3).unwrap();
        assert_eq!(p.failure_bound(), 1.0);
        assert!(p.vacuous_bound());
        assert!(rel(p.unclamped_failure_bound(), 1.103_638_323_514_327) < 1e-12);
    }

    #[test]
    fn element_wise_scale_identity() {
        for k in 1..=64 {
            for eps in [0.1, 1.0, 4.0, 10.0] {
                let p = calibrate_element_wise(k, eps, 5).unwrap();
                assert!(rel(p.b() * eps, 2.0 * (k as f64).sqrt()) < 1e-15);
                assert_eq!(p.sigma2(), 2.0 * p.b() * p.b());
            }
        }
    }

    #[test]
    fn row_wise_at_minimum_tail() {
        let p = calibrate_row_wise(2, 4.0, 1.0, 1.0).unwrap();
        assert!(rel(p.t().unwrap(), 1.177_410_022_515_474_7) < 1e-14);
        assert!(rel(p.c(), 2.354_820_045_030_949_4) < 1e-14);
        assert!(rel(p.b(), 0.588_705_011_257_737_3) < 1e-14);
        assert_eq!(p.failure_bound(), 1.0);
        assert!(p.vacuous_bound());

        for k in [1, 3, 7, 20, 100] {
            for alpha in [0.25, 1.0, 9.0] {
                let p = calibrate_row_wise(k, 1.0, alpha, 1.0).unwrap();
                assert_eq!(p.failure_bound(), 1.0, "k={k} alpha={alpha}");
            }
        }
    }

    #[test]
    fn row_wise_doubled_tail() {
        let p = calibrate_row_wise(20, 4.0, 1.0, 2.0).unwrap();
        assert!(rel(p.t().unwrap(), 1.214_722_923_816_610_3) < 1e-14);
        assert!(rel(p.c(), 24.294_458_476_332_207) < 1e-14);
        assert!(rel(p.b(), 6.073_614_619_083_052) < 1e-14);
        assert!(rel(p.failure_bound(), 1.5625e-5) < 1e-12);
        // Same value through the unsimplified expression.
        let t = p.t().unwrap();
        assert!(rel(p.failure_bound(), 40.0 * (-20.0 * t * t / 2.0).exp()) < 1e-10);
    }

    #[test]
    fn row_wise_failure_decreases_with_multiplier() {
        for k in [2, 5, 20] {
            let mut prev = f64::INFINITY;
            for step in 0..40 {
                let m = 1.0 + 0.05 * step as f64;
                let fb = calibrate_row_wise(k, 4.0, 1.0, m)
                    .unwrap()
                    .unclamped_failure_bound();
                assert!(fb < prev);
                prev = fb;
            }
        }
    }

    #[test]
    fn row_versus_element_scale() {
        for k in 4..=64 {
            let e = calibrate_element_wise(k, 4.0, 100).unwrap().b();
            let r = calibrate_row_wise(k, 4.0, 1.0, 1.0).unwrap().b();
            assert!(r > e, "k={k}");
            let ratio = ((2.0 * k as f64).ln() / 2.0).sqrt();
            assert!(rel(r / e, ratio) < 1e-12);
        }
        let e = calibrate_element_wise(2, 4.0, 100).unwrap().b();
        let r = calibrate_row_wise(2, 4.0, 1.0, 1.0).unwrap().b();
        assert!(r < e);
    }

    #[test]
    fn calibration_errors() {
        assert!(calibrate_element_wise(4, 0.0, 3).is_err());
        assert!(calibrate_element_wise(4, -1.0, 3).is_err());
        assert!(calibrate_element_wise(0, 1.0, 3).is_err());
        assert!(calibrate_row_wise(4, 1.0, 1.0, 0.99).is_err());
        assert!(calibrate_row_wise(4, 1.0, 0.0, 1.0).is_err());
        assert!(sample_laplace_matrix(2, 2, 0.0, RngSeed::new(1)).is_err());
        assert!(sample_laplace_matrix(2, 2, -1.0, RngSeed::new(1)).is_err());
    }

    #[test]
    fn inverse_cdf_values() {
        assert_eq!(laplace_from_uniform(0.0, 2.0), 0.0);
        // F^-1(3/4) = b ln 2
        assert!((laplace_from_uniform(0.25, 2.0) - 2.0 * 2f64.ln()).abs() < 1e-15);
        assert!((laplace_from_uniform(-0.25, 2.0) + 2.0 * 2f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn laplace_moments() {
        let n = 1_000_000;
        let b = 1.0;
        let m = sample_laplace_matrix(1000, 1000, b, RngSeed::new(99)).unwrap();
        let v = m.values().values();
        assert_eq!(v.len(), n);
        let mean = v.iter().sum::<f64>() / n as f64;
        let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        let tail = v.iter().filter(|x| x.abs() > 1.0).count() as f64 / n as f64;
        assert!(mean.abs() < 3.0 * b * 2f64.sqrt() / 1e3, "mean {mean}");
        assert!(rel(var, 2.0) < 0.02, "var {var}");
        assert!(rel(tail, 0.367_879_441_171_442_3) < 0.02, "tail {tail}");
    }

    #[test]
    fn laplace_deterministic() {
        let a = sample_laplace_matrix(5, 3, 1.5, RngSeed::new(3)).unwrap();
        let b = sample_laplace_matrix(5, 3, 1.5, RngSeed::new(3)).unwrap();
        assert_eq!(a, b);
    }
}
