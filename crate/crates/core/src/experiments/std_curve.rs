use serde::Serialize;

use super::ExperimentKind;
use crate::error::{invalid, Result};
use crate::noise::calibrate;
use crate::params::PrivacyMode;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StdCurveConfig {
    pub k_values: Vec<usize>,
    pub epsilon: f64,
    pub alpha: f64,
    pub t_multiplier: f64,
    /// Variance of the unprojected data per coordinate.
    pub data_variance: f64,
}

impl Default for StdCurveConfig {
    fn default() -> Self {
        Self {
            k_values: (2..=20).collect(),
            epsilon: 4.0,
            alpha: 1.0,
            t_multiplier: 1.0,
            data_variance: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StdCurvePoint {
    pub k: usize,
    pub mode: PrivacyMode,
    pub b: f64,
    /// `sqrt(data_variance + 2 b^2)`.
    pub std: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StdCurveReport {
    pub experiment: ExperimentKind,
    pub config: StdCurveConfig,
    pub points: Vec<StdCurvePoint>,
}

impl StdCurveReport {
    pub fn point(&self, k: usize, mode: PrivacyMode) -> Option<&StdCurvePoint> {
        self.points.iter().find(|p| p.k == k && p.mode == mode)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("k,mode,b,std\n");
        for p in &self.points {
            s.push_str(&format!("{},{},{},{}\n", p.k, p.mode, p.b, p.std));
        }
        s
    }
}

/// Standard deviation of a released coordinate as a function of `k`, for
/// unit-variance data plus Laplace noise of variance `2 b^2`.
pub fn std_curve(config: &StdCurveConfig) -> Result<StdCurveReport> {
    if config.k_values.is_empty() {
        return Err(invalid("no k values given"));
    }
    let mut points = Vec::with_capacity(2 * config.k_values.len());
    for &k in &config.k_values {
        for mode in PrivacyMode::ALL {
            // The scale does not depend on d; any d >= 1 calibrates.
            let params = calibrate(
                mode,
                k,
                config.epsilon,
                1,
                config.alpha,
                config.t_multiplier,
            )?;
            let b = params.b();
            points.push(StdCurvePoint {
                k,
                mode,
                b,
                std: (config.data_variance + 2.0 * b * b).sqrt(),
            });
        }
    }
    Ok(StdCurveReport {
        experiment: ExperimentKind::StdCurve,
        config: config.clone(),
        points,
    })
}
