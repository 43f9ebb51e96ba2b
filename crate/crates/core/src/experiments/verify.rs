//! Monte-Carlo property suites for the mechanism's guarantees.

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

use super::{ExperimentKind, Summary};
use crate::error::{invalid, Result};
use crate::matrix::{squared_distance, DataMatrix};
use crate::mechanism::{release, NOISE_STREAM, PROJECTION_STREAM};
use crate::noise::{calibrate_element_wise, calibrate_row_wise, sample_laplace_matrix};
use crate::params::PrivacyParams;
use crate::projection::{max_row_norm2, project, sample_projection};
use crate::recovery::{
    analytic_variance, chebyshev_error_bound, recover_distance, CROSS_TERM_COEFFICIENT,
};
use crate::rng::RngSeed;

/// Canonical suite names; [`resolve_suite`] also accepts a few aliases.
pub const SUITES: [&str; 7] = [
    "jl-unbiased",
    "element-sensitivity",
    "row-norm-tail",
    "coordinate-tail",
    "unbiased-recovery",
    "recovery-variance",
    "chebyshev",
];

pub fn resolve_suite(name: &str) -> Result<Vec<&'static str>> {
    let canonical = match name {
        "all" => return Ok(SUITES.to_vec()),
        "jl" => "jl-unbiased",
        "lemma1" => "element-sensitivity",
        "lemma2" => "row-norm-tail",
        "lemma4" => "coordinate-tail",
        "claim6" => "unbiased-recovery",
        "claim7" => "recovery-variance",
        other => SUITES
            .iter()
            .copied()
            .find(|s| *s == other)
            .ok_or_else(|| {
                invalid(format!(
                    "unknown suite {other:?}; known: all, {}",
                    SUITES.join(", ")
                ))
            })?,
    };
    Ok(vec![canonical])
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PropertyResult {
    pub suite: String,
    pub property: String,
    pub passed: bool,
    pub observed: f64,
    pub bound: f64,
    pub trials: usize,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyReport {
    pub experiment: ExperimentKind,
    pub seed: u64,
    pub results: Vec<PropertyResult>,
    pub all_passed: bool,
}

/// Runs the named suites. `trials` overrides each suite's default sample
/// count.
pub fn verify(suites: &[&str], seed: u64, trials: Option<usize>) -> Result<VerifyReport> {
    if trials == Some(0) {
        return Err(invalid("trials must be at least 1"));
    }
    let root = RngSeed::new(seed);
    let mut results = Vec::new();
    for (i, &suite) in suites.iter().enumerate() {
        let stream = root.derive(i as u64);
        let found = match suite {
            "jl-unbiased" => jl_unbiased(stream, trials.unwrap_or(100_000))?,
            "element-sensitivity" => element_sensitivity(stream, trials.unwrap_or(10_000))?,
            "row-norm-tail" => row_norm_tail(stream, trials.unwrap_or(100_000))?,
            "coordinate-tail" => coordinate_tail(stream, trials.unwrap_or(100_000))?,
            "unbiased-recovery" => unbiased_recovery(stream, trials.unwrap_or(100_000))?,
            "recovery-variance" => recovery_variance(stream, trials.unwrap_or(1_000_000))?,
            "chebyshev" => chebyshev(stream, trials.unwrap_or(100_000))?,
            other => return Err(invalid(format!("unknown suite {other:?}"))),
        };
        results.extend(found);
    }
    Ok(VerifyReport {
        experiment: ExperimentKind::Verify,
        seed,
        all_passed: results.iter().all(|r| r.passed),
        results,
    })
}

fn result(
    suite: &str,
    property: String,
    passed: bool,
    observed: f64,
    bound: f64,
    trials: usize,
    detail: String,
) -> PropertyResult {
    PropertyResult {
        suite: suite.to_owned(),
        property,
        passed,
        observed,
        bound,
        trials,
        detail,
    }
}

fn gaussian_vector(rng: &mut impl Rng, len: usize, scale: f64) -> Vec<f64> {
    (0..len)
        .map(|_| scale * rng.sample::<f64, _>(StandardNormal))
        .collect()
}

/// `E ||xP - yP||^2 = ||x - y||^2` for Gaussian projections.
fn jl_unbiased(stream: RngSeed, trials: usize) -> Result<Vec<PropertyResult>> {
    let (d, k, pairs) = (50, 10, 10);
    let mut rng = stream.derive(0).rng();
    let diffs = DataMatrix::new(pairs, d, gaussian_vector(&mut rng, pairs * d, 1.0))?;
    let truth: Vec<f64> = diffs
        .iter_rows()
        .map(|a| a.iter().map(|v| v * v).sum())
        .collect();
    let projections = stream.derive(1);
    let sums = (0..trials)
        .into_par_iter()
        .map(|t| -> Result<Vec<f64>> {
            let p = sample_projection(d, k, projections.derive(t as u64))?;
            let y = project(&diffs, &p)?;
            Ok(y.iter_rows()
                .map(|r| r.iter().map(|v| v * v).sum())
                .collect())
        })
        .try_reduce(
            || vec![0.0; pairs],
            |a, b| Ok(a.iter().zip(&b).map(|(x, y)| x + y).collect()),
        )?;
    let worst = sums
        .iter()
        .zip(&truth)
        .map(|(s, t)| (s / trials as f64 - t).abs() / t)
        .fold(0.0, f64::max);
    Ok(vec![result(
        "jl-unbiased",
        format!("mean projected squared distance within 1% of the original ({pairs} pairs, d={d}, k={k})"),
        worst <= 0.01,
        worst,
        0.01,
        trials,
        "observed = worst relative error over pairs".into(),
    )])
}

/// `||XA - X'A||_1 <= sqrt(k) max_i ||A_i||_2` for single-element changes
/// of magnitude at most 1.
fn element_sensitivity(stream: RngSeed, trials: usize) -> Result<Vec<PropertyResult>> {
    let (n, d, k) = (4, 8, 5);
    let outcomes: Vec<f64> = (0..trials)
        .into_par_iter()
        .map(|t| -> Result<f64> {
            let s = stream.derive(t as u64);
            let mut rng = s.derive(0).rng();
            let x = DataMatrix::new(n, d, gaussian_vector(&mut rng, n * d, 1.0))?;
            let mut changed = x.clone().into_values();
            let cell = rng.random_range(0..n * d);
            changed[cell] += rng.random_range(-1.0..=1.0);
            let x2 = DataMatrix::new(n, d, changed)?;
            let a = sample_projection(d, k, s.derive(1))?;
            let lhs: f64 = project(&x, &a)?
                .values()
                .iter()
                .zip(project(&x2, &a)?.values())
                .map(|(u, v)| (u - v).abs())
                .sum();
            Ok(lhs / ((k as f64).sqrt() * max_row_norm2(&a)))
        })
        .collect::<Result<_>>()?;
    let violations = outcomes.iter().filter(|&&r| r > 1.0).count();
    let worst = outcomes.iter().copied().fold(0.0, f64::max);
    Ok(vec![result(
        "element-sensitivity",
        "L1 change of the projection under a unit single-element change never exceeds sqrt(k) * max row norm".into(),
        violations == 0,
        violations as f64,
        0.0,
        trials,
        format!("largest ratio lhs/bound = {worst:.6}"),
    )])
}

/// `P(max_i ||P_i||_2 > 1 + sqrt(2x/k)) < d e^-x`.
fn row_norm_tail(stream: RngSeed, trials: usize) -> Result<Vec<PropertyResult>> {
    let (d, k) = (50, 10);
    let norms: Vec<f64> = (0..trials)
        .into_par_iter()
        .map(|t| sample_projection(d, k, stream.derive(t as u64)).map(|p| max_row_norm2(&p)))
        .collect::<Result<_>>()?;
    Ok([3.0, 5.0]
        .into_iter()
        .map(|x: f64| {
            let threshold = 1.0 + (2.0 * x / k as f64).sqrt();
            let freq = norms.iter().filter(|&&m| m > threshold).count() as f64 / trials as f64;
            let bound = d as f64 * (-x).exp();
            result(
                "row-norm-tail",
                format!("max row norm exceeds {threshold:.4} (x={x}, d={d}, k={k})"),
                freq <= bound,
                freq,
                bound,
                trials,
                String::new(),
            )
        })
        .collect())
}

/// `P(|sum_j v_j P_ji| > t) <= 2 exp(-k t^2 / (2 ||v||^2))` per coordinate.
fn coordinate_tail(stream: RngSeed, trials: usize) -> Result<Vec<PropertyResult>> {
    let v = [1.0, -2.0, 0.5, 3.0, 0.0, -1.0, 2.0, 0.25];
    let k = 10;
    let x = DataMatrix::new(1, v.len(), v.to_vec())?;
    let norm2: f64 = v.iter().map(|a| a * a).sum();
    let coords: Vec<Vec<f64>> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let p = sample_projection(v.len(), k, stream.derive(t as u64))?;
            Ok(project(&x, &p)?.into_values())
        })
        .collect::<Result<_>>()?;
    Ok([1.0, 2.0, 3.0]
        .into_iter()
        .map(|s: f64| {
            let t = s * (norm2 / k as f64).sqrt();
            let bound = 2.0 * (-(k as f64) * t * t / (2.0 * norm2)).exp();
            let worst = (0..k)
                .map(|i| coords.iter().filter(|c| c[i].abs() > t).count() as f64 / trials as f64)
                .fold(0.0, f64::max);
            result(
                "coordinate-tail",
                format!("|<v, P column>| exceeds t={t:.4}, worst of {k} coordinates"),
                worst <= bound,
                worst,
                bound,
                trials,
                String::new(),
            )
        })
        .collect())
}

/// Draws of the recovered distance for the pair `(x_i, x_j)` through the
/// full release path.
fn recovered_draws(
    xi: &[f64],
    xj: &[f64],
    params: &PrivacyParams,
    stream: RngSeed,
    trials: usize,
) -> Result<Vec<f64>> {
    let x = DataMatrix::from_rows(&[xi, xj])?;
    (0..trials)
        .into_par_iter()
        .map(|t| {
            let z = release(&x, params, stream.derive(t as u64))?;
            Ok(recover_distance(z.row(0), z.row(1), params.k(), params.sigma2())?.estimate)
        })
        .collect()
}

fn unbiased_recovery(stream: RngSeed, trials: usize) -> Result<Vec<PropertyResult>> {
    let (d, k, pairs) = (6, 4, 20);
    let mut out = Vec::new();
    for (m, params) in [
        calibrate_element_wise(k, 4.0, d)?,
        calibrate_row_wise(k, 4.0, 1.0, 1.0)?,
    ]
    .into_iter()
    .enumerate()
    {
        let mut rng = stream.derive(2 * m as u64).rng();
        let mut worst = 0.0f64;
        for p in 0..pairs {
            let xi = gaussian_vector(&mut rng, d, 1.0);
            let dir = gaussian_vector(&mut rng, d, 1.0);
            let norm = dir.iter().map(|v| v * v).sum::<f64>().sqrt();
            let dist = 0.5 * (p + 1) as f64;
            let xj: Vec<f64> = xi
                .iter()
                .zip(&dir)
                .map(|(a, u)| a + dist * u / norm)
                .collect();
            let truth = squared_distance(&xi, &xj);
            let draws = recovered_draws(
                &xi,
                &xj,
                &params,
                stream.derive(2 * m as u64 + 1).derive(p as u64),
                trials,
            )?;
            let s = Summary::of(&draws);
            worst = worst.max((s.mean - truth).abs() / s.std_error);
        }
        out.push(result(
            "unbiased-recovery",
            format!(
                "recovered squared distance unbiased, {} mode, {pairs} pairs",
                params.mode()
            ),
            worst < 3.0,
            worst,
            3.0,
            trials,
            "observed = largest |mean - truth| / standard error over pairs".into(),
        ));
    }
    Ok(out)
}

fn recovery_variance(stream: RngSeed, trials: usize) -> Result<Vec<PropertyResult>> {
    let (d, k) = (10, 10);
    // b = 1, so sigma2 = 2.
    let params = calibrate_element_wise(k, 2.0 * (k as f64).sqrt(), d)?;
    let sigma2 = params.sigma2();
    let mut a = vec![0.0; d];
    a[0] = 4.0;
    let dist2 = 16.0;
    let x = DataMatrix::from_rows(&[vec![0.0; d], a.iter().map(|v| -v).collect()])?;
    let parts: Vec<[f64; 4]> = (0..trials)
        .into_par_iter()
        .map(|t| -> Result<[f64; 4]> {
            let s = stream.derive(t as u64);
            let p = sample_projection(d, k, s.derive(PROJECTION_STREAM))?;
            let noise = sample_laplace_matrix(2, k, params.b(), s.derive(NOISE_STREAM))?;
            let y = project(&x, &p)?;
            let ap: Vec<f64> = y.row(0).iter().zip(y.row(1)).map(|(u, v)| u - v).collect();
            let delta: Vec<f64> = noise
                .values()
                .row(0)
                .iter()
                .zip(noise.values().row(1))
                .map(|(u, v)| u - v)
                .collect();
            let z1: f64 = ap.iter().map(|v| v * v).sum();
            let z2: f64 = delta.iter().map(|v| v * v).sum();
            let z3: f64 = 2.0 * ap.iter().zip(&delta).map(|(u, v)| u * v).sum::<f64>();
            Ok([z1, z2, z3, z1 + z2 + z3 - 2.0 * k as f64 * sigma2])
        })
        .collect::<Result<_>>()?;
    let column = |i: usize| Summary::of(&parts.iter().map(|p| p[i]).collect::<Vec<_>>());
    let (s1, s2, s3, sd) = (column(0), column(1), column(2), column(3));
    let var = |s: &Summary| s.std * s.std;
    let expected = analytic_variance(dist2, k, sigma2)?;
    let rel = |obs: f64, exp: f64| (obs - exp).abs() / exp;
    let coefficient = var(&s3) / (sigma2 * dist2);
    Ok(vec![
        result(
            "recovery-variance",
            "projection term variance (2/k) dist2^2".into(),
            rel(var(&s1), expected.var_z1) <= 0.05,
            var(&s1),
            expected.var_z1,
            trials,
            "tolerance 5% relative".into(),
        ),
        result(
            "recovery-variance",
            "noise term variance 14 k sigma2^2".into(),
            rel(var(&s2), expected.var_z2) <= 0.05,
            var(&s2),
            expected.var_z2,
            trials,
            "tolerance 5% relative".into(),
        ),
        result(
            "recovery-variance",
            "cross term has zero mean".into(),
            s3.mean.abs() < 3.0 * s3.std_error,
            s3.mean,
            3.0 * s3.std_error,
            trials,
            "bound = 3 standard errors".into(),
        ),
        result(
            "recovery-variance",
            format!("cross term coefficient (closed form uses {CROSS_TERM_COEFFICIENT})"),
            rel(coefficient, CROSS_TERM_COEFFICIENT) <= 0.05,
            coefficient,
            CROSS_TERM_COEFFICIENT,
            trials,
            "observed = Var(cross term) / (sigma2 dist2); the uncorrected closed form assumes 4"
                .into(),
        ),
        result(
            "recovery-variance",
            "total variance matches the sum of the three terms".into(),
            rel(var(&sd), expected.total) <= 0.03,
            var(&sd),
            expected.total,
            trials,
            format!(
                "tolerance 3% relative; uncorrected closed form gives {} (off by {:+.1}%)",
                expected.uncorrected_total,
                100.0 * (expected.uncorrected_total - var(&sd)) / var(&sd)
            ),
        ),
    ])
}

fn chebyshev(stream: RngSeed, trials: usize) -> Result<Vec<PropertyResult>> {
    let d = 20;
    let configs = [
        (calibrate_element_wise(2, 4.0, d)?, 16.0),
        (calibrate_element_wise(10, 4.0, d)?, 16.0),
        (calibrate_row_wise(20, 4.0, 1.0, 1.0)?, 4.0),
    ];
    let mut out = Vec::new();
    for (c, (params, dist2)) in configs.into_iter().enumerate() {
        let xi = vec![0.0; d];
        let mut xj = vec![0.0; d];
        xj[0] = f64::sqrt(dist2);
        let draws = recovered_draws(&xi, &xj, &params, stream.derive(c as u64), trials)?;
        let variance = analytic_variance(dist2, params.k(), params.sigma2())?.total;
        for mult in [5.0, 10.0, 20.0] {
            let lambda = mult * params.sigma2();
            let freq = draws
                .iter()
                .filter(|&&v| (v - dist2).abs() > lambda)
                .count() as f64
                / trials as f64;
            let bound = chebyshev_error_bound(variance, lambda)?;
            out.push(result(
                "chebyshev",
                format!(
                    "{} mode k={} dist2={dist2}: exceedance of lambda={mult}*sigma2",
                    params.mode(),
                    params.k()
                ),
                freq <= bound,
                freq,
                bound,
                trials,
                String::new(),
            ));
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suite_names() {
        assert_eq!(resolve_suite("lemma1").unwrap(), ["element-sensitivity"]);
        assert_eq!(resolve_suite("claim7").unwrap(), ["recovery-variance"]);
        assert_eq!(resolve_suite("chebyshev").unwrap(), ["chebyshev"]);
        assert_eq!(resolve_suite("all").unwrap().len(), SUITES.len());
        assert!(resolve_suite("lemma3").is_err());
    }

    #[test]
    fn quick_run_of_every_suite() {
        let report = verify(&SUITES, 1, Some(2_000)).unwrap();
        assert!(report.results.len() >= SUITES.len());
        let sensitivity = report
            .results
            .iter()
            .find(|r| r.suite == "element-sensitivity")
            .unwrap();
        assert!(sensitivity.passed);
    }
}
