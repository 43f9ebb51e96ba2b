//! The release mechanism: `Z = X P + Delta`.
//!
//! `P` is drawn from child stream 0 of the caller's seed and `Delta` from
//! child stream 1, so one seed reproduces a release. Both are dropped
//! before [`release`] returns.

use crate::error::{Error, Result};
use crate::matrix::DataMatrix;
use crate::noise::{sample_laplace_matrix, NoiseMatrix};
use crate::params::{PrivacyParams, ReleasedMatrix};
use crate::projection::{project, sample_projection, ProjectionMatrix};
use crate::rng::RngSeed;

pub const PROJECTION_STREAM: u64 = 0;
pub const NOISE_STREAM: u64 = 1;

fn draw(
    x: &DataMatrix,
    params: &PrivacyParams,
    rng: RngSeed,
) -> Result<(ProjectionMatrix, NoiseMatrix)> {
    if params.k() == 0 {
        return Err(Error::InvalidParameter(
            "projection dimension k must be at least 1".into(),
        ));
    }
    let p = sample_projection(x.cols(), params.k(), rng.derive(PROJECTION_STREAM))?;
    let noise = sample_laplace_matrix(x.rows(), params.k(), params.b(), rng.derive(NOISE_STREAM))?;
    Ok((p, noise))
}

fn compose(
    x: &DataMatrix,
    params: &PrivacyParams,
    p: &ProjectionMatrix,
    noise: &NoiseMatrix,
) -> Result<ReleasedMatrix> {
    let z = project(x, p)?.add(noise.values())?;
    Ok(ReleasedMatrix::new(z, params.clone()))
}

/// Releases `x` under `params`. The projection matrix is not returned.
pub fn release(x: &DataMatrix, params: &PrivacyParams, rng: RngSeed) -> Result<ReleasedMatrix> {
    let (p, noise) = draw(x, params, rng)?;
    compose(x, params, &p, &noise)
}

/// Same as [`release`] but also hands back the secret projection and noise.
/// Only for statistical checks of the mechanism's internals.
#[cfg(any(test, feature = "diagnostics"))]
pub fn release_with_transcript(
    x: &DataMatrix,
    params: &PrivacyParams,
    rng: RngSeed,
) -> Result<(ReleasedMatrix, ProjectionMatrix, NoiseMatrix)> {
    let (p, noise) = draw(x, params, rng)?;
    let z = compose(x, params, &p, &noise)?;
    Ok((z, p, noise))
}
