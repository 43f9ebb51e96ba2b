//! Differentially private data release by random projection plus Laplace
//! noise.
//!
//! A database `X` (`n x d`) is released as `Z = X P + Delta`, where `P` is a
//! secret `d x k` Gaussian projection with entries `N(0, 1/k)` and `Delta`
//! is i.i.d. Laplace noise with scale `b = c / epsilon`. The sensitivity
//! constant `c` is calibrated either for single-element or single-row
//! changes (see [`noise`]). Pairwise squared distances of the original
//! rows are recovered without bias from `Z` alone (see [`recovery`]).
//!
//! ```
//! use jlrelease::{calibrate_element_wise, release, pairwise_distances, DataMatrix, RngSeed};
//!
//! let x = DataMatrix::from_rows(&[[0.0, 0.0, 0.0], [4.0, 0.0, 0.0]]).unwrap();
//! let params = calibrate_element_wise(2, 4.0, x.cols()).unwrap();
//! let z = release(&x, &params, RngSeed::new(7)).unwrap();
//! assert_eq!((z.n(), z.k()), (2, 2));
//! let d = pairwise_distances(&z);
//! assert_eq!(d.get(0, 1), d.get(1, 0));
//! ```

pub mod clustering;
pub mod datagen;
pub mod error;
pub mod experiments;
pub mod io;
pub mod matrix;
pub mod mechanism;
pub mod noise;
pub mod params;
pub mod projection;
pub mod recovery;
pub mod rng;

pub use clustering::{clustering_accuracy, kmeans, ClusteringResult, KMeansConfig};
pub use datagen::{make_blobs, LabeledDataset};
pub use error::{Error, Result};
pub use io::{read_csv, read_manifest, write_csv, write_manifest, RunManifest};
pub use matrix::DataMatrix;
pub use mechanism::release;
#[cfg(any(test, feature = "diagnostics"))]
pub use mechanism::release_with_transcript;
pub use noise::{
    calibrate, calibrate_element_wise, calibrate_row_wise, sample_laplace_matrix, NoiseMatrix,
};
pub use params::{PrivacyMode, PrivacyParams, ReleasedMatrix};
pub use projection::{max_row_norm2, project, sample_projection, ProjectionMatrix};
pub use recovery::{
    analytic_variance, chebyshev_error_bound, pairwise_distances, recover_distance,
    RecoveredDistance, VarianceReport,
};
pub use rng::{derive_stream, RngSeed};
