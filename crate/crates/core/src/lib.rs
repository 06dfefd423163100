//! Spatial blind source separation.
//!
//! Observed multivariate fields `x(s) = A z(s) + m(s)` are unmixed by
//! diagonalizing pairs or sets of scatter matrices. Local covariance
//! matrices weight cross-location products around the sample mean; local
//! difference matrices weight pairwise differences and so never estimate the
//! mean, which makes them robust to smooth drifts.
//!
//! ```
//! use nalgebra::DMatrix;
//! use sbss_core::{mdi, LocationSet};
//!
//! let locs = LocationSet::from_points(&[[0.0, 0.0], [1.0, 0.0]]).unwrap();
//! assert_eq!(locs.len(), 2);
//! assert_eq!(mdi(&DMatrix::identity(3, 3)).unwrap(), 0.0);
//! ```

pub mod bessel;
pub mod compositional;
pub mod error;
pub mod estimators;
pub mod kernel;
pub mod linalg;
pub mod metrics;
pub mod scatter;
pub mod sim;

pub use compositional::{clr, combined_loadings, ilr_pivot, CombinedLoadings, Composition, ContrastMatrix};
pub use error::{Result, SbssError};
pub use estimators::{
    fobi, recover_latent, sbss_jd, sbss_ldiff, sbss_ldiff_whitened, sbss_sd, Estimator, EstimatorWarning, Method,
    UnmixingResult, WeightCache, WhitenedOptions,
};
pub use kernel::{KernelSpec, LocationSet, PairWeights};
pub use linalg::{joint_diag, simultaneous_diag, JointDiagOptions, JointDiagResult, Order};
pub use metrics::{mdi, mdi_of};
pub use scatter::{covariance, ldiff, lcov, FieldSample, ScatterKind, ScatterMatrix};
pub use sim::{
    apply_drift, fbm_cov, matern_cov, mix, sample_locations, simulate_latent, CovModel, DomainSpec, DriftModel,
    DriftRealization, GaussianField, Pattern,
};
