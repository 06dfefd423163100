//! Unmixing estimators: four spatial BSS variants built on local covariance
//! and local difference matrices, plus FOBI as a spatially agnostic baseline.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Result, SbssError};
use crate::kernel::{KernelSpec, LocationSet, PairWeights};
use crate::linalg::{self, DiagWarning, JointDiagOptions, Order};
use crate::scatter::{self, FieldSample, Normalization, ScatterMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    /// Covariance and one local covariance matrix, simultaneously diagonalized.
    LcovSd,
    /// Covariance whitening followed by joint diagonalization of several
    /// local covariance matrices.
    LcovJd,
    /// Covariance and one local difference matrix, simultaneously diagonalized.
    LdiffSd,
    /// Two local difference matrices; the first one whitens.
    LdiffWhitened,
    Fobi,
}

impl Method {
    pub const ALL: [Method; 5] = [
        Method::LcovSd,
        Method::LcovJd,
        Method::LdiffSd,
        Method::LdiffWhitened,
        Method::Fobi,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Method::LcovSd => "lcov_sd",
            Method::LcovJd => "lcov_jd",
            Method::LdiffSd => "ldiff_sd",
            Method::LdiffWhitened => "ldiff_whitened",
            Method::Fobi => "fobi",
        }
    }

    /// `recover_latent` centering used when the caller does not choose.
    /// Drift-robust whitening keeps the drift in the recovered components.
    pub fn centers_by_default(&self) -> bool {
        !matches!(self, Method::LdiffWhitened)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = SbssError;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| SbssError::InvalidParameter(format!("unknown method '{s}'")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum EstimatorWarning {
    /// Consecutive diagonal values closer than the identifiability threshold.
    NearEqualDiagonal { index: usize, gap: f64 },
    /// FOBI eigenvalues `index` and `index + 1` differ by less than their
    /// sampling noise under Gaussian components.
    IndistinctKurtosis { index: usize, gap: f64, threshold: f64 },
    /// Joint diagonalization stopped at the sweep limit.
    NotConverged { sweeps: usize },
}

impl From<DiagWarning> for EstimatorWarning {
    fn from(w: DiagWarning) -> Self {
        match w {
            DiagWarning::NearEqualValues { index, gap } => EstimatorWarning::NearEqualDiagonal { index, gap },
        }
    }
}

#[derive(Debug, Clone)]
pub struct UnmixingResult {
    pub w: DMatrix<f64>,
    pub method: Method,
    pub diag_values: Option<DVector<f64>>,
    pub converged: bool,
    pub warnings: Vec<EstimatorWarning>,
}

impl UnmixingResult {
    pub fn has_warnings(&self) -> bool {
        !self.warnings.is_empty()
    }
}

/// Pair weights per kernel for one location set, built on first use.
#[derive(Debug, Default)]
pub struct WeightCache {
    entries: Vec<PairWeights>,
}

impl WeightCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn weights(&mut self, spec: &KernelSpec, locs: &LocationSet) -> Result<&PairWeights> {
        let pos = match self
            .entries
            .iter()
            .position(|w| w.spec() == spec && w.len() == locs.len())
        {
            Some(pos) => pos,
            None => {
                self.entries.push(PairWeights::new(spec, locs)?);
                self.entries.len() - 1
            }
        };
        Ok(&self.entries[pos])
    }

    pub fn lcov(&mut self, sample: &FieldSample, spec: &KernelSpec) -> Result<ScatterMatrix> {
        let w = self.weights(spec, sample.locations())?;
        scatter::lcov_with(sample, w, Normalization::Locations)
    }

    pub fn ldiff(&mut self, sample: &FieldSample, spec: &KernelSpec) -> Result<ScatterMatrix> {
        if spec.is_zero_lag() {
            return Err(SbssError::ZeroLagDifference);
        }
        let w = self.weights(spec, sample.locations())?;
        scatter::ldiff_with(sample, w, Normalization::Locations)
    }
}

/// Options for [`sbss_ldiff_whitened`].
#[derive(Debug, Clone, Copy, Default)]
pub struct WhitenedOptions {
    /// Rescale rows of `W` so every recovered component has unit sample variance.
    pub unit_variance: bool,
}

/// An estimator together with its kernel configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Estimator {
    pub method: Method,
    #[serde(default)]
    pub kernels: Vec<KernelSpec>,
}

impl Estimator {
    pub fn new(method: Method, kernels: Vec<KernelSpec>) -> Result<Self> {
        let e = Self { method, kernels };
        e.validate()?;
        Ok(e)
    }

    pub fn validate(&self) -> Result<()> {
        for k in &self.kernels {
            k.validate()?;
        }
        let count = self.kernels.len();
        let ok = match self.method {
            Method::LcovSd | Method::LdiffSd => count == 1,
            Method::LcovJd => count >= 1,
            Method::LdiffWhitened => count == 2,
            Method::Fobi => count == 0,
        };
        if !ok {
            return Err(SbssError::InvalidParameter(format!(
                "method {} does not take {count} kernel(s)",
                self.method
            )));
        }
        Ok(())
    }

    pub fn fit(&self, sample: &FieldSample, cache: &mut WeightCache) -> Result<UnmixingResult> {
        self.validate()?;
        match self.method {
            Method::LcovSd => sd_cached(sample, &self.kernels[0], cache, Method::LcovSd),
            Method::LcovJd => jd_cached(sample, &self.kernels, cache, JointDiagOptions::default()),
            Method::LdiffSd => sd_cached(sample, &self.kernels[0], cache, Method::LdiffSd),
            Method::LdiffWhitened => whitened_cached(
                sample,
                &self.kernels[0],
                &self.kernels[1],
                cache,
                WhitenedOptions::default(),
            ),
            Method::Fobi => fobi(sample),
        }
    }
}

/// Simultaneous diagonalization of the covariance and `LCov_f`, diagonal
/// values decreasing.
pub fn sbss_sd(sample: &FieldSample, f: &KernelSpec) -> Result<UnmixingResult> {
    sd_cached(sample, f, &mut WeightCache::new(), Method::LcovSd)
}

/// Simultaneous diagonalization of the covariance and `LDiff_f`, diagonal
/// values increasing.
pub fn sbss_ldiff(sample: &FieldSample, f: &KernelSpec) -> Result<UnmixingResult> {
    sd_cached(sample, f, &mut WeightCache::new(), Method::LdiffSd)
}

fn sd_cached(sample: &FieldSample, f: &KernelSpec, cache: &mut WeightCache, method: Method) -> Result<UnmixingResult> {
    let cov = scatter::covariance(sample);
    let (local, order) = match method {
        Method::LcovSd => (cache.lcov(sample, f)?, Order::Decreasing),
        Method::LdiffSd => (cache.ldiff(sample, f)?, Order::Increasing),
        _ => unreachable!("sd_cached only serves the single-kernel methods"),
    };
    let r = linalg::simultaneous_diag(&cov.m, &local.m, order)?;
    Ok(UnmixingResult {
        w: r.w,
        method,
        diag_values: Some(r.diag_values),
        converged: true,
        warnings: r.warnings.into_iter().map(Into::into).collect(),
    })
}

/// Covariance whitening followed by orthogonal joint diagonalization of the
/// whitened local covariance matrices.
pub fn sbss_jd(sample: &FieldSample, fs: &[KernelSpec]) -> Result<UnmixingResult> {
    jd_cached(sample, fs, &mut WeightCache::new(), JointDiagOptions::default())
}

pub fn sbss_jd_with(sample: &FieldSample, fs: &[KernelSpec], opts: JointDiagOptions) -> Result<UnmixingResult> {
    jd_cached(sample, fs, &mut WeightCache::new(), opts)
}

fn jd_cached(
    sample: &FieldSample,
    fs: &[KernelSpec],
    cache: &mut WeightCache,
    opts: JointDiagOptions,
) -> Result<UnmixingResult> {
    if fs.is_empty() {
        return Err(SbssError::InvalidParameter("joint diagonalization needs at least one kernel".into()));
    }
    let whitener = scatter::inv_sqrt(&scatter::covariance(sample))?;
    // LCov of the whitened sample is B LCov(x) B
    let mut mats = Vec::with_capacity(fs.len());
    for f in fs {
        let lc = cache.lcov(sample, f)?;
        mats.push(linalg::symmetrize(&(&whitener * lc.m * &whitener)));
    }
    let jd = linalg::joint_diag(&mats, opts)?;
    let mut w = &jd.u * &whitener;
    linalg::fix_row_signs(&mut w);
    let mut warnings = Vec::new();
    if !jd.converged {
        warnings.push(EstimatorWarning::NotConverged { sweeps: jd.sweeps });
    }
    Ok(UnmixingResult {
        w,
        method: Method::LcovJd,
        diag_values: None,
        converged: jd.converged,
        warnings,
    })
}

/// Simultaneous diagonalization of `LDiff_{f1}` (whitening) and `LDiff_{f2}`,
/// diagonal values increasing.
pub fn sbss_ldiff_whitened(
    sample: &FieldSample,
    f1: &KernelSpec,
    f2: &KernelSpec,
    opts: WhitenedOptions,
) -> Result<UnmixingResult> {
    whitened_cached(sample, f1, f2, &mut WeightCache::new(), opts)
}

fn whitened_cached(
    sample: &FieldSample,
    f1: &KernelSpec,
    f2: &KernelSpec,
    cache: &mut WeightCache,
    opts: WhitenedOptions,
) -> Result<UnmixingResult> {
    if f1 == f2 {
        return Err(SbssError::InvalidParameter(format!("the two kernels must differ, both are {f1}")));
    }
    let s1 = cache.ldiff(sample, f1)?;
    let s2 = cache.ldiff(sample, f2)?;
    let r = linalg::simultaneous_diag(&s1.m, &s2.m, Order::Increasing)?;
    let mut w = r.w;
    if opts.unit_variance {
        let cov = scatter::covariance(sample).m;
        let var = (&w * cov * w.transpose()).diagonal();
        for (i, v) in var.iter().enumerate() {
            if *v > 0.0 {
                w.row_mut(i).scale_mut(1.0 / v.sqrt());
            }
        }
    }
    Ok(UnmixingResult {
        w,
        method: Method::LdiffWhitened,
        diag_values: Some(r.diag_values),
        converged: true,
        warnings: r.warnings.into_iter().map(Into::into).collect(),
    })
}

/// Variance of `|y|^2 (u^T y)^2` for a standard normal `p`-vector `y` and unit `u`.
fn fobi_gaussian_eigen_variance(p: usize) -> f64 {
    let k = (p - 1) as f64;
    let second_moment = 105.0 + 30.0 * k + 3.0 * (k * k + 2.0 * k);
    let mean = p as f64 + 2.0;
    second_moment - mean * mean
}

/// Fourth-order blind identification.
pub fn fobi(sample: &FieldSample) -> Result<UnmixingResult> {
    let (n, p) = (sample.n(), sample.p());
    let whitener = scatter::inv_sqrt(&scatter::covariance(sample))?;
    let mean = sample.data().row_mean();
    let mut kurt = DMatrix::<f64>::zeros(p, p);
    for i in 0..n {
        let y = &whitener * (sample.data().row(i) - &mean).transpose();
        let r2 = y.norm_squared();
        kurt += &y * y.transpose() * r2;
    }
    kurt /= n as f64;
    let eig = linalg::sym_eigen(&kurt, Order::Decreasing);
    let mut w = eig.vectors.transpose() * &whitener;
    linalg::fix_row_signs(&mut w);

    let threshold = 3.0 * (2.0 * fobi_gaussian_eigen_variance(p) / n as f64).sqrt();
    let warnings = eig
        .values
        .as_slice()
        .windows(2)
        .enumerate()
        .filter_map(|(index, pair)| {
            let gap = pair[0] - pair[1];
            (gap < threshold).then_some(EstimatorWarning::IndistinctKurtosis { index, gap, threshold })
        })
        .collect();
    Ok(UnmixingResult {
        w,
        method: Method::Fobi,
        diag_values: Some(eig.values),
        converged: true,
        warnings,
    })
}

/// Recovered components: rows `W (x_i - mean)` when `center`, else `W x_i`.
pub fn recover_latent(sample: &FieldSample, result: &UnmixingResult, center: bool) -> Result<DMatrix<f64>> {
    if result.w.ncols() != sample.p() {
        return Err(SbssError::DimensionMismatch(format!(
            "unmixing matrix has {} columns, sample has {} variables",
            result.w.ncols(),
            sample.p()
        )));
    }
    let x = if center {
        let mean = sample.data().row_mean();
        let mut x = sample.data().clone();
        for mut row in x.row_iter_mut() {
            row -= &mean;
        }
        x
    } else {
        sample.data().clone()
    };
    Ok(x * result.w.transpose())
}
