//! Synthetic spatial fields: location patterns, Gaussian latent fields,
//! drift models and mixing.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Beta, Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::bessel::bessel_k;
use crate::error::{Result, SbssError};
use crate::kernel::{norm_of_difference, LocationSet};
use crate::scatter::FieldSample;

/// Distribution of the first coordinate of the sample locations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Pattern {
    /// Both coordinates `U(0, 1)`.
    Uniform,
    /// First coordinate `Beta(2, 4)`, second `U(0, 1)`.
    Skew,
}

impl Pattern {
    pub fn as_str(&self) -> &'static str {
        match self {
            Pattern::Uniform => "uniform",
            Pattern::Skew => "skew",
        }
    }
}

/// The square domain `[0, side]^2` and its location pattern.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DomainSpec {
    pub side: f64,
    pub pattern: Pattern,
}

impl DomainSpec {
    pub fn new(side: f64, pattern: Pattern) -> Result<Self> {
        let spec = Self { side, pattern };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.side.is_finite() && self.side > 0.0) {
            return Err(SbssError::InvalidParameter(format!("domain side must be positive, got {}", self.side)));
        }
        if self.location_count() < 2 {
            return Err(SbssError::InvalidParameter(format!(
                "domain side {} gives fewer than 2 locations",
                self.side
            )));
        }
        Ok(())
    }

    /// `side^2` rounded to the nearest integer.
    pub fn location_count(&self) -> usize {
        (self.side * self.side).round() as usize
    }
}

/// Draws `side^2` independent locations; each point takes its first then its
/// second coordinate from the generator.
pub fn sample_locations<R: Rng + ?Sized>(spec: &DomainSpec, rng: &mut R) -> Result<LocationSet> {
    spec.validate()?;
    let n = spec.location_count();
    let beta = Beta::new(2.0, 4.0).expect("valid beta parameters");
    let mut coords = Vec::with_capacity(2 * n);
    for _ in 0..n {
        let s1: f64 = match spec.pattern {
            Pattern::Uniform => rng.random(),
            Pattern::Skew => beta.sample(rng),
        };
        let s2: f64 = rng.random();
        coords.push(s1 * spec.side);
        coords.push(s2 * spec.side);
    }
    LocationSet::new(coords, 2)
}

/// Matérn covariance at distance `h`, with `C(0) = sigma2`.
pub fn matern_cov(h: f64, sigma2: f64, nu: f64, phi: f64) -> f64 {
    matern_scaled(h, sigma2, nu, phi, matern_log_norm(sigma2, nu))
}

/// `log(sigma2 / (2^(nu-1) Gamma(nu)))`.
fn matern_log_norm(sigma2: f64, nu: f64) -> f64 {
    sigma2.ln() - (nu - 1.0) * std::f64::consts::LN_2 - ln_gamma(nu)
}

fn matern_scaled(h: f64, sigma2: f64, nu: f64, phi: f64, log_norm: f64) -> f64 {
    if h <= 0.0 {
        return sigma2;
    }
    let x = h / phi;
    if nu == 0.5 {
        return sigma2 * (-x).exp();
    }
    let k = bessel_k(nu, x);
    if k == 0.0 {
        return 0.0;
    }
    // assembled in logs: x^nu and K_nu(x) over- and underflow separately
    (log_norm + nu * x.ln() + k.ln()).exp()
}

/// Fractional Brownian field covariance between `s` and `s2`.
pub fn fbm_cov(s: &[f64], s2: &[f64], hurst: f64) -> f64 {
    let two_h = 2.0 * hurst;
    let norm = |v: &[f64]| v.iter().map(|c| c * c).sum::<f64>().sqrt();
    0.5 * (norm(s).powf(two_h) + norm(s2).powf(two_h) - norm_of_difference(s, s2).powf(two_h))
}

/// Covariance model of one latent column.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CovModel {
    Matern { sigma2: f64, nu: f64, phi: f64 },
    Fbm { hurst: f64 },
}

impl CovModel {
    pub fn matern(sigma2: f64, nu: f64, phi: f64) -> Result<Self> {
        let m = CovModel::Matern { sigma2, nu, phi };
        m.validate()?;
        Ok(m)
    }

    pub fn fbm(hurst: f64) -> Result<Self> {
        let m = CovModel::Fbm { hurst };
        m.validate()?;
        Ok(m)
    }

    /// The three Matérn fields `(1, 0.5, 1)`, `(1, 0.9, 1.7)`, `(1, 1.3, 2.2)`.
    pub fn matern_triplet() -> Vec<CovModel> {
        vec![
            CovModel::Matern { sigma2: 1.0, nu: 0.5, phi: 1.0 },
            CovModel::Matern { sigma2: 1.0, nu: 0.9, phi: 1.7 },
            CovModel::Matern { sigma2: 1.0, nu: 1.3, phi: 2.2 },
        ]
    }

    /// Fractional Brownian fields with Hurst parameters 0.3, 0.5 and 0.8.
    pub fn fbm_triplet() -> Vec<CovModel> {
        vec![CovModel::Fbm { hurst: 0.3 }, CovModel::Fbm { hurst: 0.5 }, CovModel::Fbm { hurst: 0.8 }]
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            CovModel::Matern { sigma2, nu, phi } => {
                for (name, v) in [("sigma2", sigma2), ("nu", nu), ("phi", phi)] {
                    if !(v.is_finite() && v > 0.0) {
                        return Err(SbssError::InvalidParameter(format!("Matérn {name} must be positive, got {v}")));
                    }
                }
            }
            CovModel::Fbm { hurst } => {
                if !(hurst > 0.0 && hurst <= 1.0) {
                    return Err(SbssError::InvalidParameter(format!("Hurst parameter must lie in (0, 1], got {hurst}")));
                }
            }
        }
        Ok(())
    }

    pub fn cov(&self, s: &[f64], s2: &[f64]) -> f64 {
        match *self {
            CovModel::Matern { sigma2, nu, phi } => matern_cov(norm_of_difference(s, s2), sigma2, nu, phi),
            CovModel::Fbm { hurst } => fbm_cov(s, s2, hurst),
        }
    }

    /// The `n x n` covariance matrix over `locs`.
    pub fn covariance_matrix(&self, locs: &LocationSet) -> DMatrix<f64> {
        let n = locs.len();
        let log_norm = match *self {
            CovModel::Matern { sigma2, nu, .. } => matern_log_norm(sigma2, nu),
            CovModel::Fbm { .. } => 0.0,
        };
        let mut c = DMatrix::zeros(n, n);
        for j in 0..n {
            let sj = locs.point(j);
            for i in j..n {
                let si = locs.point(i);
                let v = match *self {
                    CovModel::Matern { sigma2, nu, phi } => {
                        matern_scaled(norm_of_difference(si, sj), sigma2, nu, phi, log_norm)
                    }
                    CovModel::Fbm { hurst } => fbm_cov(si, sj, hurst),
                };
                c[(i, j)] = v;
                c[(j, i)] = v;
            }
        }
        c
    }
}

/// Relative jitter levels tried in turn when factorizing a covariance matrix.
pub const JITTER_LEVELS: [f64; 5] = [1e-10, 1e-9, 1e-8, 1e-7, 1e-6];

/// Lower Cholesky factor of `c + eps * (trace / n) * I` for the first jitter
/// level that succeeds.
pub fn jittered_cholesky(c: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = c.nrows();
    let scale = c.trace() / n as f64;
    let mut last = 0.0;
    for eps in JITTER_LEVELS {
        last = eps * scale;
        let m = faer::Mat::<f64>::from_fn(n, n, |i, j| if i == j { c[(i, j)] + last } else { c[(i, j)] });
        if let Ok(llt) = m.llt(faer::Side::Lower) {
            let l = llt.L();
            return Ok(DMatrix::from_fn(n, n, |i, j| if i >= j { l[(i, j)] } else { 0.0 }));
        }
    }
    Err(SbssError::CholeskyFailed(last))
}

/// A centered Gaussian field on fixed locations, factorized once.
#[derive(Debug, Clone)]
pub struct GaussianField {
    factor: DMatrix<f64>,
}

impl GaussianField {
    pub fn new(locs: &LocationSet, model: &CovModel) -> Result<Self> {
        model.validate()?;
        Ok(Self { factor: jittered_cholesky(&model.covariance_matrix(locs))? })
    }

    pub fn len(&self) -> usize {
        self.factor.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.factor.nrows() == 0
    }

    /// `L g` with `g` standard normal.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> DVector<f64> {
        let n = self.factor.nrows();
        let g = DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal));
        &self.factor * g
    }
}

/// Simulates one independent column per model; returns an `n x p` matrix.
pub fn simulate_latent<R: Rng + ?Sized>(locs: &LocationSet, models: &[CovModel], rng: &mut R) -> Result<DMatrix<f64>> {
    if models.is_empty() {
        return Err(SbssError::InvalidParameter("need at least one covariance model".into()));
    }
    let mut z = DMatrix::zeros(locs.len(), models.len());
    for (k, model) in models.iter().enumerate() {
        let field = GaussianField::new(locs, model)?;
        z.set_column(k, &field.sample(rng));
    }
    Ok(z)
}

/// Mean function added to the latent field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DriftModel {
    Zero,
    /// `c_k log ||s0 - s||` around a uniformly drawn anchor `s0`.
    RadialLog { c: Vec<f64> },
    /// `c_k s_1 / max_j s_{j,1}`.
    LinearX { c: Vec<f64> },
    /// Constant per nearest-anchor cluster, drawn from `U(low, high)` per column.
    BlockCluster { n_clusters: usize, low: f64, high: f64 },
}

impl DriftModel {
    /// Drift settings 1 to 4 of the simulation study for `p = 3`.
    pub fn numbered(index: u8) -> Option<Self> {
        match index {
            1 => Some(DriftModel::Zero),
            2 => Some(DriftModel::RadialLog { c: vec![0.3, 0.4, 0.6] }),
            3 => Some(DriftModel::LinearX { c: vec![0.7, 1.0, 1.2] }),
            4 => Some(DriftModel::BlockCluster { n_clusters: 3, low: 0.0, high: 3.0 }),
            _ => None,
        }
    }

    pub fn validate(&self, p: usize) -> Result<()> {
        match self {
            DriftModel::Zero => Ok(()),
            DriftModel::RadialLog { c } | DriftModel::LinearX { c } => {
                if c.len() != p {
                    return Err(SbssError::DimensionMismatch(format!(
                        "drift has {} constants for {p} columns",
                        c.len()
                    )));
                }
                if c.iter().any(|v| !v.is_finite()) {
                    return Err(SbssError::InvalidParameter("drift constants must be finite".into()));
                }
                Ok(())
            }
            DriftModel::BlockCluster { n_clusters, low, high } => {
                if *n_clusters == 0 {
                    return Err(SbssError::InvalidParameter("need at least one cluster".into()));
                }
                if !(low.is_finite() && high.is_finite() && low < high) {
                    return Err(SbssError::InvalidParameter(format!("invalid cluster value range [{low}, {high})")));
                }
                Ok(())
            }
        }
    }
}

/// Random quantities drawn while applying a drift.
#[derive(Debug, Clone, PartialEq)]
pub struct DriftRealization {
    /// `n x p` drift values added to the latent field.
    pub values: DMatrix<f64>,
    /// Radial centre or cluster anchors.
    pub anchors: Vec<Vec<f64>>,
    /// Cluster of each location, for the block model.
    pub clusters: Vec<usize>,
    /// `n_clusters x p` cluster constants, for the block model.
    pub cluster_values: Option<DMatrix<f64>>,
}

/// Smallest distance to the radial anchor entering the logarithm.
pub const MIN_RADIAL_DISTANCE: f64 = 1e-9;

/// Adds a drift to `latent`; anchors are drawn uniformly in `[0, side]^d`.
pub fn apply_drift<R: Rng + ?Sized>(
    latent: &DMatrix<f64>,
    locs: &LocationSet,
    drift: &DriftModel,
    side: f64,
    rng: &mut R,
) -> Result<(FieldSample, DriftRealization)> {
    let (n, p) = latent.shape();
    if n != locs.len() {
        return Err(SbssError::DimensionMismatch(format!("latent has {n} rows for {} locations", locs.len())));
    }
    drift.validate(p)?;
    if !(side.is_finite() && side > 0.0) {
        return Err(SbssError::InvalidParameter(format!("domain side must be positive, got {side}")));
    }
    let d = locs.dim();
    let draw_anchor = |rng: &mut R| (0..d).map(|_| rng.random::<f64>() * side).collect::<Vec<_>>();
    let mut real = DriftRealization {
        values: DMatrix::zeros(n, p),
        anchors: Vec::new(),
        clusters: Vec::new(),
        cluster_values: None,
    };
    match drift {
        DriftModel::Zero => return Ok((FieldSample::new(latent.clone(), locs.clone())?, real)),
        DriftModel::RadialLog { c } => {
            let s0 = draw_anchor(rng);
            for i in 0..n {
                let r = norm_of_difference(&s0, locs.point(i)).max(MIN_RADIAL_DISTANCE).ln();
                for k in 0..p {
                    real.values[(i, k)] = c[k] * r;
                }
            }
            real.anchors.push(s0);
        }
        DriftModel::LinearX { c } => {
            let max = locs.iter().map(|s| s[0]).fold(f64::NEG_INFINITY, f64::max);
            if max <= 0.0 {
                return Err(SbssError::InvalidLocations("largest first coordinate must be positive".into()));
            }
            for i in 0..n {
                let t = locs.point(i)[0] / max;
                for k in 0..p {
                    real.values[(i, k)] = c[k] * t;
                }
            }
        }
        DriftModel::BlockCluster { n_clusters, low, high } => {
            let anchors: Vec<Vec<f64>> = (0..*n_clusters).map(|_| draw_anchor(rng)).collect();
            let cv = DMatrix::from_fn(*n_clusters, p, |_, _| rng.random_range(*low..*high));
            real.clusters = (0..n)
                .map(|i| {
                    let s = locs.point(i);
                    let mut best = 0;
                    let mut best_d = f64::INFINITY;
                    for (j, a) in anchors.iter().enumerate() {
                        let dist = norm_of_difference(a, s);
                        if dist < best_d {
                            best = j;
                            best_d = dist;
                        }
                    }
                    best
                })
                .collect();
            for (i, &j) in real.clusters.iter().enumerate() {
                real.values.row_mut(i).copy_from(&cv.row(j));
            }
            real.anchors = anchors;
            real.cluster_values = Some(cv);
        }
    }
    let x = latent + &real.values;
    Ok((FieldSample::new(x, locs.clone())?, real))
}

/// Reciprocal condition number below which a mixing matrix counts as singular.
pub const SINGULAR_RCOND: f64 = 1e-13;

/// Mixes each row `z_i` into `a z_i`.
pub fn mix(data: &DMatrix<f64>, a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if !a.is_square() || a.nrows() != data.ncols() {
        return Err(SbssError::DimensionMismatch(format!(
            "mixing matrix {:?} does not fit data with {} columns",
            a.shape(),
            data.ncols()
        )));
    }
    let sv = a.singular_values();
    let rcond = sv.min() / sv.max();
    if !(rcond > SINGULAR_RCOND) {
        return Err(SbssError::Singular(format!("mixing matrix has reciprocal condition number {rcond:e}")));
    }
    Ok(data * a.transpose())
}
