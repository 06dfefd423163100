//! Covariance, local covariance and local difference matrices of a
//! multivariate spatial sample.

use nalgebra::DMatrix;

use crate::error::{Result, SbssError};
use crate::kernel::{KernelSpec, LocationSet, PairWeights};
use crate::linalg;

/// A realization of a `p`-variate field at `n` locations; row `i` of `data`
/// is the observation at location `i`.
#[derive(Debug, Clone)]
pub struct FieldSample {
    data: DMatrix<f64>,
    locs: LocationSet,
}

impl FieldSample {
    pub fn new(data: DMatrix<f64>, locs: LocationSet) -> Result<Self> {
        if data.nrows() != locs.len() {
            return Err(SbssError::InvalidSample(format!(
                "{} observations for {} locations",
                data.nrows(),
                locs.len()
            )));
        }
        if data.ncols() < 2 {
            return Err(SbssError::InvalidSample(format!(
                "need at least 2 variables, got {}",
                data.ncols()
            )));
        }
        if let Some((idx, _)) = data.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            // column-major storage
            return Err(SbssError::InvalidSample(format!(
                "entry at row {}, column {} is not finite",
                idx % data.nrows(),
                idx / data.nrows()
            )));
        }
        Ok(Self { data, locs })
    }

    pub fn data(&self) -> &DMatrix<f64> {
        &self.data
    }

    pub fn locations(&self) -> &LocationSet {
        &self.locs
    }

    pub fn n(&self) -> usize {
        self.data.nrows()
    }

    pub fn p(&self) -> usize {
        self.data.ncols()
    }

    /// Column means.
    pub fn mean(&self) -> Vec<f64> {
        self.data.row_mean().iter().copied().collect()
    }

    /// The same locations with every row mapped to `B x_i`.
    pub fn transformed(&self, b: &DMatrix<f64>) -> Result<Self> {
        if b.ncols() != self.p() {
            return Err(SbssError::DimensionMismatch(format!(
                "transform has {} columns, sample has {} variables",
                b.ncols(),
                self.p()
            )));
        }
        Self::new(&self.data * b.transpose(), self.locs.clone())
    }

    /// Row-major copy, optionally with the column means removed.
    fn rows(&self, center: bool) -> Vec<f64> {
        let (n, p) = self.data.shape();
        let mean = if center { self.mean() } else { vec![0.0; p] };
        let mut out = Vec::with_capacity(n * p);
        for i in 0..n {
            for k in 0..p {
                out.push(self.data[(i, k)] - mean[k]);
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScatterKind {
    Cov,
    LCov,
    LDiff,
}

/// Divisor applied to the kernel-weighted sum.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Normalization {
    /// Divide by the number of locations.
    #[default]
    Locations,
    /// Divide by the sum of all kernel weights.
    KernelWeights,
}

#[derive(Debug, Clone)]
pub struct ScatterMatrix {
    pub m: DMatrix<f64>,
    pub kind: ScatterKind,
    pub kernel: Option<KernelSpec>,
}

impl ScatterMatrix {
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.m
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.m
    }
}

/// Sample covariance matrix with divisor `n`.
pub fn covariance(sample: &FieldSample) -> ScatterMatrix {
    let n = sample.n();
    let rows = sample.rows(true);
    let p = sample.p();
    let mut acc = vec![0.0; p * p];
    for x in rows.chunks_exact(p) {
        add_outer(&mut acc, x, x, 1.0);
    }
    ScatterMatrix {
        m: finish(acc, p, 1.0 / n as f64),
        kind: ScatterKind::Cov,
        kernel: Some(KernelSpec::ZeroLag),
    }
}

/// Local covariance matrix `(1/n) sum_ij f(s_i - s_j) (x_i - mean)(x_j - mean)^T`.
pub fn lcov(sample: &FieldSample, spec: &KernelSpec) -> Result<ScatterMatrix> {
    let weights = PairWeights::new(spec, sample.locations())?;
    lcov_with(sample, &weights, Normalization::Locations)
}

/// As [`lcov`], reusing precomputed pair weights.
pub fn lcov_with(sample: &FieldSample, weights: &PairWeights, norm: Normalization) -> Result<ScatterMatrix> {
    check_weights(sample, weights)?;
    let total = weights.total();
    if total == 0.0 {
        return Err(SbssError::EmptyKernelSupport(weights.spec().to_string()));
    }
    let p = sample.p();
    let rows = sample.rows(true);
    let mut acc = vec![0.0; p * p];
    let diag = weights.diag();
    if diag != 0.0 {
        for x in rows.chunks_exact(p) {
            add_outer(&mut acc, x, x, diag);
        }
    }
    for &(i, j, w) in weights.pairs() {
        let xi = &rows[i as usize * p..(i as usize + 1) * p];
        let xj = &rows[j as usize * p..(j as usize + 1) * p];
        // (i, j) and (j, i) together; symmetrization happens in `finish`
        add_outer(&mut acc, xi, xj, 2.0 * w);
    }
    let scale = match norm {
        Normalization::Locations => 1.0 / sample.n() as f64,
        Normalization::KernelWeights => 1.0 / total,
    };
    let kind = if weights.spec().is_zero_lag() {
        ScatterKind::Cov
    } else {
        ScatterKind::LCov
    };
    Ok(ScatterMatrix {
        m: finish(acc, p, scale),
        kind,
        kernel: Some(*weights.spec()),
    })
}

/// Local difference matrix `(1/n) sum_ij f(s_i - s_j) (x_i - x_j)(x_i - x_j)^T`.
pub fn ldiff(sample: &FieldSample, spec: &KernelSpec) -> Result<ScatterMatrix> {
    if spec.is_zero_lag() {
        return Err(SbssError::ZeroLagDifference);
    }
    let weights = PairWeights::new(spec, sample.locations())?;
    ldiff_with(sample, &weights, Normalization::Locations)
}

/// As [`ldiff`], reusing precomputed pair weights.
///
/// Differences are formed directly from the observations, so adding a
/// constant vector to every row leaves the result bit-for-bit unchanged.
pub fn ldiff_with(sample: &FieldSample, weights: &PairWeights, norm: Normalization) -> Result<ScatterMatrix> {
    if weights.spec().is_zero_lag() {
        return Err(SbssError::ZeroLagDifference);
    }
    check_weights(sample, weights)?;
    if weights.pairs().is_empty() {
        return Err(SbssError::EmptyKernelSupport(weights.spec().to_string()));
    }
    let p = sample.p();
    let rows = sample.rows(false);
    let mut acc = vec![0.0; p * p];
    let mut diff = vec![0.0; p];
    for &(i, j, w) in weights.pairs() {
        let xi = &rows[i as usize * p..(i as usize + 1) * p];
        let xj = &rows[j as usize * p..(j as usize + 1) * p];
        for k in 0..p {
            diff[k] = xi[k] - xj[k];
        }
        add_outer(&mut acc, &diff, &diff, w);
    }
    // each unordered pair appears twice in the double sum
    let scale = match norm {
        Normalization::Locations => 2.0 / sample.n() as f64,
        Normalization::KernelWeights => 2.0 / weights.total(),
    };
    Ok(ScatterMatrix {
        m: finish(acc, p, scale),
        kind: ScatterKind::LDiff,
        kernel: Some(*weights.spec()),
    })
}

/// `S^{-1/2}` of a positive definite scatter matrix.
pub fn inv_sqrt(scatter: &ScatterMatrix) -> Result<DMatrix<f64>> {
    linalg::sym_inv_sqrt(&scatter.m)
}

fn check_weights(sample: &FieldSample, weights: &PairWeights) -> Result<()> {
    if weights.len() != sample.n() {
        return Err(SbssError::DimensionMismatch(format!(
            "weights built for {} locations, sample has {}",
            weights.len(),
            sample.n()
        )));
    }
    Ok(())
}

#[inline]
fn add_outer(acc: &mut [f64], a: &[f64], b: &[f64], w: f64) {
    let p = a.len();
    for (r, &ar) in a.iter().enumerate() {
        let wa = w * ar;
        let row = &mut acc[r * p..(r + 1) * p];
        for (dst, &bc) in row.iter_mut().zip(b) {
            *dst += wa * bc;
        }
    }
}

fn finish(acc: Vec<f64>, p: usize, scale: f64) -> DMatrix<f64> {
    let m = DMatrix::from_row_slice(p, p, &acc) * scale;
    linalg::symmetrize(&m)
}
