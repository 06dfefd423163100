//! Sample locations and isotropic spatial kernel functions.
//!
//! A [`KernelSpec`] selects which location pairs enter a local scatter
//! matrix and with which weight. All four kernels depend on the lag only
//! through its Euclidean norm, so every weight matrix is symmetric.

use std::fmt;
use std::str::FromStr;
use std::sync::OnceLock;

use nalgebra::DMatrix;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Result, SbssError};

/// `n` sample locations in `d`-dimensional space, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct LocationSet {
    coords: Vec<f64>,
    n: usize,
    d: usize,
}

impl LocationSet {
    /// Builds a location set from row-major coordinates.
    pub fn new(coords: Vec<f64>, d: usize) -> Result<Self> {
        if d == 0 {
            return Err(SbssError::InvalidLocations("dimension must be at least 1".into()));
        }
        if coords.len() % d != 0 {
            return Err(SbssError::InvalidLocations(format!(
                "{} coordinates do not split into rows of length {d}",
                coords.len()
            )));
        }
        let n = coords.len() / d;
        if n < 2 {
            return Err(SbssError::InvalidLocations(format!("need at least 2 locations, got {n}")));
        }
        if let Some(pos) = coords.iter().position(|c| !c.is_finite()) {
            return Err(SbssError::InvalidLocations(format!(
                "coordinate {} of location {} is not finite",
                pos % d,
                pos / d
            )));
        }
        Ok(Self { coords, n, d })
    }

    pub fn from_points<const D: usize>(points: &[[f64; D]]) -> Result<Self> {
        Self::new(points.iter().flatten().copied().collect(), D)
    }

    /// Builds a location set from an `n x d` matrix.
    pub fn from_matrix(m: &DMatrix<f64>) -> Result<Self> {
        let mut coords = Vec::with_capacity(m.len());
        for i in 0..m.nrows() {
            coords.extend(m.row(i).iter());
        }
        Self::new(coords, m.ncols())
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.d..(i + 1) * self.d]
    }

    pub fn iter(&self) -> impl Iterator<Item = &[f64]> {
        self.coords.chunks_exact(self.d)
    }

    pub fn to_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.n, self.d, &self.coords)
    }

    /// Euclidean distance between locations `i` and `j`.
    pub fn distance(&self, i: usize, j: usize) -> f64 {
        norm_of_difference(self.point(i), self.point(j))
    }
}

pub(crate) fn norm_of_difference(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// The 0.95 quantile of the standard normal distribution.
pub fn gauss_kernel_quantile() -> f64 {
    static Q: OnceLock<f64> = OnceLock::new();
    *Q.get_or_init(|| Normal::standard().inverse_cdf(0.95))
}

/// Spatial kernel function.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KernelSpec {
    /// `I(|h| <= r)`
    Ball { r: f64 },
    /// `I(inner < |h| <= outer)`
    Ring { inner: f64, outer: f64 },
    /// `exp(-0.5 (q |h| / r)^2)` with `q` the 0.95 standard normal quantile.
    Gauss { r: f64 },
    /// `I(|h| = 0)`, which turns a local covariance matrix into the covariance matrix.
    ZeroLag,
}

impl KernelSpec {
    pub fn ball(r: f64) -> Result<Self> {
        let k = Self::Ball { r };
        k.validate()?;
        Ok(k)
    }

    pub fn ring(inner: f64, outer: f64) -> Result<Self> {
        let k = Self::Ring { inner, outer };
        k.validate()?;
        Ok(k)
    }

    pub fn gauss(r: f64) -> Result<Self> {
        let k = Self::Gauss { r };
        k.validate()?;
        Ok(k)
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            Self::Ball { r } | Self::Gauss { r } => {
                if !(r.is_finite() && r > 0.0) {
                    return Err(SbssError::InvalidKernel(format!("radius must be positive and finite, got {r}")));
                }
            }
            Self::Ring { inner, outer } => {
                if !(inner.is_finite() && outer.is_finite() && inner >= 0.0 && inner < outer) {
                    return Err(SbssError::InvalidKernel(format!(
                        "ring bounds must satisfy 0 <= inner < outer, got ({inner}, {outer})"
                    )));
                }
            }
            Self::ZeroLag => {}
        }
        Ok(())
    }

    pub fn is_zero_lag(&self) -> bool {
        matches!(self, Self::ZeroLag)
    }

    /// Kernel value for a lag of Euclidean norm `dist`.
    #[inline]
    pub fn eval_norm(&self, dist: f64) -> f64 {
        match *self {
            Self::Ball { r } => indicator(dist <= r),
            Self::Ring { inner, outer } => indicator(inner < dist && dist <= outer),
            Self::Gauss { r } => {
                let t = gauss_kernel_quantile() * dist / r;
                (-0.5 * t * t).exp()
            }
            Self::ZeroLag => indicator(dist == 0.0),
        }
    }

    /// Kernel value for the lag vector `h`.
    pub fn eval(&self, h: &[f64]) -> f64 {
        self.eval_norm(h.iter().map(|x| x * x).sum::<f64>().sqrt())
    }
}

#[inline]
fn indicator(b: bool) -> f64 {
    if b {
        1.0
    } else {
        0.0
    }
}

impl fmt::Display for KernelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Ball { r } => write!(f, "ball:{r}"),
            Self::Ring { inner, outer } => write!(f, "ring:{inner}:{outer}"),
            Self::Gauss { r } => write!(f, "gauss:{r}"),
            Self::ZeroLag => f.write_str("zero"),
        }
    }
}

impl FromStr for KernelSpec {
    type Err = SbssError;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.trim().split(':').collect();
        let num = |t: &str| -> Result<f64> {
            t.trim()
                .parse::<f64>()
                .map_err(|_| SbssError::InvalidKernel(format!("'{t}' is not a number in kernel '{s}'")))
        };
        match parts.as_slice() {
            ["ball", r] => Self::ball(num(r)?),
            ["ring", ri, ro] => Self::ring(num(ri)?, num(ro)?),
            ["gauss", r] => Self::gauss(num(r)?),
            ["zero"] => Ok(Self::ZeroLag),
            _ => Err(SbssError::InvalidKernel(format!(
                "'{s}' is not one of ball:r, ring:ri:ro, gauss:r, zero"
            ))),
        }
    }
}

impl Serialize for KernelSpec {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for KernelSpec {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Dense `n x n` matrix of `f(s_i - s_j)`.
pub fn kernel_weights(spec: &KernelSpec, locs: &LocationSet) -> DMatrix<f64> {
    let n = locs.len();
    let mut w = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let v = spec.eval_norm(locs.distance(i, j));
            w[(i, j)] = v;
            w[(j, i)] = v;
        }
    }
    w
}

/// Sparse form of a kernel weight matrix: the common diagonal weight `f(0)`
/// plus every off-diagonal pair `i < j` with non-zero weight.
///
/// Computing this once per location set lets several scatter matrices reuse it.
#[derive(Debug, Clone)]
pub struct PairWeights {
    spec: KernelSpec,
    n: usize,
    diag: f64,
    pairs: Vec<(u32, u32, f64)>,
}

impl PairWeights {
    pub fn new(spec: &KernelSpec, locs: &LocationSet) -> Result<Self> {
        spec.validate()?;
        let n = locs.len();
        let mut pairs = Vec::new();
        for i in 0..n {
            let si = locs.point(i);
            for j in (i + 1)..n {
                let w = spec.eval_norm(norm_of_difference(si, locs.point(j)));
                if w != 0.0 {
                    pairs.push((i as u32, j as u32, w));
                }
            }
        }
        Ok(Self {
            spec: *spec,
            n,
            diag: spec.eval_norm(0.0),
            pairs,
        })
    }

    pub fn spec(&self) -> &KernelSpec {
        &self.spec
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn diag(&self) -> f64 {
        self.diag
    }

    /// Off-diagonal pairs `(i, j, w)` with `i < j`.
    pub fn pairs(&self) -> &[(u32, u32, f64)] {
        &self.pairs
    }

    /// Sum of all `n^2` weights.
    pub fn total(&self) -> f64 {
        self.n as f64 * self.diag + 2.0 * self.pairs.iter().map(|p| p.2).sum::<f64>()
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut w = DMatrix::from_diagonal_element(self.n, self.n, self.diag);
        for &(i, j, v) in &self.pairs {
            w[(i as usize, j as usize)] = v;
            w[(j as usize, i as usize)] = v;
        }
        w
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    /// Standard normal CDF by composite Simpson quadrature of the density;
    /// independent of the inverse-CDF routine under test.
    fn normal_cdf_by_quadrature(x: f64) -> f64 {
        let steps = 20_000;
        let h = x / steps as f64;
        let pdf = |t: f64| (-0.5 * t * t).exp() / (2.0 * std::f64::consts::PI).sqrt();
        let mut s = pdf(0.0) + pdf(x);
        for k in 1..steps {
            let w = if k % 2 == 1 { 4.0 } else { 2.0 };
            s += w * pdf(k as f64 * h);
        }
        0.5 + s * h / 3.0
    }

    fn quantile_by_bisection(p: f64) -> f64 {
        let (mut lo, mut hi) = (0.0, 5.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if normal_cdf_by_quadrature(mid) < p {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn gauss_quantile_matches_numeric_inversion() {
        let oracle = quantile_by_bisection(0.95);
        assert_abs_diff_eq!(gauss_kernel_quantile(), oracle, epsilon = 1e-9);
    }

    #[test]
    fn eval_examples() {
        let ball = KernelSpec::ball(1.0).unwrap();
        assert_eq!(ball.eval(&[0.0, 0.0]), 1.0);
        assert_eq!(ball.eval(&[1.1, 0.0]), 0.0);
        assert_eq!(ball.eval(&[1.0, 0.0]), 1.0);

        let ring = KernelSpec::ring(1.0, 2.0).unwrap();
        assert_eq!(ring.eval(&[1.0, 0.0]), 0.0);
        assert_eq!(ring.eval(&[2.0, 0.0]), 1.0);
        assert_eq!(ring.eval(&[0.0, 1.5]), 1.0);

        // exp(-q^2 / 2) with q from the quadrature oracle
        let q = quantile_by_bisection(0.95);
        let gauss = KernelSpec::gauss(2.0).unwrap();
        assert_abs_diff_eq!(gauss.eval(&[2.0, 0.0]), (-0.5 * q * q).exp(), epsilon = 1e-9);
        assert_abs_diff_eq!(gauss.eval(&[2.0, 0.0]), 0.258_522_712_287_080_5, epsilon = 1e-12);

        assert_eq!(KernelSpec::ZeroLag.eval(&[0.0, 0.0]), 1.0);
        assert_eq!(KernelSpec::ZeroLag.eval(&[1e-100, 0.0]), 0.0);
    }

    #[test]
    fn invalid_specs_rejected() {
        assert!(KernelSpec::ball(0.0).is_err());
        assert!(KernelSpec::gauss(-1.0).is_err());
        assert!(KernelSpec::ring(2.0, 1.0).is_err());
        assert!(KernelSpec::ring(1.0, 1.0).is_err());
        assert!(KernelSpec::ring(-0.5, 1.0).is_err());
        assert!(KernelSpec::ring(0.0, 1.0).is_ok());
    }

    #[test]
    fn config_strings() {
        for s in ["ball:1", "ring:0:1", "ring:1.5:2.5", "gauss:2", "zero"] {
            let k: KernelSpec = s.parse().unwrap();
            assert_eq!(k.to_string(), s);
        }
        assert_eq!("ring:0:1".parse::<KernelSpec>().unwrap(), KernelSpec::Ring { inner: 0.0, outer: 1.0 });
        assert!("ball".parse::<KernelSpec>().is_err());
        assert!("disc:1".parse::<KernelSpec>().is_err());
        assert!("ring:1:x".parse::<KernelSpec>().is_err());
    }

    #[test]
    fn weights_examples() {
        let ball = KernelSpec::ball(1.0).unwrap();
        let same = LocationSet::from_points(&[[0.5, 0.5], [0.5, 0.5]]).unwrap();
        assert_eq!(kernel_weights(&ball, &same), DMatrix::from_element(2, 2, 1.0));

        let apart = LocationSet::from_points(&[[0.0, 0.0], [3.0, 0.0]]).unwrap();
        assert_eq!(kernel_weights(&ball, &apart), DMatrix::identity(2, 2));
    }

    #[test]
    fn weights_match_double_loop() {
        let pts = [[0.1, 0.2], [0.9, 0.4], [0.3, 0.75], [0.6, 0.05], [0.45, 0.5]];
        let locs = LocationSet::from_points(&pts).unwrap();
        let ring = KernelSpec::ring(0.0, 1.0).unwrap();
        let w = kernel_weights(&ring, &locs);
        for (i, a) in pts.iter().enumerate() {
            for (j, b) in pts.iter().enumerate() {
                let dist = ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt();
                let expected = if dist > 0.0 && dist <= 1.0 { 1.0 } else { 0.0 };
                assert_eq!(w[(i, j)], expected, "pair ({i},{j})");
            }
        }
        let sparse = PairWeights::new(&ring, &locs).unwrap();
        assert_eq!(sparse.to_dense(), w);
        assert_eq!(sparse.total(), w.sum());
    }

    #[test]
    fn zero_lag_weights_are_identity_for_distinct_points() {
        let locs = LocationSet::from_points(&[[0.0, 0.0], [1.0, 0.0], [0.0, 1e-12]]).unwrap();
        assert_eq!(kernel_weights(&KernelSpec::ZeroLag, &locs), DMatrix::identity(3, 3));
    }

    #[test]
    fn location_set_validation() {
        assert!(LocationSet::new(vec![0.0, 0.0], 2).is_err());
        assert!(LocationSet::new(vec![0.0, 0.0, 1.0], 2).is_err());
        assert!(LocationSet::new(vec![0.0, f64::NAN, 1.0, 1.0], 2).is_err());
        assert!(LocationSet::new(vec![0.0, 1.0], 0).is_err());
        assert_eq!(LocationSet::new(vec![0.0, 1.0, 2.0], 1).unwrap().len(), 3);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn any_spec() -> impl Strategy<Value = KernelSpec> {
            prop_oneof![
                (0.01f64..5.0).prop_map(|r| KernelSpec::Ball { r }),
                (0.0f64..3.0, 0.01f64..3.0).prop_map(|(a, w)| KernelSpec::Ring { inner: a, outer: a + w }),
                (0.01f64..5.0).prop_map(|r| KernelSpec::Gauss { r }),
                Just(KernelSpec::ZeroLag),
            ]
        }

        proptest! {
            #[test]
            fn symmetric_and_bounded(spec in any_spec(), x in -6.0f64..6.0, y in -6.0f64..6.0) {
                let v = spec.eval(&[x, y]);
                prop_assert_eq!(v, spec.eval(&[-x, -y]));
                prop_assert!((0.0..=1.0).contains(&v));
                if !matches!(spec, KernelSpec::Gauss { .. }) {
                    prop_assert!(v == 0.0 || v == 1.0);
                }
            }
        }
    }
}
