//! Symmetric eigendecomposition, simultaneous diagonalization of a matrix
//! pair and approximate orthogonal joint diagonalization by Givens sweeps.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Result, SbssError};

/// Smallest eigenvalue must exceed this multiple of the largest for a matrix
/// to count as positive definite.
pub const PD_TOLERANCE: f64 = 1e-10;

/// Relative gap below which two generalized eigenvalues are reported as tied.
pub const EIGEN_GAP_TOLERANCE: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub enum Order {
    Increasing,
    Decreasing,
}

/// Symmetric eigendecomposition with eigenvalues sorted by `order`.
/// Column `k` of `vectors` belongs to `values[k]`.
#[derive(Debug, Clone)]
pub struct SortedEigen {
    pub values: DVector<f64>,
    pub vectors: DMatrix<f64>,
}

pub fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

pub fn sym_eigen(m: &DMatrix<f64>, order: Order) -> SortedEigen {
    let eig = SymmetricEigen::new(symmetrize(m));
    let idx = sorted_indices(eig.eigenvalues.as_slice(), order);
    let values = DVector::from_iterator(idx.len(), idx.iter().map(|&i| eig.eigenvalues[i]));
    let vectors = eig.eigenvectors.select_columns(idx.iter());
    SortedEigen { values, vectors }
}

/// Stable argsort; ties keep the earlier index first.
pub(crate) fn sorted_indices(values: &[f64], order: Order) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    match order {
        Order::Increasing => idx.sort_by(|&a, &b| values[a].total_cmp(&values[b])),
        Order::Decreasing => idx.sort_by(|&a, &b| values[b].total_cmp(&values[a])),
    }
    idx
}

/// `S^{-1/2}` of a symmetric positive definite matrix via `V diag(l^{-1/2}) V^T`.
pub fn sym_inv_sqrt(s: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let eig = sym_eigen(s, Order::Decreasing);
    let largest = eig.values[0];
    let smallest = eig.values[eig.values.len() - 1];
    if !(largest > 0.0 && smallest > PD_TOLERANCE * largest) {
        return Err(SbssError::NotPositiveDefinite { smallest, largest });
    }
    let d = DMatrix::from_diagonal(&eig.values.map(|l| 1.0 / l.sqrt()));
    Ok(symmetrize(&(&eig.vectors * d * eig.vectors.transpose())))
}

/// Flips each row so that its largest-magnitude entry is positive
/// (first such entry on ties).
pub fn fix_row_signs(w: &mut DMatrix<f64>) {
    for i in 0..w.nrows() {
        let mut best = 0usize;
        for j in 1..w.ncols() {
            if w[(i, j)].abs() > w[(i, best)].abs() {
                best = j;
            }
        }
        if w[(i, best)] < 0.0 {
            w.row_mut(i).neg_mut();
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum DiagWarning {
    /// Consecutive diagonal values `index` and `index + 1` are closer than the
    /// identifiability threshold; the corresponding rows are only determined
    /// up to a rotation within their common eigenspace.
    NearEqualValues { index: usize, gap: f64 },
}

/// Result of diagonalizing a matrix pair.
#[derive(Debug, Clone)]
pub struct DiagResult {
    pub w: DMatrix<f64>,
    pub diag_values: DVector<f64>,
    pub order: Order,
    pub warnings: Vec<DiagWarning>,
}

/// Finds `W` with `W s1 W^T = I` and `W s2 W^T` diagonal, rows ordered by the
/// generalized eigenvalues of `(s2, s1)`.
pub fn simultaneous_diag(s1: &DMatrix<f64>, s2: &DMatrix<f64>, order: Order) -> Result<DiagResult> {
    check_square_pair(s1, s2)?;
    let b = sym_inv_sqrt(s1)?;
    let inner = symmetrize(&(&b * s2 * &b));
    let eig = sym_eigen(&inner, order);
    let mut w = eig.vectors.transpose() * b;
    fix_row_signs(&mut w);
    let warnings = gap_warnings(eig.values.as_slice(), EIGEN_GAP_TOLERANCE);
    Ok(DiagResult {
        w,
        diag_values: eig.values,
        order,
        warnings,
    })
}

fn check_square_pair(s1: &DMatrix<f64>, s2: &DMatrix<f64>) -> Result<()> {
    if !s1.is_square() || s1.shape() != s2.shape() {
        return Err(SbssError::DimensionMismatch(format!(
            "expected two square matrices of equal size, got {:?} and {:?}",
            s1.shape(),
            s2.shape()
        )));
    }
    Ok(())
}

pub(crate) fn gap_warnings(sorted: &[f64], rel_tol: f64) -> Vec<DiagWarning> {
    let scale = sorted.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
    sorted
        .windows(2)
        .enumerate()
        .filter_map(|(index, pair)| {
            let gap = (pair[1] - pair[0]).abs();
            (gap < rel_tol * scale).then_some(DiagWarning::NearEqualValues { index, gap })
        })
        .collect()
}

#[derive(Debug, Clone, Copy)]
pub struct JointDiagOptions {
    /// A sweep in which every rotation has `|sin(theta)| < tol` ends the iteration.
    pub tol: f64,
    pub max_sweeps: usize,
}

impl Default for JointDiagOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_sweeps: 100,
        }
    }
}

#[derive(Debug, Clone)]
pub struct JointDiagResult {
    /// Orthogonal matrix whose rows jointly diagonalize the inputs:
    /// `u M_k u^T` is approximately diagonal for every `k`.
    pub u: DMatrix<f64>,
    /// `sum_k ||diag(u M_k u^T)||^2`
    pub objective: f64,
    pub sweeps: usize,
    pub converged: bool,
    /// Objective at the end of each sweep, starting with the initial value.
    pub history: Vec<f64>,
}

/// Sum of squared diagonal entries over all matrices.
pub fn joint_diag_objective(mats: &[DMatrix<f64>]) -> f64 {
    mats.iter().map(|m| m.diagonal().norm_squared()).sum()
}

/// Rotation angle maximizing the sum of squared diagonals of the rotated
/// 2x2 blocks `[[a_pp, a_pq], [a_qp, a_qq]]`, one block per matrix.
///
/// Returns `(cos, sin)`. The rotation is applied as `G^T A G` with
/// `G = [[c, -s], [s, c]]`.
pub fn givens_angle(blocks: impl IntoIterator<Item = [f64; 4]>) -> (f64, f64) {
    let (mut g11, mut g12, mut g22) = (0.0, 0.0, 0.0);
    for [app, apq, aqp, aqq] in blocks {
        let h1 = app - aqq;
        let h2 = apq + aqp;
        g11 += h1 * h1;
        g12 += h1 * h2;
        g22 += h2 * h2;
    }
    let ton = g11 - g22;
    let toff = 2.0 * g12;
    let theta = 0.5 * toff.atan2(ton + (ton * ton + toff * toff).sqrt());
    (theta.cos(), theta.sin())
}

/// Approximate joint diagonalization of symmetric matrices by cyclic Givens sweeps.
pub fn joint_diag(mats: &[DMatrix<f64>], opts: JointDiagOptions) -> Result<JointDiagResult> {
    joint_diag_observed(mats, opts, |_| {})
}

/// As [`joint_diag`], calling `observer` with the objective after every
/// applied rotation.
pub fn joint_diag_observed(
    mats: &[DMatrix<f64>],
    opts: JointDiagOptions,
    mut observer: impl FnMut(f64),
) -> Result<JointDiagResult> {
    let first = mats
        .first()
        .ok_or_else(|| SbssError::InvalidParameter("joint diagonalization needs at least one matrix".into()))?;
    let p = first.nrows();
    for m in mats {
        if m.shape() != (p, p) {
            return Err(SbssError::DimensionMismatch(format!(
                "all matrices must be {p}x{p}, found {:?}",
                m.shape()
            )));
        }
    }

    let mut a: Vec<DMatrix<f64>> = mats.iter().map(symmetrize).collect();
    let mut v = DMatrix::<f64>::identity(p, p);
    let mut history = vec![joint_diag_objective(&a)];
    let mut sweeps = 0;
    let mut converged = false;

    while sweeps < opts.max_sweeps {
        sweeps += 1;
        let mut rotated = false;
        for i in 0..p {
            for j in (i + 1)..p {
                let (c, s) = givens_angle(a.iter().map(|m| [m[(i, i)], m[(i, j)], m[(j, i)], m[(j, j)]]));
                if s.abs() < opts.tol {
                    continue;
                }
                rotated = true;
                for m in a.iter_mut() {
                    rotate_rows(m, i, j, c, s);
                    rotate_cols(m, i, j, c, s);
                }
                rotate_cols(&mut v, i, j, c, s);
                observer(joint_diag_objective(&a));
            }
        }
        history.push(joint_diag_objective(&a));
        if !rotated {
            converged = true;
            break;
        }
    }

    // rows ordered by decreasing sum of squared diagonal entries
    let strength: Vec<f64> = (0..p).map(|i| a.iter().map(|m| m[(i, i)] * m[(i, i)]).sum()).collect();
    let idx = sorted_indices(&strength, Order::Decreasing);
    let u = v.select_columns(idx.iter()).transpose();

    Ok(JointDiagResult {
        u,
        objective: *history.last().unwrap(),
        sweeps,
        converged,
        history,
    })
}

fn rotate_rows(m: &mut DMatrix<f64>, i: usize, j: usize, c: f64, s: f64) {
    for k in 0..m.ncols() {
        let (x, y) = (m[(i, k)], m[(j, k)]);
        m[(i, k)] = c * x + s * y;
        m[(j, k)] = -s * x + c * y;
    }
}

fn rotate_cols(m: &mut DMatrix<f64>, i: usize, j: usize, c: f64, s: f64) {
    for k in 0..m.nrows() {
        let (x, y) = (m[(k, i)], m[(k, j)]);
        m[(k, i)] = c * x + s * y;
        m[(k, j)] = -s * x + c * y;
    }
}

/// Largest absolute off-diagonal entry.
pub fn max_off_diagonal(m: &DMatrix<f64>) -> f64 {
    let mut best = 0.0f64;
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            if i != j {
                best = best.max(m[(i, j)].abs());
            }
        }
    }
    best
}

/// Spectral norm of a symmetric matrix.
pub fn sym_spectral_norm(m: &DMatrix<f64>) -> f64 {
    SymmetricEigen::new(symmetrize(m))
        .eigenvalues
        .iter()
        .fold(0.0f64, |acc, v| acc.max(v.abs()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn random_matrix(rng: &mut ChaCha8Rng, p: usize) -> DMatrix<f64> {
        DMatrix::from_fn(p, p, |_, _| rng.sample(StandardNormal))
    }

    fn random_spd(rng: &mut ChaCha8Rng, p: usize) -> DMatrix<f64> {
        let a = random_matrix(rng, p);
        &a * a.transpose() + DMatrix::identity(p, p) * 0.5
    }

    fn random_orthogonal(rng: &mut ChaCha8Rng, p: usize) -> DMatrix<f64> {
        random_matrix(rng, p).qr().q()
    }

    #[test]
    fn inv_sqrt_examples() {
        let i3 = DMatrix::<f64>::identity(3, 3);
        assert_abs_diff_eq!(sym_inv_sqrt(&i3).unwrap(), i3, epsilon = 1e-15);

        let d = DMatrix::from_diagonal(&DVector::from_vec(vec![4.0, 9.0]));
        let expected = DMatrix::from_diagonal(&DVector::from_vec(vec![0.5, 1.0 / 3.0]));
        assert_abs_diff_eq!(sym_inv_sqrt(&d).unwrap(), expected, epsilon = 1e-15);

        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let s = random_spd(&mut rng, 5);
        let b = sym_inv_sqrt(&s).unwrap();
        assert_abs_diff_eq!(&b * &s * &b, DMatrix::identity(5, 5), epsilon = 1e-10);
    }

    #[test]
    fn inv_sqrt_rejects_indefinite() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -2.0]);
        match sym_inv_sqrt(&m) {
            Err(SbssError::NotPositiveDefinite { smallest, .. }) => assert_eq!(smallest, -2.0),
            other => panic!("expected NotPositiveDefinite, got {other:?}"),
        }
        let singular = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        assert!(sym_inv_sqrt(&singular).is_err());
    }

    #[test]
    fn simultaneous_diag_identity_pair() {
        let s1 = DMatrix::<f64>::identity(3, 3);
        let s2 = DMatrix::from_diagonal(&DVector::from_vec(vec![3.0, 1.0, 2.0]));
        let r = simultaneous_diag(&s1, &s2, Order::Decreasing).unwrap();
        assert_abs_diff_eq!(r.diag_values, DVector::from_vec(vec![3.0, 2.0, 1.0]), epsilon = 1e-14);
        let expected = DMatrix::from_row_slice(3, 3, &[1.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 1.0, 0.0]);
        assert_abs_diff_eq!(r.w, expected, epsilon = 1e-14);
        assert!(r.warnings.is_empty());
    }

    #[test]
    fn simultaneous_diag_equal_pair_is_inverse_sqrt() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let s = random_spd(&mut rng, 4);
        let r = simultaneous_diag(&s, &s, Order::Decreasing).unwrap();
        assert_abs_diff_eq!(r.diag_values, DVector::from_element(4, 1.0), epsilon = 1e-10);
        assert!(!r.warnings.is_empty());
        // any W with W S W^T = I is an orthogonal transform of S^{-1/2}
        let b = sym_inv_sqrt(&s).unwrap();
        let q = &r.w * b.try_inverse().unwrap();
        assert_abs_diff_eq!(&q * q.transpose(), DMatrix::identity(4, 4), epsilon = 1e-9);
        assert_abs_diff_eq!(&r.w * &s * r.w.transpose(), DMatrix::identity(4, 4), epsilon = 1e-9);
    }

    /// Real roots of det(s2 - l s1) by scanning for sign changes and bisecting.
    fn generalized_eigenvalues_by_determinant(s1: &DMatrix<f64>, s2: &DMatrix<f64>) -> Vec<f64> {
        let det = |l: f64| (s2 - s1 * l).determinant();
        let bound = 1e3;
        let steps = 200_000;
        let mut roots = Vec::new();
        let mut prev_x = -bound;
        let mut prev = det(prev_x);
        for k in 1..=steps {
            let x = -bound + 2.0 * bound * k as f64 / steps as f64;
            let cur = det(x);
            if prev == 0.0 {
                roots.push(prev_x);
            } else if prev.signum() != cur.signum() {
                let (mut lo, mut hi) = (prev_x, x);
                for _ in 0..200 {
                    let mid = 0.5 * (lo + hi);
                    if det(mid).signum() == det(lo).signum() {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                roots.push(0.5 * (lo + hi));
            }
            prev_x = x;
            prev = cur;
        }
        roots
    }

    #[test]
    fn simultaneous_diag_matches_characteristic_polynomial() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for p in 2..=4 {
            let s1 = random_spd(&mut rng, p);
            let s2 = symmetrize(&random_matrix(&mut rng, p));
            let r = simultaneous_diag(&s1, &s2, Order::Increasing).unwrap();
            let mut oracle = generalized_eigenvalues_by_determinant(&s1, &s2);
            oracle.sort_by(f64::total_cmp);
            assert_eq!(oracle.len(), p);
            for (got, want) in r.diag_values.iter().zip(&oracle) {
                assert_abs_diff_eq!(*got, *want, epsilon = 1e-8);
            }
            let white = &r.w * &s1 * r.w.transpose();
            assert_abs_diff_eq!(white, DMatrix::identity(p, p), epsilon = 1e-9);
            let d = &r.w * &s2 * r.w.transpose();
            assert!(max_off_diagonal(&d) <= 1e-9 * sym_spectral_norm(&d));
        }
    }

    #[test]
    fn rows_have_positive_dominant_entry() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let s1 = random_spd(&mut rng, 5);
        let s2 = random_spd(&mut rng, 5);
        let r = simultaneous_diag(&s1, &s2, Order::Decreasing).unwrap();
        for row in r.w.row_iter() {
            let dominant = row.iter().copied().max_by(|a, b| a.abs().total_cmp(&b.abs())).unwrap();
            assert!(dominant > 0.0);
        }
        assert!(r.diag_values.as_slice().windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn givens_angle_matches_grid_search() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let blocks: Vec<[f64; 4]> = (0..3)
                .map(|_| {
                    let (a, b, d): (f64, f64, f64) =
                        (rng.sample(StandardNormal), rng.sample(StandardNormal), rng.sample(StandardNormal));
                    [a, b, b, d]
                })
                .collect();
            let score = |c: f64, s: f64| -> f64 {
                blocks
                    .iter()
                    .map(|&[app, apq, _, aqq]| {
                        // diagonal of G^T A G with G = [[c, -s], [s, c]]
                        let d1 = c * c * app + 2.0 * c * s * apq + s * s * aqq;
                        let d2 = s * s * app - 2.0 * c * s * apq + c * c * aqq;
                        d1 * d1 + d2 * d2
                    })
                    .sum()
            };
            let steps = 200_000;
            let quarter = std::f64::consts::FRAC_PI_4;
            let best_grid = (1..=steps)
                .map(|k| -quarter + 2.0 * quarter * k as f64 / steps as f64)
                .map(|t| score(t.cos(), t.sin()))
                .fold(f64::MIN, f64::max);
            let (c, s) = givens_angle(blocks.iter().copied());
            let closed = score(c, s);
            assert!(closed >= best_grid - 1e-9, "closed form {closed} below grid {best_grid}");
            assert!(s.asin().abs() <= quarter + 1e-12);
        }
    }

    #[test]
    fn joint_diag_single_matrix_is_eigendecomposition() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let m = symmetrize(&random_matrix(&mut rng, 5));
        let r = joint_diag(&[m.clone()], JointDiagOptions::default()).unwrap();
        assert!(r.converged);
        let d = &r.u * &m * r.u.transpose();
        assert!(max_off_diagonal(&d) < 1e-10);
        let mut got: Vec<f64> = d.diagonal().iter().copied().collect();
        let mut want: Vec<f64> = sym_eigen(&m, Order::Increasing).values.iter().copied().collect();
        got.sort_by(f64::total_cmp);
        want.sort_by(f64::total_cmp);
        for (g, w) in got.iter().zip(&want) {
            assert_abs_diff_eq!(g, w, epsilon = 1e-10);
        }
    }

    #[test]
    fn joint_diag_commuting_matrices_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let v = random_orthogonal(&mut rng, 4);
        let mats: Vec<DMatrix<f64>> = (0..3)
            .map(|_| {
                let d = DVector::from_fn(4, |_, _| rng.sample::<f64, _>(StandardNormal));
                &v * DMatrix::from_diagonal(&d) * v.transpose()
            })
            .collect();
        let r = joint_diag(&mats, JointDiagOptions::default()).unwrap();
        assert!(r.converged);
        for m in &mats {
            let d = &r.u * m * r.u.transpose();
            assert!(max_off_diagonal(&d) < 1e-8 * sym_spectral_norm(m));
            assert_abs_diff_eq!(d.trace(), m.trace(), epsilon = 1e-10);
        }
        assert_abs_diff_eq!(&r.u * r.u.transpose(), DMatrix::identity(4, 4), epsilon = 1e-10);
    }

    #[test]
    fn joint_diag_beats_random_orthogonal_search() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let mats: Vec<DMatrix<f64>> = (0..2).map(|_| symmetrize(&random_matrix(&mut rng, 3))).collect();
        let r = joint_diag(&mats, JointDiagOptions::default()).unwrap();
        let score = |u: &DMatrix<f64>| -> f64 {
            mats.iter().map(|m| (u * m * u.transpose()).diagonal().norm_squared()).sum()
        };
        assert_abs_diff_eq!(score(&r.u), r.objective, epsilon = 1e-10);
        let best_random = (0..10_000)
            .map(|_| score(&random_orthogonal(&mut rng, 3)))
            .fold(f64::MIN, f64::max);
        assert!(r.objective >= best_random - 1e-12, "{} < {}", r.objective, best_random);
    }

    #[test]
    fn joint_diag_objective_monotone_per_rotation() {
        let mut rng = ChaCha8Rng::seed_from_u64(19);
        let mats: Vec<DMatrix<f64>> = (0..4).map(|_| symmetrize(&random_matrix(&mut rng, 5))).collect();
        let mut trace = vec![joint_diag_objective(&mats)];
        let r = joint_diag_observed(&mats, JointDiagOptions::default(), |obj| trace.push(obj)).unwrap();
        assert!(trace.len() > 1);
        for w in trace.windows(2) {
            assert!(w[1] >= w[0] - 1e-12 * w[0].abs(), "{} -> {}", w[0], w[1]);
        }
        for w in r.history.windows(2) {
            assert!(w[1] >= w[0] - 1e-12 * w[0].abs());
        }
    }

    #[test]
    fn joint_diag_flags_non_convergence() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let mats: Vec<DMatrix<f64>> = (0..3).map(|_| symmetrize(&random_matrix(&mut rng, 6))).collect();
        let r = joint_diag(&mats, JointDiagOptions { tol: 1e-10, max_sweeps: 1 }).unwrap();
        assert!(!r.converged);
        assert_eq!(r.sweeps, 1);
    }

    #[test]
    fn joint_diag_rejects_empty_and_mismatched() {
        assert!(joint_diag(&[], JointDiagOptions::default()).is_err());
        let mats = [DMatrix::<f64>::identity(2, 2), DMatrix::<f64>::identity(3, 3)];
        assert!(joint_diag(&mats, JointDiagOptions::default()).is_err());
    }
}
