//! Minimum distance index of an unmixing estimate.
//!
//! For a gain matrix `G = W_hat A`, the index is
//! `inf_M ||M G - I||_F / sqrt(p - 1)` over all products of a permutation,
//! a positive diagonal and a sign matrix. Fixing the row assignment, the
//! optimal signed scale for each row is available in closed form, leaving
//! `p - max_perm sum_i g_hat[perm(i), i]^2` where `g_hat` has unit-norm rows.
//! The remaining maximization is a linear assignment problem.

use nalgebra::DMatrix;

use crate::error::{Result, SbssError};

/// Rows with a Euclidean norm below this are rejected.
pub const ZERO_ROW_TOLERANCE: f64 = 1e-12;

/// Minimum distance index of the gain matrix `g`, in `[0, 1]`.
pub fn mdi(g: &DMatrix<f64>) -> Result<f64> {
    let p = g.nrows();
    if !g.is_square() || p < 2 {
        return Err(SbssError::DimensionMismatch(format!(
            "gain matrix must be square with p >= 2, got {:?}",
            g.shape()
        )));
    }
    if g.iter().any(|v| !v.is_finite()) {
        return Err(SbssError::InvalidParameter("gain matrix has non-finite entries".into()));
    }
    let mut score = DMatrix::zeros(p, p);
    let mut norms = vec![0.0; p];
    for r in 0..p {
        let norm_sq = g.row(r).norm_squared();
        if norm_sq.sqrt() < ZERO_ROW_TOLERANCE {
            return Err(SbssError::ZeroRow(r));
        }
        norms[r] = norm_sq;
        for c in 0..p {
            score[(r, c)] = g[(r, c)] * g[(r, c)] / norm_sq;
        }
    }
    let assignment = max_weight_assignment(&score);
    // p - sum of assigned scores, summed as the unassigned mass so that
    // near-exact recoveries do not cancel
    let residual: f64 = assignment
        .iter()
        .enumerate()
        .map(|(r, &a)| (0..p).filter(|&c| c != a).map(|c| g[(r, c)] * g[(r, c)]).sum::<f64>() / norms[r])
        .sum();
    let md = (residual / (p as f64 - 1.0)).sqrt();
    Ok(md.min(1.0))
}

/// `mdi(W A)`.
pub fn mdi_of(w: &DMatrix<f64>, a: &DMatrix<f64>) -> Result<f64> {
    if w.ncols() != a.nrows() {
        return Err(SbssError::DimensionMismatch(format!(
            "cannot multiply {:?} by {:?}",
            w.shape(),
            a.shape()
        )));
    }
    mdi(&(w * a))
}

/// Column assigned to each row maximizing the total weight of a square matrix
/// (Hungarian method with potentials, O(p^3)).
pub fn max_weight_assignment(weights: &DMatrix<f64>) -> Vec<usize> {
    let n = weights.nrows();
    let max = weights.max();
    // minimize cost = max - weight, 1-based arrays with sentinel column 0
    let cost = |r: usize, c: usize| max - weights[(r - 1, c - 1)];
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut owner = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for row in 1..=n {
        owner[0] = row;
        let mut col0 = 0usize;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[col0] = true;
            let r0 = owner[col0];
            let mut delta = f64::INFINITY;
            let mut col1 = 0usize;
            for c in 1..=n {
                if used[c] {
                    continue;
                }
                let cur = cost(r0, c) - u[r0] - v[c];
                if cur < minv[c] {
                    minv[c] = cur;
                    way[c] = col0;
                }
                if minv[c] < delta {
                    delta = minv[c];
                    col1 = c;
                }
            }
            for c in 0..=n {
                if used[c] {
                    u[owner[c]] += delta;
                    v[c] -= delta;
                } else {
                    minv[c] -= delta;
                }
            }
            col0 = col1;
            if owner[col0] == 0 {
                break;
            }
        }
        loop {
            let col1 = way[col0];
            owner[col0] = owner[col1];
            col0 = col1;
            if col0 == 0 {
                break;
            }
        }
    }
    let mut assignment = vec![0usize; n];
    for c in 1..=n {
        assignment[owner[c] - 1] = c - 1;
    }
    assignment
}
