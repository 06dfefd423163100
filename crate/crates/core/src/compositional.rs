//! Log-ratio transforms for compositional data.
//!
//! Pivot coordinates use the input column order: coordinate `j` contrasts
//! part `j` against the geometric mean of all later parts.

use std::collections::HashSet;

use nalgebra::DMatrix;

use crate::error::{Result, SbssError};

/// Strictly positive part concentrations, one row per observation.
#[derive(Debug, Clone, PartialEq)]
pub struct Composition {
    parts: DMatrix<f64>,
    part_names: Vec<String>,
}

impl Composition {
    pub fn new(parts: DMatrix<f64>, part_names: Vec<String>) -> Result<Self> {
        let p = parts.ncols();
        if p < 2 {
            return Err(SbssError::InvalidSample(format!("a composition needs at least 2 parts, got {p}")));
        }
        if part_names.len() != p {
            return Err(SbssError::DimensionMismatch(format!("{} part names for {p} parts", part_names.len())));
        }
        let mut seen = HashSet::new();
        if let Some(dup) = part_names.iter().find(|name| !seen.insert(name.as_str())) {
            return Err(SbssError::InvalidSample(format!("duplicate part name '{dup}'")));
        }
        for i in 0..parts.nrows() {
            for j in 0..p {
                let value = parts[(i, j)];
                if !(value > 0.0 && value.is_finite()) {
                    return Err(SbssError::NonPositivePart { row: i, part: part_names[j].clone(), value });
                }
            }
        }
        Ok(Self { parts, part_names })
    }

    /// Parts named `x1, x2, ...`.
    pub fn unnamed(parts: DMatrix<f64>) -> Result<Self> {
        let names = (1..=parts.ncols()).map(|j| format!("x{j}")).collect();
        Self::new(parts, names)
    }

    pub fn parts(&self) -> &DMatrix<f64> {
        &self.parts
    }

    pub fn part_names(&self) -> &[String] {
        &self.part_names
    }

    pub fn n(&self) -> usize {
        self.parts.nrows()
    }

    pub fn p(&self) -> usize {
        self.parts.ncols()
    }
}

/// Centered log-ratio coordinates; every row sums to zero.
pub fn clr(comp: &Composition) -> DMatrix<f64> {
    let mut out = comp.parts.map(f64::ln);
    let p = out.ncols() as f64;
    for mut row in out.row_iter_mut() {
        let mean = row.sum() / p;
        row.add_scalar_mut(-mean);
    }
    out
}

/// Orthonormal `p x (p-1)` basis of the clr hyperplane with `clr = ilr v^T`.
#[derive(Debug, Clone, PartialEq)]
pub struct ContrastMatrix {
    v: DMatrix<f64>,
}

impl ContrastMatrix {
    /// Pivot contrast matrix for `p` parts.
    pub fn pivot(p: usize) -> Result<Self> {
        if p < 2 {
            return Err(SbssError::InvalidParameter(format!("contrast matrix needs p >= 2, got {p}")));
        }
        let mut v = DMatrix::zeros(p, p - 1);
        for j in 0..p - 1 {
            let rest = (p - j - 1) as f64;
            let scale = (rest / (rest + 1.0)).sqrt();
            v[(j, j)] = scale;
            for k in j + 1..p {
                v[(k, j)] = -scale / rest;
            }
        }
        Ok(Self { v })
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.v
    }

    pub fn parts(&self) -> usize {
        self.v.nrows()
    }
}

/// Pivot (isometric log-ratio) coordinates and their contrast matrix.
pub fn ilr_pivot(comp: &Composition) -> (DMatrix<f64>, ContrastMatrix) {
    let v = ContrastMatrix::pivot(comp.p()).expect("composition has at least two parts");
    let coords = clr(comp) * &v.v;
    (coords, v)
}

/// Maps pivot coordinates back to clr coordinates.
pub fn ilr_to_clr(ilr: &DMatrix<f64>, v: &ContrastMatrix) -> Result<DMatrix<f64>> {
    if ilr.ncols() != v.v.ncols() {
        return Err(SbssError::DimensionMismatch(format!(
            "{} ilr columns for a contrast matrix with {} columns",
            ilr.ncols(),
            v.v.ncols()
        )));
    }
    Ok(ilr * v.v.transpose())
}

/// Per-component loadings on the original parts.
#[derive(Debug, Clone, PartialEq)]
pub struct CombinedLoadings {
    /// `(p-1) x p`, one row per latent component.
    pub matrix: DMatrix<f64>,
    pub part_names: Vec<String>,
}

/// `W v^T` for an unmixing matrix `w` estimated in ilr space.
pub fn combined_loadings(v: &ContrastMatrix, w: &DMatrix<f64>, part_names: &[String]) -> Result<CombinedLoadings> {
    let q = v.v.ncols();
    if !w.is_square() || w.nrows() != q {
        return Err(SbssError::DimensionMismatch(format!(
            "unmixing matrix {:?} does not match {q} ilr coordinates",
            w.shape()
        )));
    }
    if part_names.len() != v.v.nrows() {
        return Err(SbssError::DimensionMismatch(format!(
            "{} part names for {} parts",
            part_names.len(),
            v.v.nrows()
        )));
    }
    Ok(CombinedLoadings { matrix: w * v.v.transpose(), part_names: part_names.to_vec() })
}
