use log::warn;
use ndarray::{Array2, ArrayView2, Axis};

use super::maxvol::{gram_schmidt_pivots, maxvol};
use crate::error::{Error, Result};
use crate::linalg::pinv;

/// Factors of `A ~ C U^+ R` with `C = A[:, J]`, `R = A[I, :]`, `U = A[I, J]`.
#[derive(Clone, Debug)]
pub struct CurFactors {
    pub rows: Vec<usize>,
    pub cols: Vec<usize>,
    pub c: Array2<f64>,
    pub u_pinv: Array2<f64>,
    pub r: Array2<f64>,
}

impl CurFactors {
    pub fn reconstruct(&self) -> Array2<f64> {
        self.c.dot(&self.u_pinv).dot(&self.r)
    }
}

/// Builds the cross factors from the entries on rows `rows` and columns
/// `cols` only. Singular values of `U` at or below `pinv_cutoff * s_max` are
/// dropped from the pseudo-inverse.
pub fn cur_approximate<F>(
    shape: (usize, usize),
    mut entry: F,
    rows: &[usize],
    cols: &[usize],
    pinv_cutoff: f64,
) -> Result<CurFactors>
where
    F: FnMut(usize, usize) -> f64,
{
    let (m, n) = shape;
    if rows.len() != cols.len() || rows.is_empty() {
        return Err(Error::InvalidArgument(format!("cross needs |I| = |J| > 0, got {} and {}", rows.len(), cols.len())));
    }
    if let Some(&i) = rows.iter().find(|&&i| i >= m) {
        return Err(Error::InvalidArgument(format!("row {i} outside {m} rows")));
    }
    if let Some(&j) = cols.iter().find(|&&j| j >= n) {
        return Err(Error::InvalidArgument(format!("column {j} outside {n} columns")));
    }
    let c = Array2::from_shape_fn((m, cols.len()), |(i, k)| entry(i, cols[k]));
    let r = Array2::from_shape_fn((rows.len(), n), |(k, j)| entry(rows[k], j));
    let u = c.select(Axis(0), rows);
    if u.iter().all(|&x| x == 0.0) {
        warn!("cross intersection is identically zero, approximation is zero");
    }
    let u_pinv = pinv(u.view(), pinv_cutoff)?;
    Ok(CurFactors { rows: rows.to_vec(), cols: cols.to_vec(), c, u_pinv, r })
}

/// Alternating maxvol on a fully known matrix: columns by pivoted
/// Gram-Schmidt, then rows and columns refined in turn until stable.
pub fn maxvol_cross(a: ArrayView2<f64>, rank: usize, tol: f64, max_iters: usize) -> Result<(Vec<usize>, Vec<usize>)> {
    let (m, n) = a.dim();
    if rank == 0 || rank > m.min(n) {
        return Err(Error::InvalidArgument(format!("rank {rank} invalid for {m}x{n} matrix")));
    }
    let mut cols = gram_schmidt_pivots(a.t(), rank);
    let mut rows = Vec::new();
    for _ in 0..max_iters.max(1) {
        let new_rows = maxvol(a.select(Axis(1), &cols).view(), tol)?.rows;
        let new_cols = maxvol(a.select(Axis(0), &new_rows).t(), tol)?.rows;
        let stable = new_rows == rows && new_cols == cols;
        rows = new_rows;
        cols = new_cols;
        if stable {
            break;
        }
    }
    Ok((rows, cols))
}
