//! Thin wrappers over the LAPACK backend: economy SVD, rank selection and a
//! cutoff pseudo-inverse.

use ndarray::{s, Array1, Array2, ArrayView2};
use ndarray_linalg::{JobSvd, SVDDC};

use crate::error::{Error, Result};
use crate::tt::Field;

/// Economy SVD `a = u diag(s) vt` with `k = min(m, n)` singular triplets.
pub fn svd_thin<T: Field>(a: ArrayView2<T>) -> Result<(Array2<T>, Array1<f64>, Array2<T>)> {
    let (m, n) = a.dim();
    if m == 0 || n == 0 {
        return Err(Error::InvalidArgument(format!("svd of empty {m}x{n} matrix")));
    }
    if a.iter().any(|x| !x.abs().is_finite()) {
        return Err(Error::Numerical("non-finite entry in svd input".into()));
    }
    let owned = a.as_standard_layout().to_owned();
    let (u, sv, vt) = owned.svddc(JobSvd::Some)?;
    let u = u.ok_or_else(|| Error::Numerical("svd returned no left vectors".into()))?;
    let vt = vt.ok_or_else(|| Error::Numerical("svd returned no right vectors".into()))?;
    Ok((u, sv, vt))
}

/// Smallest rank whose discarded singular values have Frobenius norm at most
/// `abs_tol`, clamped to `1..=max_rank`.
pub fn tail_rank(s: &Array1<f64>, abs_tol: f64, max_rank: usize) -> usize {
    let mut tail = 0.0;
    let mut rank = s.len();
    for k in (0..s.len()).rev() {
        tail += s[k] * s[k];
        if tail.sqrt() > abs_tol {
            break;
        }
        rank = k;
    }
    rank.clamp(1, max_rank.max(1)).min(s.len().max(1))
}

/// Singular values at or below this fraction of the largest are numerically
/// zero for rank purposes.
pub fn numerical_zero(s: &Array1<f64>, m: usize, n: usize) -> f64 {
    let top = s.iter().cloned().fold(0.0, f64::max);
    top * f64::EPSILON * (m.max(n) as f64).max(16.0)
}

/// Moore-Penrose pseudo-inverse dropping singular values at or below
/// `rel_cutoff * s_max`. A zero matrix maps to zero.
pub fn pinv<T: Field>(a: ArrayView2<T>, rel_cutoff: f64) -> Result<Array2<T>> {
    let (m, n) = a.dim();
    let (u, sv, vt) = svd_thin(a)?;
    let top = sv.iter().cloned().fold(0.0, f64::max);
    let mut out = Array2::<T>::zeros((n, m));
    if top == 0.0 {
        return Ok(out);
    }
    let cut = rel_cutoff.max(0.0) * top;
    for k in 0..sv.len() {
        if sv[k] <= cut {
            continue;
        }
        let inv = T::from_real(1.0 / sv[k]);
        let vcol = vt.row(k);
        let ucol = u.column(k);
        for i in 0..n {
            let vi = vcol[i].conj() * inv;
            for j in 0..m {
                out[[i, j]] += vi * ucol[j].conj();
            }
        }
    }
    Ok(out)
}

/// Keeps the leading `rank` singular triplets.
pub fn truncate<T: Field>(
    u: &Array2<T>,
    s: &Array1<f64>,
    vt: &Array2<T>,
    rank: usize,
) -> (Array2<T>, Array1<f64>, Array2<T>) {
    (
        u.slice(s![.., ..rank]).to_owned(),
        s.slice(s![..rank]).to_owned(),
        vt.slice(s![..rank, ..]).to_owned(),
    )
}
