use ndarray::{Array2, ArrayView2, Axis};
use ndarray_linalg::Inverse;

use crate::error::{Error, Result};
use crate::linalg::pinv;

#[derive(Clone, Debug)]
pub struct MaxvolResult {
    /// Selected rows; `coefficients.row(rows[j])` is the unit vector `e_j`.
    pub rows: Vec<usize>,
    /// `M * M[rows, :]^-1`.
    pub coefficients: Array2<f64>,
    /// Set when the matrix was numerically rank deficient and rows were
    /// chosen by pivoted Gram-Schmidt instead.
    pub degenerate: bool,
    pub swaps: usize,
}

/// Selects `cols` rows of a tall matrix whose square submatrix has locally
/// maximal volume: on return every entry of `M * M[rows, :]^-1` has modulus
/// at most `1 + tol`, and no exchange of two rows (or three, when the search
/// is small enough) grows the volume by more than `1 + tol`. Equal moduli
/// resolve to the lowest row index.
pub fn maxvol(m: ArrayView2<f64>, tol: f64) -> Result<MaxvolResult> {
    let (n, r) = m.dim();
    if n < r {
        return Err(Error::InvalidArgument(format!("maxvol needs rows >= cols, got {n}x{r}")));
    }
    if tol < 0.0 {
        return Err(Error::InvalidArgument(format!("maxvol tolerance {tol} is negative")));
    }
    if r == 0 {
        return Ok(MaxvolResult { rows: vec![], coefficients: Array2::zeros((n, 0)), degenerate: false, swaps: 0 });
    }

    let Some(mut rows) = lu_pivots(m) else {
        let rows = gram_schmidt_pivots(m, r);
        let sub = m.select(Axis(0), &rows);
        let coefficients = m.dot(&pinv(sub.view(), 1e-12)?);
        return Ok(MaxvolResult { rows, coefficients, degenerate: true, swaps: 0 });
    };

    let sub = m.select(Axis(0), &rows);
    let mut b = m.dot(&sub.inv()?);
    let mut swaps = 0;
    let max_swaps = 100 * r + 100;
    while swaps < max_swaps {
        single_swaps(&mut b, &mut rows, tol, &mut swaps, max_swaps);
        // Single swaps stall at local maxima; try exchanging two, then three rows.
        let Some((inc, out)) = best_multi_swap(&b, &rows, 2, tol).or_else(|| best_multi_swap(&b, &rows, 3, tol))
        else {
            break;
        };
        for (&p, &i) in inc.iter().zip(&out) {
            rows[i] = p;
        }
        swaps += inc.len();
        let sub = m.select(Axis(0), &rows);
        b = m.dot(&sub.inv()?);
    }
    Ok(MaxvolResult { rows, coefficients: b, degenerate: false, swaps })
}

fn single_swaps(b: &mut Array2<f64>, rows: &mut [usize], tol: f64, swaps: &mut usize, max_swaps: usize) {
    let n = b.nrows();
    while *swaps < max_swaps {
        let (mut bi, mut bj, mut best) = (0, 0, -1.0);
        for (i, row) in b.outer_iter().enumerate() {
            for (j, &x) in row.iter().enumerate() {
                if x.abs() > best {
                    best = x.abs();
                    bi = i;
                    bj = j;
                }
            }
        }
        if best <= 1.0 + tol {
            return;
        }
        let pivot = b[[bi, bj]];
        let col = b.column(bj).to_owned();
        let mut row = b.row(bi).to_owned();
        row[bj] -= 1.0;
        for i in 0..n {
            let f = col[i] / pivot;
            if f != 0.0 {
                b.row_mut(i).scaled_add(-f, &row);
            }
        }
        rows[bj] = bi;
        *swaps += 1;
    }
}

/// Largest number of minors a triple-swap search may evaluate.
const TRIPLE_SWAP_BUDGET: usize = 2_000_000;

/// Best replacement of `k` selected rows (`k` = 2 or 3) by unselected rows,
/// if it grows the volume by more than `1 + tol`. The volume ratio is the
/// `k x k` minor of the coefficients on the incoming rows and outgoing slots.
fn best_multi_swap(b: &Array2<f64>, rows: &[usize], k: usize, tol: f64) -> Option<(Vec<usize>, Vec<usize>)> {
    let (n, r) = b.dim();
    if r < k || n - r < k {
        return None;
    }
    let mut selected = vec![false; n];
    for &i in rows {
        selected[i] = true;
    }
    let free: Vec<usize> = (0..n).filter(|&i| !selected[i]).collect();
    if k == 3 && choose3(free.len()).saturating_mul(choose3(r)) > TRIPLE_SWAP_BUDGET {
        return None;
    }
    let slots = combinations(r, k);
    let mut best = 1.0 + tol;
    let mut arg = None;
    for inc in combinations(free.len(), k) {
        let inc: Vec<usize> = inc.iter().map(|&x| free[x]).collect();
        for out in &slots {
            let v = minor(b, &inc, out).abs();
            if v > best {
                best = v;
                arg = Some((inc.clone(), out.clone()));
            }
        }
    }
    arg
}

fn choose3(n: usize) -> usize {
    if n < 3 { 0 } else { n * (n - 1) * (n - 2) / 6 }
}

fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut c: Vec<usize> = (0..k).collect();
    if k > n {
        return out;
    }
    loop {
        out.push(c.clone());
        let Some(i) = (0..k).rev().find(|&i| c[i] < n - k + i) else { return out };
        c[i] += 1;
        for j in i + 1..k {
            c[j] = c[j - 1] + 1;
        }
    }
}

fn minor(b: &Array2<f64>, r: &[usize], c: &[usize]) -> f64 {
    let e = |i: usize, j: usize| b[[r[i], c[j]]];
    match r.len() {
        2 => e(0, 0) * e(1, 1) - e(0, 1) * e(1, 0),
        3 => {
            e(0, 0) * (e(1, 1) * e(2, 2) - e(1, 2) * e(2, 1)) - e(0, 1) * (e(1, 0) * e(2, 2) - e(1, 2) * e(2, 0))
                + e(0, 2) * (e(1, 0) * e(2, 1) - e(1, 1) * e(2, 0))
        }
        _ => unreachable!("multi-swap sizes are 2 or 3"),
    }
}

/// Initial rows by Gaussian elimination with partial pivoting, or `None`
/// when a pivot vanishes.
fn lu_pivots(m: ArrayView2<f64>) -> Option<Vec<usize>> {
    let (n, r) = m.dim();
    let scale = m.iter().fold(0.0f64, |a, &x| a.max(x.abs()));
    if scale == 0.0 {
        return None;
    }
    let tiny = scale * 1e-13;
    let mut w = m.to_owned();
    let mut used = vec![false; n];
    let mut rows = Vec::with_capacity(r);
    for j in 0..r {
        let mut p = None;
        let mut best = 0.0;
        for i in 0..n {
            if !used[i] && w[[i, j]].abs() > best {
                best = w[[i, j]].abs();
                p = Some(i);
            }
        }
        let p = p.filter(|_| best > tiny)?;
        used[p] = true;
        rows.push(p);
        let prow = w.row(p).to_owned();
        for i in 0..n {
            if !used[i] {
                let f = w[[i, j]] / prow[j];
                if f != 0.0 {
                    w.row_mut(i).scaled_add(-f, &prow);
                }
            }
        }
    }
    Some(rows)
}

/// Selects `r` rows by Gram-Schmidt with largest-residual pivoting.
pub(crate) fn gram_schmidt_pivots(m: ArrayView2<f64>, r: usize) -> Vec<usize> {
    let n = m.nrows();
    let r = r.min(n);
    let mut w = m.to_owned();
    let mut used = vec![false; n];
    let mut rows = Vec::with_capacity(r);
    for _ in 0..r {
        let mut p = None;
        let mut best = -1.0;
        for i in 0..n {
            let nrm = w.row(i).dot(&w.row(i));
            if !used[i] && nrm > best {
                best = nrm;
                p = Some(i);
            }
        }
        let p = p.expect("n >= r leaves an unused row");
        used[p] = true;
        rows.push(p);
        if best > 0.0 {
            let q = w.row(p).mapv(|x| x / best.sqrt());
            for i in 0..n {
                if !used[i] {
                    let c = w.row(i).dot(&q);
                    w.row_mut(i).scaled_add(-c, &q);
                }
            }
        }
    }
    rows
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{arr2, Array2};
    use ndarray_linalg::Determinant;
    use rand::Rng;

    #[test]
    fn identity_selects_all_rows() {
        let m = Array2::<f64>::eye(4);
        let res = maxvol(m.view(), 1e-2).unwrap();
        let mut rows = res.rows.clone();
        rows.sort();
        assert_eq!(rows, vec![0, 1, 2, 3]);
        let det = m.select(Axis(0), &res.rows).det().unwrap();
        assert!((det.abs() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn single_column_picks_largest_modulus() {
        let m = arr2(&[[1.0], [2.0], [0.5]]);
        assert_eq!(maxvol(m.view(), 0.0).unwrap().rows, vec![1]);
        let m = arr2(&[[1.0], [-3.0], [3.0]]);
        assert_eq!(maxvol(m.view(), 0.0).unwrap().rows, vec![1], "ties go to the lowest row");
    }

    #[test]
    fn volume_is_close_to_exhaustive_maximum() {
        let tol = 1e-2;
        for seed in 0..200 {
            let mut rng = crate::rng::seeded(seed);
            let m = Array2::from_shape_simple_fn((8, 3), || rng.random_range(-1.0..1.0));
            let res = maxvol(m.view(), tol).unwrap();
            let vol = m.select(Axis(0), &res.rows).det().unwrap().abs();
            let mut best: f64 = 0.0;
            for a in 0..8 {
                for b in a + 1..8 {
                    for c in b + 1..8 {
                        best = best.max(m.select(Axis(0), &[a, b, c]).det().unwrap().abs());
                    }
                }
            }
            // With r = 3 every subset is one triple swap away.
            assert!(vol * (1.0 + tol) >= best, "seed {seed}: {vol} vs {best}");
            assert!(res.coefficients.iter().all(|x| x.abs() <= 1.0 + tol + 1e-12));
        }
    }

    #[test]
    fn rank_deficient_input_is_flagged() {
        let m = arr2(&[[1.0, 2.0], [2.0, 4.0], [3.0, 6.0]]);
        let res = maxvol(m.view(), 1e-2).unwrap();
        assert!(res.degenerate);
        assert_eq!(res.rows.len(), 2);
        assert!(maxvol(Array2::<f64>::zeros((3, 1)).view(), 0.0).unwrap().degenerate);
    }

    #[test]
    fn wide_input_is_rejected() {
        assert!(maxvol(Array2::<f64>::zeros((2, 3)).view(), 0.0).is_err());
    }
}
