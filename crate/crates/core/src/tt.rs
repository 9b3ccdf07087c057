//! Tensor trains.
//!
//! Core `i` is an order-3 array with layout `(left bond, physical, right
//! bond)`, stored row-major. Element `A(g_1, .., g_N)` is the matrix product
//! `G_1[:, g_1, :] G_2[:, g_2, :] ... G_N[:, g_N, :]` with boundary bonds of
//! size one. Every reshape in the crate is defined against this layout:
//! unfolding a core as `(left * phys) x right` or `left x (phys * right)` is a
//! free view.
//!
//! For Pauli-coefficient trains the physical dimension is 4 and element
//! `A(g)` is the coefficient of `sigma^g` in `rho`.

use std::fmt::Debug;

use log::warn;
use ndarray::{s, Array2, Array3, Axis};
use ndarray_linalg::{c64, Lapack, Scalar};
use rand::Rng;

use crate::dense::{DenseOperator, MAX_DENSE_QUBITS};
use crate::error::{Error, Result};
use crate::linalg::{numerical_zero, svd_thin, tail_rank};
use crate::pauli::{coefficients_to_operator, PAULI_DIM};
use crate::rng::seeded;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ScalarKind {
    Real,
    Complex,
}

/// Scalar fields a tensor train can be built over: `f64` and `c64`.
pub trait Field: Scalar<Real = f64, Complex = c64> + Lapack + Debug + 'static {
    const KIND: ScalarKind;
}

impl Field for f64 {
    const KIND: ScalarKind = ScalarKind::Real;
}

impl Field for c64 {
    const KIND: ScalarKind = ScalarKind::Complex;
}

#[derive(Clone, Debug, PartialEq)]
pub struct TensorTrain<T> {
    cores: Vec<Array3<T>>,
}

pub type RealTT = TensorTrain<f64>;
pub type ComplexTT = TensorTrain<c64>;

/// Largest number of elements a dense tensor may have: `4^12`.
pub const MAX_DENSE_ELEMENTS: usize = 1 << (2 * MAX_DENSE_QUBITS);

impl<T: Field> TensorTrain<T> {
    pub fn new(cores: Vec<Array3<T>>) -> Result<Self> {
        if cores.is_empty() {
            return Err(Error::InvalidArgument("tensor train needs at least one core".into()));
        }
        let last = cores.len() - 1;
        if cores[0].dim().0 != 1 {
            return Err(Error::DimensionMismatch { site: 0, detail: format!("left boundary bond is {}, expected 1", cores[0].dim().0) });
        }
        if cores[last].dim().2 != 1 {
            return Err(Error::DimensionMismatch { site: last, detail: format!("right boundary bond is {}, expected 1", cores[last].dim().2) });
        }
        for i in 0..last {
            let right = cores[i].dim().2;
            let left = cores[i + 1].dim().0;
            if right != left {
                return Err(Error::DimensionMismatch { site: i + 1, detail: format!("left bond {left} does not match previous right bond {right}") });
            }
        }
        for (site, c) in cores.iter().enumerate() {
            let (l, d, r) = c.dim();
            if l == 0 || d == 0 || r == 0 {
                return Err(Error::DimensionMismatch { site, detail: "zero-sized core".into() });
            }
        }
        let cores = cores.into_iter().map(|c| c.as_standard_layout().into_owned()).collect();
        Ok(Self { cores })
    }

    /// Bond-one train from per-site vectors: `A(g) = prod_i v_i[g_i]`.
    pub fn product(vectors: &[Vec<T>]) -> Result<Self> {
        let cores = vectors
            .iter()
            .map(|v| Array3::from_shape_vec((1, v.len(), 1), v.clone()).expect("shape matches length"))
            .collect();
        Self::new(cores)
    }

    pub fn zeros(phys_dims: &[usize]) -> Result<Self> {
        Self::new(phys_dims.iter().map(|&d| Array3::zeros((1, d, 1))).collect())
    }

    pub fn len(&self) -> usize {
        self.cores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cores.is_empty()
    }

    pub fn kind(&self) -> ScalarKind {
        T::KIND
    }

    pub fn cores(&self) -> &[Array3<T>] {
        &self.cores
    }

    pub fn core(&self, site: usize) -> &Array3<T> {
        &self.cores[site]
    }

    pub fn into_cores(self) -> Vec<Array3<T>> {
        self.cores
    }

    pub fn phys_dims(&self) -> Vec<usize> {
        self.cores.iter().map(|c| c.dim().1).collect()
    }

    /// Bond dimensions `chi_0 ..= chi_N`, boundaries included.
    pub fn bond_dims(&self) -> Vec<usize> {
        let mut b = vec![1];
        b.extend(self.cores.iter().map(|c| c.dim().2));
        b
    }

    pub fn max_bond(&self) -> usize {
        self.bond_dims().into_iter().max().unwrap_or(1)
    }

    pub fn num_params(&self) -> usize {
        self.cores.iter().map(|c| c.len()).sum()
    }

    /// Multiplies the whole tensor by `c` through the first core.
    pub fn scaled(&self, c: T) -> Self {
        let mut out = self.clone();
        out.cores[0].mapv_inplace(|x| x * c);
        out
    }

    fn check_index(&self, idx: &[u8]) -> Result<()> {
        if idx.len() != self.len() {
            return Err(Error::DimensionMismatch {
                site: idx.len().min(self.len()),
                detail: format!("index has length {}, train has {} sites", idx.len(), self.len()),
            });
        }
        for (site, (&g, c)) in idx.iter().zip(&self.cores).enumerate() {
            if g as usize >= c.dim().1 {
                return Err(Error::DimensionMismatch { site, detail: format!("index {g} outside physical dimension {}", c.dim().1) });
            }
        }
        Ok(())
    }

    /// `A(idx)` as the product of the selected core slices.
    pub fn element(&self, idx: &[u8]) -> Result<T> {
        self.check_index(idx)?;
        Ok(self.element_unchecked(idx))
    }

    /// [`element`](Self::element) without bounds validation. Panics on a
    /// malformed index.
    pub fn element_unchecked(&self, idx: &[u8]) -> T {
        let mut v = vec![T::one()];
        let mut next = Vec::new();
        for (core, &g) in self.cores.iter().zip(idx) {
            let (l, d, r) = core.dim();
            let data = core.as_slice().expect("standard layout");
            let off = g as usize * r;
            next.clear();
            next.resize(r, T::zero());
            for (a, &va) in v.iter().enumerate().take(l) {
                if va == T::zero() {
                    continue;
                }
                let row = &data[a * d * r + off..a * d * r + off + r];
                for (n, &x) in next.iter_mut().zip(row) {
                    *n += va * x;
                }
            }
            std::mem::swap(&mut v, &mut next);
        }
        v[0]
    }

    /// All elements, flat and row-major with the first site most significant.
    pub fn materialize(&self) -> Result<Vec<T>> {
        let total: usize = self.phys_dims().iter().try_fold(1usize, |acc, &d| acc.checked_mul(d)).unwrap_or(usize::MAX);
        if total > MAX_DENSE_ELEMENTS {
            return Err(Error::TooLarge { requested: self.len(), max: MAX_DENSE_QUBITS });
        }
        let n = self.len();
        let mid = n / 2;
        // Left block: rows enumerate sites 0..mid.
        let mut left = Array2::<T>::ones((1, 1));
        for core in &self.cores[..mid] {
            let (l, d, r) = core.dim();
            let g = core.view().into_shape_with_order((l, d * r)).expect("standard layout");
            let rows = left.nrows();
            left = left.dot(&g).into_shape_with_order((rows * d, r)).expect("contiguous");
        }
        // Right block: columns enumerate sites mid..n.
        let mut right = Array2::<T>::ones((1, 1));
        for core in self.cores[mid..].iter().rev() {
            let (l, d, r) = core.dim();
            let g = core.view().into_shape_with_order((l * d, r)).expect("standard layout");
            let cols = right.ncols();
            right = g.dot(&right).into_shape_with_order((l, d * cols)).expect("contiguous");
        }
        let full = left.dot(&right);
        Ok(full.into_raw_vec_and_offset().0)
    }

    /// Successive truncated SVDs of a dense tensor. The discarded weight at
    /// each of the `N - 1` cuts is at most `tol * ||A|| / sqrt(N - 1)`, so the
    /// result differs from `data` by at most `tol * ||A||` in Frobenius norm.
    pub fn from_dense(data: &[T], phys_dims: &[usize], tol: f64) -> Result<Self> {
        if phys_dims.is_empty() {
            return Err(Error::InvalidArgument("no physical dimensions".into()));
        }
        if tol < 0.0 || !tol.is_finite() {
            return Err(Error::InvalidArgument(format!("tolerance {tol} must be finite and non-negative")));
        }
        let total: usize = phys_dims.iter().product();
        if total > MAX_DENSE_ELEMENTS {
            return Err(Error::TooLarge { requested: phys_dims.len(), max: MAX_DENSE_QUBITS });
        }
        if data.len() != total {
            return Err(Error::InvalidArgument(format!("dense tensor has {} elements, dims imply {total}", data.len())));
        }
        let n = phys_dims.len();
        if n == 1 {
            return Self::new(vec![Array3::from_shape_vec((1, phys_dims[0], 1), data.to_vec()).expect("sized")]);
        }
        let norm = data.iter().map(|x| x.square()).sum::<f64>().sqrt();
        let budget = tol * norm / ((n - 1) as f64).sqrt();

        let mut cores = Vec::with_capacity(n);
        let mut rank_prev = 1;
        let mut rest = total / phys_dims[0];
        let mut mat = Array2::from_shape_vec((phys_dims[0], rest), data.to_vec()).expect("sized");
        for k in 0..n - 1 {
            let (u, sv, vt) = svd_thin(mat.view())?;
            let floor = numerical_zero(&sv, mat.nrows(), mat.ncols());
            let numeric_rank = sv.iter().filter(|&&x| x > floor).count().max(1);
            let rank = tail_rank(&sv, budget, usize::MAX).min(numeric_rank);
            let core = u.slice(s![.., ..rank]).to_owned().into_shape_with_order((rank_prev, phys_dims[k], rank)).expect("sized");
            cores.push(core);
            let mut carry = vt.slice(s![..rank, ..]).to_owned();
            for (mut row, &sk) in carry.axis_iter_mut(Axis(0)).zip(sv.iter()) {
                row.mapv_inplace(|x| x.mul_real(sk));
            }
            rank_prev = rank;
            let d_next = phys_dims[k + 1];
            rest /= d_next;
            mat = carry.into_shape_with_order((rank * d_next, rest)).expect("sized");
        }
        cores.push(mat.into_shape_with_order((rank_prev, phys_dims[n - 1], 1)).expect("sized"));
        Self::new(cores)
    }

    /// `sum_g conj(A_self(g)) A_other(g)`, contracted site by site. For Pauli
    /// trains this is `Tr(rho_self^dagger rho_other) / 2^N`.
    pub fn trace_product(&self, other: &TensorTrain<T>) -> Result<T> {
        if self.len() != other.len() {
            return Err(Error::DimensionMismatch {
                site: self.len().min(other.len()),
                detail: format!("trains have {} and {} sites", self.len(), other.len()),
            });
        }
        let mut env = Array2::<T>::ones((1, 1));
        for (site, (a, b)) in self.cores.iter().zip(&other.cores).enumerate() {
            let (_, da, ra) = a.dim();
            let (_, db, rb) = b.dim();
            if da != db {
                return Err(Error::DimensionMismatch { site, detail: format!("physical dimensions {da} and {db} differ") });
            }
            let mut next = Array2::<T>::zeros((ra, rb));
            for g in 0..da {
                let ga = a.slice(s![.., g, ..]);
                let gb = b.slice(s![.., g, ..]);
                let tmp = env.dot(&gb);
                let ga_h = ga.t().mapv(|x| x.conj());
                next += &ga_h.dot(&tmp);
            }
            env = next;
        }
        Ok(env[[0, 0]])
    }

    /// `sum_g |A(g)|^2`.
    pub fn norm_sq(&self) -> f64 {
        self.trace_product(self).map(|t| t.re()).unwrap_or(0.0)
    }

    pub fn to_complex(&self) -> ComplexTT {
        TensorTrain { cores: self.cores.iter().map(|c| c.mapv(|x| x.as_c())).collect() }
    }

    fn check_pauli(&self) -> Result<()> {
        if let Some(site) = self.cores.iter().position(|c| c.dim().1 != PAULI_DIM) {
            return Err(Error::DimensionMismatch { site, detail: format!("expected physical dimension {PAULI_DIM}") });
        }
        Ok(())
    }

    /// `rho = sum_g A(g) sigma^g` as a dense `2^N x 2^N` matrix.
    pub fn to_dense_operator(&self) -> Result<DenseOperator> {
        self.check_pauli()?;
        let n = self.len();
        if n > MAX_DENSE_QUBITS {
            return Err(Error::TooLarge { requested: n, max: MAX_DENSE_QUBITS });
        }
        let coeffs: Vec<c64> = self.materialize()?.into_iter().map(|x| x.as_c()).collect();
        DenseOperator::new(coefficients_to_operator(&coeffs, n), n)
    }

    /// `Tr(rho^2) = 2^N sum_g |A(g)|^2`, clamped to the physical range
    /// `[2^-N, 1 + 1e-9]` with a warning when the raw value falls outside.
    pub fn purity(&self) -> f64 {
        let n = self.len() as i32;
        let raw = 2f64.powi(n) * self.norm_sq();
        let lo = 2f64.powi(-n);
        let hi = 1.0 + 1e-9;
        if !(lo..=hi).contains(&raw) {
            warn!("purity {raw:.6e} outside physical range [{lo:.3e}, {hi}], clamping");
        }
        raw.clamp(lo, hi)
    }
}

impl RealTT {
    /// Train with entries uniform on `[-1, 1]`, bond `bond` at every inner cut.
    pub fn random(phys_dims: &[usize], bond: usize, seed: u64) -> Result<Self> {
        let mut rng = seeded(seed);
        let n = phys_dims.len();
        let cores = phys_dims
            .iter()
            .enumerate()
            .map(|(i, &d)| {
                let l = if i == 0 { 1 } else { bond };
                let r = if i + 1 == n { 1 } else { bond };
                Array3::from_shape_simple_fn((l, d, r), || rng.random_range(-1.0..=1.0))
            })
            .collect();
        Self::new(cores)
    }
}
