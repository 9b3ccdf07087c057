//! Dense density matrices for small systems: oracles, fidelity and tests.

use ndarray::{Array1, Array2, ShapeBuilder};
use ndarray_linalg::{c64, Eigh, UPLO};

use crate::error::{Error, Result};

/// Hard cap on qubits for any dense operation.
pub const MAX_DENSE_QUBITS: usize = 12;

#[derive(Clone, Debug, PartialEq)]
pub struct DenseOperator {
    n_qubits: usize,
    matrix: Array2<c64>,
}

impl DenseOperator {
    pub fn new(matrix: Array2<c64>, n_qubits: usize) -> Result<Self> {
        if n_qubits > MAX_DENSE_QUBITS {
            return Err(Error::TooLarge { requested: n_qubits, max: MAX_DENSE_QUBITS });
        }
        let side = 1usize << n_qubits;
        if matrix.dim() != (side, side) {
            return Err(Error::InvalidArgument(format!("operator is {:?}, expected {side}x{side}", matrix.dim())));
        }
        Ok(Self { n_qubits, matrix })
    }

    pub fn from_real(matrix: &Array2<f64>, n_qubits: usize) -> Result<Self> {
        Self::new(matrix.mapv(|x| c64::new(x, 0.0)), n_qubits)
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn matrix(&self) -> &Array2<c64> {
        &self.matrix
    }

    pub fn into_matrix(self) -> Array2<c64> {
        self.matrix
    }

    pub fn trace(&self) -> c64 {
        self.matrix.diag().sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.matrix.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn dagger(&self) -> Array2<c64> {
        self.matrix.t().mapv(|x| x.conj())
    }

    /// `||rho - rho^dagger||_F / ||rho||_F`, zero for the zero matrix.
    pub fn hermitian_residual(&self) -> f64 {
        let norm = self.frobenius_norm();
        if norm == 0.0 {
            return 0.0;
        }
        let diff = (&self.matrix - &self.dagger()).iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
        diff / norm
    }

    /// Eigen-decomposition of the Hermitian part, eigenvalues ascending.
    pub fn eigh(&self) -> Result<(Array1<f64>, Array2<c64>)> {
        // Row-major complex input comes back with conjugated eigenvectors,
        // so hand LAPACK a column-major copy.
        let mut herm = Array2::<c64>::zeros(self.matrix.raw_dim().f());
        herm.assign(&self.matrix);
        herm += &self.dagger();
        herm.mapv_inplace(|x| x * 0.5);
        Ok(herm.eigh(UPLO::Lower)?)
    }

    pub fn eigenvalues(&self) -> Result<Array1<f64>> {
        Ok(self.eigh()?.0)
    }

    /// `Tr(rho^dagger rho)`.
    pub fn purity(&self) -> f64 {
        self.frobenius_norm().powi(2)
    }
}
