//! Distances between states and losses against measurement data.

use log::warn;
use ndarray::{Array2, Axis};
use ndarray_linalg::{c64, Eigh, UPLO};
use serde::{Deserialize, Serialize};

use crate::dense::DenseOperator;
use crate::error::{Error, Result};
use crate::tt::{Field, RealTT, TensorTrain};

/// Largest qubit count for [`fidelity`].
pub const MAX_FIDELITY_QUBITS: usize = 10;
/// Relative non-Hermiticity accepted by [`fidelity`].
pub const HERMITIAN_TOL: f64 = 1e-8;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct DistanceReport {
    pub d: f64,
    pub ds: Option<f64>,
    pub fidelity: Option<f64>,
    pub n_b: usize,
}

/// `||rho1 - rho2||_F^2 / ||rho1||_F^2` from the four trace products
/// `T_ij = Tr(rho_i^dagger rho_j)`. Rounding below zero down to `-1e-12` is
/// clamped silently; anything more negative is clamped with a warning.
pub fn distance_d<T: Field>(rho1: &TensorTrain<T>, rho2: &TensorTrain<T>) -> Result<f64> {
    let t11 = rho1.trace_product(rho1)?.re();
    let t22 = rho2.trace_product(rho2)?.re();
    let t12 = rho1.trace_product(rho2)?.re();
    let t21 = rho2.trace_product(rho1)?.re();
    if !(t11 > 0.0) {
        return Err(Error::InvalidArgument("reference state has zero norm".into()));
    }
    let d = (t11 + t22 - t12 - t21) / t11;
    if d < -1e-12 {
        warn!("distance {d:.3e} below zero from cancellation, clamping");
    }
    Ok(d.max(0.0))
}

/// `D` restricted to the given indices, with the recorded values standing in
/// for the first state. Values are coefficient-tensor elements; the common
/// `2^N` factor of the expectations cancels.
pub fn distance_ds<'a, I>(data: I, recon: &RealTT) -> Result<f64>
where
    I: IntoIterator<Item = (&'a [u8], f64)>,
{
    let (mut num, mut den) = (0.0, 0.0);
    let mut seen = false;
    for (idx, v) in data {
        seen = true;
        let w = recon.element(idx)?;
        num += (v - w).powi(2);
        den += v * v;
    }
    if !seen {
        return Err(Error::InvalidArgument("sampled distance needs at least one datum".into()));
    }
    if den == 0.0 {
        return Err(Error::InvalidArgument("sampled distance undefined: all recorded values are zero".into()));
    }
    Ok(num / den)
}

/// `sum (v - <sigma^g>_recon)^2` with `v` recorded expectations.
pub fn loss_l<'a, I>(data: I, recon: &RealTT) -> Result<f64>
where
    I: IntoIterator<Item = (&'a [u8], f64)>,
{
    let scale = 2f64.powi(recon.len() as i32);
    let mut loss = 0.0;
    for (idx, v) in data {
        loss += (v - scale * recon.element(idx)?).powi(2);
    }
    Ok(loss)
}

fn sqrt_psd(a: &DenseOperator) -> Result<Array2<c64>> {
    let (w, mut u) = a.eigh()?;
    let u_h = u.t().mapv(|x| x.conj());
    for (mut col, &x) in u.axis_iter_mut(Axis(1)).zip(w.iter()) {
        col *= c64::new(x.max(0.0).sqrt(), 0.0);
    }
    Ok(u.dot(&u_h))
}

/// How eigenvalues `l < 0` of `sqrt(rho1) rho2 sqrt(rho1)` enter the trace of
/// its square root. They only occur when `rho2` is not positive.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FidelityConvention {
    /// Real part of the trace of the principal square root: `sqrt(l)` is
    /// imaginary and drops out, so negative directions cannot lower `F`.
    #[default]
    PrincipalReal,
    /// `sign(l) sqrt(|l|)`.
    SignedSqrt,
}

/// `Tr sqrt(sqrt(rho1) rho2 sqrt(rho1))` under the default convention.
pub fn fidelity(rho1: &DenseOperator, rho2: &DenseOperator) -> Result<f64> {
    fidelity_with(rho1, rho2, FidelityConvention::default())
}

/// `sqrt(rho1)` uses the eigenvalues of `rho1` clamped at zero. `rho2` need
/// not be positive; a non-physical `rho2` can then give `F > 1`.
pub fn fidelity_with(rho1: &DenseOperator, rho2: &DenseOperator, convention: FidelityConvention) -> Result<f64> {
    let n = rho1.n_qubits();
    if rho2.n_qubits() != n {
        return Err(Error::DimensionMismatch { site: n.min(rho2.n_qubits()), detail: "operators act on different qubit counts".into() });
    }
    if n > MAX_FIDELITY_QUBITS {
        return Err(Error::TooLarge { requested: n, max: MAX_FIDELITY_QUBITS });
    }
    for (name, op) in [("rho1", rho1), ("rho2", rho2)] {
        let r = op.hermitian_residual();
        if r > HERMITIAN_TOL {
            return Err(Error::InvalidArgument(format!("{name} is not Hermitian (relative residual {r:.3e})")));
        }
    }
    let s = sqrt_psd(rho1)?;
    let mid = s.dot(rho2.matrix()).dot(&s);
    let herm = (&mid + &mid.t().mapv(|x| x.conj())).mapv(|x| x * 0.5);
    let (w, _) = herm.eigh(UPLO::Lower)?;
    Ok(match convention {
        FidelityConvention::PrincipalReal => w.iter().filter(|&&l| l > 0.0).map(|l| l.sqrt()).sum(),
        FidelityConvention::SignedSqrt => w.iter().map(|&l| l.signum() * l.abs().sqrt()).sum(),
    })
}
