//! Quantum state tomography of matrix-product-operator states by tensor-train
//! cross approximation.
//!
//! A density operator on `N` qubits is expanded in the Pauli basis,
//! `rho = sum_g A(g) sigma^g1 ... sigma^gN`, and the order-`N` coefficient
//! tensor `A` is stored as a tensor train. Each element `A(g)` equals
//! `<sigma^g> / 2^N`, so a tomography experiment is an element oracle and
//! reconstruction is tensor-train cross approximation against that oracle.
//!
//! Modules, bottom-up:
//!
//! - [`tt`], [`pauli`], [`dense`]: tensor trains, Pauli bookkeeping and the
//!   small-`N` dense operators used as oracles.
//! - [`cross`]: maxvol, matrix cross (CUR) and the DMRG-style TT-cross driver.
//! - [`states`]: random LPTN and thermal Ising target states.
//! - [`measure`]: exact and noisy measurement oracles with copy accounting.
//! - [`metrics`]: `D`, `D_s`, loss and fidelity.
//! - [`refine`]: training-set closure and Adam refinement of a reconstruction.

pub mod cross;
pub mod dense;
pub mod error;
pub mod io;
pub mod linalg;
pub mod measure;
pub mod metrics;
pub mod pauli;
pub mod refine;
pub mod rng;
pub mod states;
pub mod tt;

pub use error::{Error, Result};
pub use ndarray_linalg::c64;
pub use pauli::PauliString;
pub use tt::{ComplexTT, Field, RealTT, TensorTrain};
