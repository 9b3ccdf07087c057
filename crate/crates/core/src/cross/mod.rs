//! Cross approximation: maxvol pivoting, matrix CUR and the two-site
//! (DMRG-style) tensor-train cross driver.

mod cur;
mod dmrg;
mod maxvol;
mod oracle;
mod skeleton;

pub use cur::{cur_approximate, maxvol_cross, CurFactors};
pub use dmrg::{ttcross_dmrg, CrossConfig, CrossOutcome, SweepStats};
pub use maxvol::{maxvol, MaxvolResult};
pub use oracle::{queried_basis_count, ElementOracle, FnOracle, QueryLog};
pub use skeleton::CrossSkeleton;
