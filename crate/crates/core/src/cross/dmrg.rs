//! Two-site tensor-train cross ("DMRG-cross").
//!
//! The driver keeps nested pivot sets `left[k]` (prefixes over sites `0..k`)
//! and `right[k]` (suffixes over sites `k..N`). Updating the pair of sites
//! `(k, k + 1)` evaluates the superblock
//!
//! ```text
//! B[(i, a), (b, j)] = A(left[k][i], a, b, right[k + 2][j])
//! ```
//!
//! through the oracle, truncates its SVD and pivots the retained singular
//! vectors with maxvol. A left-to-right pass refreshes `left` and leaves
//! left-interpolative cores `U U[I]^+`; the right-to-left pass refreshes
//! `right` and leaves right-interpolative cores. One sweep is both passes.

use ndarray::{s, Array2, Array3, ArrayView2, Axis};
use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::maxvol::maxvol;
use super::oracle::ElementOracle;
use super::skeleton::CrossSkeleton;
use crate::error::{Error, Result};
use crate::linalg::{numerical_zero, pinv, svd_thin, tail_rank};
use crate::rng::{seeded, ChaCha8Rng};
use crate::tt::RealTT;

/// Validation indices used to measure change between sweeps.
const VALIDATION_SIZE: usize = 64;
/// Random starting indices tried before falling back to all zeros.
const INIT_ATTEMPTS: usize = 16;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CrossConfig {
    pub max_rank: usize,
    /// Relative Frobenius weight of the singular values discarded in each
    /// superblock; also the convergence threshold between sweeps.
    pub local_tol: f64,
    pub max_sweeps: usize,
    pub maxvol_tol: f64,
    /// Relative cutoff for pseudo-inverses and numerical rank.
    pub pinv_cutoff: f64,
    pub seed: u64,
}

impl Default for CrossConfig {
    fn default() -> Self {
        Self { max_rank: 10, local_tol: 1e-3, max_sweeps: 8, maxvol_tol: 1e-2, pinv_cutoff: 1e-12, seed: 0 }
    }
}

impl CrossConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_rank == 0 {
            return Err(Error::InvalidArgument("max_rank must be at least 1".into()));
        }
        if self.max_sweeps == 0 {
            return Err(Error::InvalidArgument("max_sweeps must be at least 1".into()));
        }
        for (name, v) in [("local_tol", self.local_tol), ("maxvol_tol", self.maxvol_tol), ("pinv_cutoff", self.pinv_cutoff)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidArgument(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepStats {
    pub sweep: usize,
    pub ranks: Vec<usize>,
    pub distinct_queries: usize,
    /// Relative change on the validation set against the previous sweep.
    pub rel_change: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct CrossOutcome {
    pub tt: RealTT,
    pub skeleton: CrossSkeleton,
    pub converged: bool,
    pub sweeps: usize,
    pub history: Vec<SweepStats>,
    /// Maxvol calls that hit a rank-deficient block.
    pub degenerate_pivots: usize,
}

struct Driver<'a> {
    oracle: &'a mut dyn ElementOracle,
    dims: &'a [usize],
    cfg: &'a CrossConfig,
    left: Vec<Vec<Vec<u8>>>,
    right: Vec<Vec<Vec<u8>>>,
    cores: Vec<Array3<f64>>,
    degenerate: usize,
}

impl Driver<'_> {
    fn superblock(&mut self, k: usize) -> Result<Array2<f64>> {
        let (da, db) = (self.dims[k], self.dims[k + 1]);
        let (ls, rs) = (&self.left[k], &self.right[k + 2]);
        let mut block = Array2::zeros((ls.len() * da, db * rs.len()));
        let mut idx = Vec::with_capacity(self.dims.len());
        for (i, pre) in ls.iter().enumerate() {
            for a in 0..da {
                for b in 0..db {
                    for (j, suf) in rs.iter().enumerate() {
                        idx.clear();
                        idx.extend_from_slice(pre);
                        idx.push(a as u8);
                        idx.push(b as u8);
                        idx.extend_from_slice(suf);
                        block[[i * da + a, b * rs.len() + j]] = self.oracle.query(&idx)?;
                    }
                }
            }
        }
        Ok(block)
    }

    fn factor(&self, block: &Array2<f64>) -> Result<(Array2<f64>, Vec<f64>, Array2<f64>)> {
        let (u, sv, vt) = svd_thin(block.view())?;
        let norm = sv.iter().map(|x| x * x).sum::<f64>().sqrt();
        let top = sv.first().copied().unwrap_or(0.0);
        let floor = numerical_zero(&sv, block.nrows(), block.ncols()).max(self.cfg.pinv_cutoff * top);
        let numeric = sv.iter().filter(|&&x| x > floor).count().max(1);
        let rank = tail_rank(&sv, self.cfg.local_tol * norm, self.cfg.max_rank).min(numeric);
        Ok((u.slice(s![.., ..rank]).to_owned(), sv.slice(s![..rank]).to_vec(), vt.slice(s![..rank, ..]).to_owned()))
    }

    /// Pivots the rows of `basis` and returns them with `basis * basis[rows]^+`.
    fn interpolate(&mut self, basis: ArrayView2<f64>) -> Result<(Vec<usize>, Array2<f64>)> {
        let mv = maxvol(basis, self.cfg.maxvol_tol)?;
        if mv.degenerate {
            self.degenerate += 1;
        }
        let sub = basis.select(Axis(0), &mv.rows);
        let coeffs = basis.dot(&pinv(sub.view(), self.cfg.pinv_cutoff)?);
        Ok((mv.rows, coeffs))
    }

    fn sweep_left_to_right(&mut self) -> Result<()> {
        let n = self.dims.len();
        for k in 0..n - 1 {
            let block = self.superblock(k)?;
            let (u, sv, vt) = self.factor(&block)?;
            let rank = sv.len();
            let (da, db) = (self.dims[k], self.dims[k + 1]);
            let rl = self.left[k].len();
            let (rows, coeffs) = self.interpolate(u.view())?;
            self.cores[k] = coeffs.into_shape_with_order((rl, da, rank)).expect("sized");
            self.left[k + 1] = rows
                .iter()
                .map(|&row| {
                    let mut t = self.left[k][row / da].clone();
                    t.push((row % da) as u8);
                    t
                })
                .collect();
            if k == n - 2 {
                let mut pivot_rows = u.select(Axis(0), &rows);
                for (mut col, &x) in pivot_rows.axis_iter_mut(Axis(1)).zip(&sv) {
                    col *= x;
                }
                let last = pivot_rows.dot(&vt);
                let rr = self.right[k + 2].len();
                self.cores[k + 1] = last.into_shape_with_order((rank, db, rr)).expect("sized");
            }
        }
        Ok(())
    }

    fn sweep_right_to_left(&mut self) -> Result<()> {
        let n = self.dims.len();
        for k in (0..n - 1).rev() {
            let block = self.superblock(k)?;
            let (u, sv, vt) = self.factor(&block)?;
            let rank = sv.len();
            let (da, db) = (self.dims[k], self.dims[k + 1]);
            let rr = self.right[k + 2].len();
            let (cols, coeffs) = self.interpolate(vt.t())?;
            self.cores[k + 1] = coeffs.t().as_standard_layout().into_owned().into_shape_with_order((rank, db, rr)).expect("sized");
            self.right[k + 1] = cols
                .iter()
                .map(|&col| {
                    let mut t = vec![(col / rr) as u8];
                    t.extend_from_slice(&self.right[k + 2][col % rr]);
                    t
                })
                .collect();
            if k == 0 {
                let mut scaled = u.clone();
                for (mut col, &x) in scaled.axis_iter_mut(Axis(1)).zip(&sv) {
                    col *= x;
                }
                let first = scaled.dot(&vt.select(Axis(1), &cols));
                self.cores[0] = first.into_shape_with_order((1, da, rank)).expect("sized");
            }
        }
        Ok(())
    }

    /// Left pivots consistent with the final train: maxvol over the prefix
    /// unfolding at each cut, restricted to extensions of the previous cut.
    fn refresh_left(&mut self, tt: &RealTT) -> Result<()> {
        let n = self.dims.len();
        let mut prefixes = Array2::<f64>::ones((1, 1));
        for k in 0..n - 1 {
            let core = tt.core(k);
            let (l, d, r) = core.dim();
            let g = core.view().into_shape_with_order((l, d * r)).expect("standard layout");
            let cand = prefixes.dot(&g).into_shape_with_order((prefixes.nrows() * d, r)).expect("contiguous");
            // A non-minimal train can have more columns than candidate rows.
            let rows: Vec<usize> = if cand.nrows() < r {
                (0..cand.nrows()).collect()
            } else {
                let mv = maxvol(cand.view(), self.cfg.maxvol_tol)?;
                if mv.degenerate {
                    self.degenerate += 1;
                }
                mv.rows
            };
            self.left[k + 1] = rows
                .iter()
                .map(|&row| {
                    let mut t = self.left[k][row / d].clone();
                    t.push((row % d) as u8);
                    t
                })
                .collect();
            prefixes = cand.select(Axis(0), &rows);
        }
        Ok(())
    }
}

fn initial_index(oracle: &mut dyn ElementOracle, dims: &[usize], rng: &mut ChaCha8Rng) -> Result<Vec<u8>> {
    for _ in 0..INIT_ATTEMPTS {
        let idx: Vec<u8> = dims.iter().map(|&d| rng.random_range(0..d) as u8).collect();
        if oracle.query(&idx)? != 0.0 {
            return Ok(idx);
        }
    }
    let zero = vec![0u8; dims.len()];
    oracle.query(&zero)?;
    Ok(zero)
}

fn rel_change(now: &[f64], prev: &[f64]) -> f64 {
    let diff = now.iter().zip(prev).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
    let norm = now.iter().map(|a| a * a).sum::<f64>().sqrt();
    if norm == 0.0 {
        if diff == 0.0 { 0.0 } else { f64::INFINITY }
    } else {
        diff / norm
    }
}

/// Tensor-train cross approximation of the tensor behind `oracle`.
///
/// Starts from bond one at a random nested index drawn with `cfg.seed` and
/// sweeps until the pivot sets stop changing, the relative change on a
/// held-out set of already-queried indices drops below `cfg.local_tol`, or
/// `cfg.max_sweeps` is exhausted (`converged = false`).
pub fn ttcross_dmrg(oracle: &mut dyn ElementOracle, dims: &[usize], cfg: &CrossConfig) -> Result<CrossOutcome> {
    cfg.validate()?;
    if dims.is_empty() || dims.contains(&0) {
        return Err(Error::InvalidArgument(format!("invalid dimensions {dims:?}")));
    }
    if dims.iter().any(|&d| d > u8::MAX as usize + 1) {
        return Err(Error::InvalidArgument("physical dimensions above 256 are unsupported".into()));
    }
    let n = dims.len();
    if n == 1 {
        let mut core = Array3::zeros((1, dims[0], 1));
        for g in 0..dims[0] {
            core[[0, g, 0]] = oracle.query(&[g as u8])?;
        }
        let history = vec![SweepStats { sweep: 1, ranks: vec![], distinct_queries: oracle.log().distinct(), rel_change: None }];
        return Ok(CrossOutcome {
            tt: RealTT::new(vec![core])?,
            skeleton: CrossSkeleton::new(dims.to_vec(), vec![], vec![])?,
            converged: true,
            sweeps: 1,
            history,
            degenerate_pivots: 0,
        });
    }

    let mut rng = seeded(cfg.seed);
    let pivot = initial_index(oracle, dims, &mut rng)?;
    let left = (0..=n).map(|k| vec![pivot[..k.min(n)].to_vec()]).collect();
    let right = (0..=n).map(|k| vec![pivot[k..].to_vec()]).collect();
    let cores = dims.iter().map(|&d| Array3::zeros((1, d, 1))).collect();
    let mut drv = Driver { oracle, dims, cfg, left, right, cores, degenerate: 0 };

    let mut history = Vec::new();
    let mut validation: Vec<Vec<u8>> = Vec::new();
    let mut prev_values: Vec<f64> = Vec::new();
    let mut prev_sets: Option<(Vec<Vec<Vec<u8>>>, Vec<Vec<Vec<u8>>>)> = None;
    let mut converged = false;
    let mut tt = RealTT::new(drv.cores.clone())?;
    let mut sweeps = 0;

    for sweep in 1..=cfg.max_sweeps {
        sweeps = sweep;
        drv.sweep_left_to_right()?;
        drv.sweep_right_to_left()?;
        tt = RealTT::new(drv.cores.clone())?;

        if validation.is_empty() {
            let logged: Vec<&[u8]> = drv.oracle.log().indices().collect();
            let take = VALIDATION_SIZE.min(logged.len());
            validation = sample(&mut rng, logged.len(), take).into_iter().map(|i| logged[i].to_vec()).collect();
        }
        let values: Vec<f64> = validation.iter().map(|idx| tt.element_unchecked(idx)).collect();
        let change = (sweep > 1).then(|| rel_change(&values, &prev_values));
        prev_values = values;

        let sets = (drv.left.clone(), drv.right.clone());
        let stable = prev_sets.as_ref() == Some(&sets);
        prev_sets = Some(sets);

        history.push(SweepStats {
            sweep,
            ranks: tt.bond_dims()[1..n].to_vec(),
            distinct_queries: drv.oracle.log().distinct(),
            rel_change: change,
        });
        if stable || change.is_some_and(|c| c < cfg.local_tol) {
            converged = true;
            break;
        }
    }

    drv.refresh_left(&tt)?;
    let skeleton = CrossSkeleton::new(dims.to_vec(), drv.left[1..n].to_vec(), drv.right[1..n].to_vec())?;
    Ok(CrossOutcome { tt, skeleton, converged, sweeps, history, degenerate_pivots: drv.degenerate })
}
