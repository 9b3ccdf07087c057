//! Target states: random locally purified MPOs and thermal Ising chains,
//! delivered as Pauli-coefficient tensor trains.

use log::warn;
use ndarray::{s, Array2, Array3, Axis};
use ndarray_linalg::{c64, Eigh, Scalar, UPLO};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dense::MAX_DENSE_QUBITS;
use crate::error::{Error, Result};
use crate::pauli::{computational_to_pauli_map, operator_to_coefficients, PAULI_DIM};
use crate::rng::seeded;
use crate::tt::{ComplexTT, RealTT};

/// Largest imaginary part, relative to the largest modulus, that a real
/// cast tolerates.
pub const IMAG_RESIDUE_TOL: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LptnSpec {
    pub n: usize,
    pub kappa: usize,
    /// Kraus dimension per site.
    #[serde(default = "default_kraus")]
    pub kraus: usize,
    #[serde(default)]
    pub seed: u64,
}

fn default_kraus() -> usize {
    10
}

impl LptnSpec {
    pub fn new(n: usize, kappa: usize, seed: u64) -> Self {
        Self { n, kappa, kraus: default_kraus(), seed }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(Error::InvalidArgument(format!("LPTN needs at least 2 sites, got {}", self.n)));
        }
        if self.kappa == 0 || self.kraus == 0 {
            return Err(Error::InvalidArgument("kappa and kraus must be at least 1".into()));
        }
        Ok(())
    }

    /// MPO bond dimension `kappa^2`.
    pub fn chi(&self) -> usize {
        self.kappa * self.kappa
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThermalSpec {
    pub n: usize,
    #[serde(default = "default_field")]
    pub g: f64,
    pub temperature: f64,
}

fn default_field() -> f64 {
    1.0
}

impl ThermalSpec {
    pub fn new(n: usize, temperature: f64) -> Self {
        Self { n, g: default_field(), temperature }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::InvalidArgument("thermal state needs at least one qubit".into()));
        }
        if self.n > MAX_DENSE_QUBITS {
            return Err(Error::TooLarge { requested: self.n, max: MAX_DENSE_QUBITS });
        }
        if !(self.temperature > 0.0 && self.temperature.is_finite()) {
            return Err(Error::InvalidArgument(format!("temperature must be positive, got {}", self.temperature)));
        }
        if !self.g.is_finite() {
            return Err(Error::InvalidArgument("transverse field must be finite".into()));
        }
        Ok(())
    }
}

/// Random LPTN in the computational basis. Site `i` carries the pair index
/// `p = 2 s + s'` and the core
///
/// ```text
/// M_i^{s, s'} = sum_a A_i^{s, a} (x) conj(A_i^{s', a})
/// ```
///
/// with `A_i^{s, a}` of shape `kappa_l x kappa_r` (boundaries 1). Entries of
/// `A` are drawn as real part then imaginary part, uniform on `[-1, 1]`, from
/// ChaCha8 seeded with `spec.seed`, iterating site, `s`, `a`, row, column.
/// Every core is divided by `Tr(rho)^(1/N)`.
pub fn random_lptn(spec: &LptnSpec) -> Result<ComplexTT> {
    spec.validate()?;
    let (n, kappa, kraus) = (spec.n, spec.kappa, spec.kraus);
    let mut rng = seeded(spec.seed);
    let mut cores = Vec::with_capacity(n);
    for site in 0..n {
        let kl = if site == 0 { 1 } else { kappa };
        let kr = if site + 1 == n { 1 } else { kappa };
        let mut a = Vec::with_capacity(2 * kraus);
        for _s in 0..2 {
            for _a in 0..kraus {
                a.push(Array2::from_shape_simple_fn((kl, kr), || {
                    let re = rng.random_range(-1.0..=1.0);
                    let im = rng.random_range(-1.0..=1.0);
                    c64::new(re, im)
                }));
            }
        }
        let mut core = Array3::<c64>::zeros((kl * kl, PAULI_DIM, kr * kr));
        for s in 0..2 {
            for sp in 0..2 {
                let p = 2 * s + sp;
                for k in 0..kraus {
                    let (x, y) = (&a[s * kraus + k], &a[sp * kraus + k]);
                    for ((al, ar), &xv) in x.indexed_iter() {
                        for ((bl, br), &yv) in y.indexed_iter() {
                            core[[al * kl + bl, p, ar * kr + br]] += xv * yv.conj();
                        }
                    }
                }
            }
        }
        cores.push(core);
    }
    let tt = ComplexTT::new(cores)?;
    let tr = computational_trace(&tt);
    if !(tr.re > 0.0) || tr.im.abs() > 1e-8 * tr.re {
        return Err(Error::Numerical(format!("LPTN trace {tr} is not positive real")));
    }
    let scale = c64::new(tr.re.powf(-1.0 / n as f64), 0.0);
    ComplexTT::new(tt.into_cores().into_iter().map(|c| c.mapv(|x| x * scale)).collect())
}

/// `Tr(rho)` of a computational-basis MPO with pair index `2 s + s'`.
pub fn computational_trace(tt: &ComplexTT) -> c64 {
    let mut env = Array2::<c64>::ones((1, 1));
    for core in tt.cores() {
        let diag = &core.slice(s![.., 0, ..]) + &core.slice(s![.., 3, ..]);
        env = env.dot(&diag);
    }
    env[[0, 0]]
}

/// Pauli-coefficient train of an MPO, real when the residue check passes.
#[derive(Clone, Debug)]
pub enum PauliTrain {
    Real(RealTT),
    /// Kept complex because the largest imaginary part exceeded
    /// [`IMAG_RESIDUE_TOL`] times the largest modulus.
    Complex { tt: ComplexTT, residue: f64 },
}

impl PauliTrain {
    pub fn into_real(self) -> Result<RealTT> {
        match self {
            PauliTrain::Real(tt) => Ok(tt),
            PauliTrain::Complex { residue, .. } => {
                Err(Error::Numerical(format!("Pauli cores keep a relative imaginary residue {residue:.3e}")))
            }
        }
    }
}

/// Unitary on a `kappa^2` bond, pair index `a * kappa + b`, whose columns
/// are `e_aa`, `(e_ab + e_ba)/sqrt 2` and `i (e_ab - e_ba)/sqrt 2` for
/// `a < b`. It satisfies `conj(V) = S V` with `S` the pair swap.
fn swap_gauge(kappa: usize) -> Array2<c64> {
    let dim = kappa * kappa;
    let mut v = Array2::<c64>::zeros((dim, dim));
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let mut col = 0;
    for a in 0..kappa {
        v[[a * kappa + a, col]] = c64::new(1.0, 0.0);
        col += 1;
    }
    for a in 0..kappa {
        for b in a + 1..kappa {
            v[[a * kappa + b, col]] = c64::new(h, 0.0);
            v[[b * kappa + a, col]] = c64::new(h, 0.0);
            v[[a * kappa + b, col + 1]] = c64::new(0.0, h);
            v[[b * kappa + a, col + 1]] = c64::new(0.0, -h);
            col += 2;
        }
    }
    v
}

fn exact_sqrt(x: usize) -> Option<usize> {
    let r = (x as f64).sqrt().round() as usize;
    (r * r == x).then_some(r)
}

/// Converts a computational-basis MPO to Pauli coefficients site by site.
///
/// For a purified MPO the bond pairs `(a, b)` and `(b, a)` are complex
/// conjugates of each other; the swap gauge on every inner bond makes each
/// Pauli core real without changing any element. The result is cast to
/// real only if the leftover imaginary parts pass [`IMAG_RESIDUE_TOL`].
pub fn lptn_to_pauli(tt: &ComplexTT) -> Result<PauliTrain> {
    if let Some(site) = tt.cores().iter().position(|c| c.dim().1 != PAULI_DIM) {
        return Err(Error::DimensionMismatch { site, detail: format!("expected pair dimension {PAULI_DIM}") });
    }
    let map = computational_to_pauli_map();
    let mut pauli: Vec<Array3<c64>> = tt
        .cores()
        .iter()
        .map(|m| {
            let (l, _, r) = m.dim();
            let mut g = Array3::<c64>::zeros((l, PAULI_DIM, r));
            for (gi, row) in map.iter().enumerate() {
                for (p, &w) in row.iter().enumerate() {
                    if w != c64::new(0.0, 0.0) {
                        let src = m.slice(s![.., p, ..]);
                        g.slice_mut(s![.., gi, ..]).scaled_add(w, &src);
                    }
                }
            }
            g
        })
        .collect();

    let bonds = tt.bond_dims();
    let gauges: Option<Vec<Array2<c64>>> = bonds.iter().map(|&b| exact_sqrt(b).map(swap_gauge)).collect();
    if let Some(gauges) = gauges {
        for (k, core) in pauli.iter_mut().enumerate() {
            let (vl, vr) = (&gauges[k], &gauges[k + 1]);
            let vl_h = vl.t().mapv(|x| x.conj());
            let (_, d, _) = core.dim();
            let mut out = Array3::<c64>::zeros((vl.ncols(), d, vr.ncols()));
            for g in 0..d {
                let slab = vl_h.dot(&core.slice(s![.., g, ..])).dot(vr);
                out.slice_mut(s![.., g, ..]).assign(&slab);
            }
            *core = out;
        }
    }

    let max_mod = pauli.iter().flat_map(|c| c.iter()).map(|x| x.abs()).fold(0.0, f64::max);
    let max_im = pauli.iter().flat_map(|c| c.iter()).map(|x| x.im.abs()).fold(0.0, f64::max);
    let residue = if max_mod > 0.0 { max_im / max_mod } else { 0.0 };
    if residue <= IMAG_RESIDUE_TOL {
        Ok(PauliTrain::Real(RealTT::new(pauli.into_iter().map(|c| c.mapv(|x| x.re)).collect())?))
    } else {
        warn!("Pauli cores keep relative imaginary residue {residue:.3e}; staying complex");
        Ok(PauliTrain::Complex { tt: ComplexTT::new(pauli)?, residue })
    }
}

/// Random LPTN in Pauli-coefficient form.
pub fn random_lptn_pauli(spec: &LptnSpec) -> Result<RealTT> {
    lptn_to_pauli(&random_lptn(spec)?)?.into_real()
}

/// Site `i` is bit `n - 1 - i` of a computational basis index.
fn site_bit(n: usize, site: usize) -> usize {
    1 << (n - 1 - site)
}

fn zz_energy(state: usize, n: usize) -> f64 {
    (0..n.saturating_sub(1))
        .map(|i| {
            let zi = if state & site_bit(n, i) == 0 { 1.0 } else { -1.0 };
            let zj = if state & site_bit(n, i + 1) == 0 { 1.0 } else { -1.0 };
            zi * zj
        })
        .sum()
}

/// Dense `H = sum_i Z_i Z_{i+1} + g sum_i X_i` with open boundaries.
pub fn ising_hamiltonian(n: usize, g: f64) -> Result<Array2<f64>> {
    if n == 0 || n > MAX_DENSE_QUBITS {
        return Err(Error::TooLarge { requested: n, max: MAX_DENSE_QUBITS });
    }
    let dim = 1 << n;
    let mut h = Array2::zeros((dim, dim));
    for st in 0..dim {
        h[[st, st]] = zz_energy(st, n);
        for i in 0..n {
            h[[st, st ^ site_bit(n, i)]] += g;
        }
    }
    Ok(h)
}

/// Parity sectors of `H`: the global flip `prod_i X_i` commutes with `H`, so
/// in the basis `(|s> +- |s^flip>)/sqrt 2` over representatives `s` (top bit
/// clear) the Hamiltonian splits into `H_+` and `H_-`.
fn parity_blocks(n: usize, g: f64) -> (Array2<f64>, Array2<f64>) {
    let half = 1 << (n - 1);
    let flip = (1 << n) - 1;
    let mut plus = Array2::zeros((half, half));
    let mut minus = Array2::zeros((half, half));
    for st in 0..half {
        let e = zz_energy(st, n);
        plus[[st, st]] += e;
        minus[[st, st]] += e;
        for i in 0..n {
            let u = st ^ site_bit(n, i);
            if u < half {
                plus[[st, u]] += g;
                minus[[st, u]] += g;
            } else {
                plus[[st, u ^ flip]] += g;
                minus[[st, u ^ flip]] -= g;
            }
        }
    }
    (plus, minus)
}

/// `e^{-H/T} / Tr e^{-H/T}` by exact diagonalization of the parity sectors.
pub fn thermal_density_matrix(spec: &ThermalSpec) -> Result<Array2<f64>> {
    spec.validate()?;
    let n = spec.n;
    let (hp, hm) = parity_blocks(n, spec.g);
    let (ep, vp) = hp.eigh(UPLO::Lower)?;
    let (em, vm) = hm.eigh(UPLO::Lower)?;
    let e_min = ep.iter().chain(em.iter()).copied().fold(f64::INFINITY, f64::min);
    let weights = |e: &ndarray::Array1<f64>| e.mapv(|x| (-(x - e_min) / spec.temperature).exp());
    let (wp, wm) = (weights(&ep), weights(&em));
    let z = wp.sum() + wm.sum();
    let block = |v: Array2<f64>, w: ndarray::Array1<f64>| {
        let mut b = v;
        for (mut col, &x) in b.axis_iter_mut(Axis(1)).zip(w.iter()) {
            col *= (x / z).sqrt();
        }
        b.dot(&b.t())
    };
    let rp = block(vp, wp);
    let rm = block(vm, wm);

    let half = 1 << (n - 1);
    let flip = (1 << n) - 1;
    let dim = 1 << n;
    let mut rho = Array2::zeros((dim, dim));
    for a in 0..half {
        for b in 0..half {
            let same = 0.5 * (rp[[a, b]] + rm[[a, b]]);
            let cross = 0.5 * (rp[[a, b]] - rm[[a, b]]);
            rho[[a, b]] = same;
            rho[[a ^ flip, b ^ flip]] = same;
            rho[[a, b ^ flip]] = cross;
            rho[[a ^ flip, b]] = cross;
        }
    }
    Ok(rho)
}

/// Pauli coefficients of a real symmetric operator, checked to be real.
pub fn real_coefficients(rho: &Array2<f64>, n: usize) -> Result<Vec<f64>> {
    let op = rho.mapv(|x| c64::new(x, 0.0));
    let coeffs = operator_to_coefficients(&op, n);
    drop(op);
    let max_mod = coeffs.iter().map(|x| x.abs()).fold(0.0, f64::max);
    let max_im = coeffs.iter().map(|x| x.im.abs()).fold(0.0, f64::max);
    if max_im > IMAG_RESIDUE_TOL * max_mod.max(f64::MIN_POSITIVE) {
        return Err(Error::Numerical(format!("coefficients have imaginary part {max_im:.3e}")));
    }
    Ok(coeffs.into_iter().map(|x| x.re).collect())
}

/// Thermal Ising state compressed to a Pauli train with TT-SVD tolerance
/// `tt_tol` (relative Frobenius error).
pub fn thermal_ising(spec: &ThermalSpec, tt_tol: f64) -> Result<RealTT> {
    let rho = thermal_density_matrix(spec)?;
    let coeffs = real_coefficients(&rho, spec.n)?;
    drop(rho);
    RealTT::from_dense(&coeffs, &vec![PAULI_DIM; spec.n], tt_tol)
}
