//! Pauli strings and the per-site change of basis between computational
//! operator components `M^{s,s'}` and Pauli coefficients `G^g`.
//!
//! Dense coefficient tensors are flat, row-major over `(g_1, ..., g_N)` with
//! `g_1` most significant. Dense operators use the matching convention: basis
//! state `|s_1 ... s_N>` has index `sum s_i 2^(N-i)`.

use std::fmt;
use std::ops::Deref;
use std::str::FromStr;

use ndarray::Array2;
use ndarray_linalg::c64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Local dimension of the Pauli basis: I, X, Y, Z.
pub const PAULI_DIM: usize = 4;

/// A tensor product `sigma^g1 (x) ... (x) sigma^gN` with `g_i` in `{0,1,2,3}`
/// for I, X, Y, Z.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct PauliString(Vec<u8>);

impl PauliString {
    pub fn new(gammas: Vec<u8>) -> Result<Self> {
        if let Some(site) = gammas.iter().position(|&g| g > 3) {
            return Err(Error::InvalidArgument(format!(
                "pauli index {} at site {site} is outside 0..=3",
                gammas[site]
            )));
        }
        Ok(Self(gammas))
    }

    pub fn identity(n: usize) -> Self {
        Self(vec![0; n])
    }

    pub fn as_slice(&self) -> &[u8] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<u8> {
        self.0
    }

    /// Number of non-identity factors.
    pub fn weight(&self) -> usize {
        self.0.iter().filter(|&&g| g != 0).count()
    }

    pub fn is_identity(&self) -> bool {
        self.0.iter().all(|&g| g == 0)
    }

    /// Sites carrying a non-identity factor.
    pub fn support(&self) -> Vec<usize> {
        self.0.iter().enumerate().filter(|(_, &g)| g != 0).map(|(i, _)| i).collect()
    }

    /// Index into a flat dense coefficient tensor.
    pub fn flat_index(&self) -> usize {
        self.0.iter().fold(0, |acc, &g| acc * PAULI_DIM + g as usize)
    }

    pub fn from_flat_index(mut flat: usize, n: usize) -> Self {
        let mut g = vec![0u8; n];
        for slot in g.iter_mut().rev() {
            *slot = (flat % PAULI_DIM) as u8;
            flat /= PAULI_DIM;
        }
        Self(g)
    }

    /// Dense `2 x 2` matrix of a single-qubit Pauli factor.
    pub fn single_qubit_matrix(g: u8) -> Array2<c64> {
        let z = c64::new(0.0, 0.0);
        let one = c64::new(1.0, 0.0);
        let i = c64::new(0.0, 1.0);
        match g {
            0 => ndarray::arr2(&[[one, z], [z, one]]),
            1 => ndarray::arr2(&[[z, one], [one, z]]),
            2 => ndarray::arr2(&[[z, -i], [i, z]]),
            3 => ndarray::arr2(&[[one, z], [z, -one]]),
            _ => panic!("pauli index {g} out of range"),
        }
    }
}

impl Deref for PauliString {
    type Target = [u8];
    fn deref(&self) -> &[u8] {
        &self.0
    }
}

impl fmt::Display for PauliString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &g in &self.0 {
            write!(f, "{}", (b'0' + g) as char)?;
        }
        Ok(())
    }
}

impl FromStr for PauliString {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let gammas = s
            .chars()
            .map(|c| match c {
                '0' | 'I' => Ok(0),
                '1' | 'X' => Ok(1),
                '2' | 'Y' => Ok(2),
                '3' | 'Z' => Ok(3),
                other => Err(Error::InvalidArgument(format!("bad pauli symbol {other:?}"))),
            })
            .collect::<Result<Vec<u8>>>()?;
        Self::new(gammas)
    }
}

impl TryFrom<String> for PauliString {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<PauliString> for String {
    fn from(p: PauliString) -> String {
        p.to_string()
    }
}

/// Row `g` gives `G^g` as a combination of `(M^00, M^01, M^10, M^11)`.
pub fn computational_to_pauli_map() -> [[c64; 4]; 4] {
    let h = c64::new(0.5, 0.0);
    let z = c64::new(0.0, 0.0);
    let ih = c64::new(0.0, 0.5);
    [[h, z, z, h], [z, h, h, z], [z, ih, -ih, z], [h, z, z, -h]]
}

/// Row `p = 2s + s'` gives `M^{s,s'}` as a combination of `(G^0, .., G^3)`.
pub fn pauli_to_computational_map() -> [[c64; 4]; 4] {
    let o = c64::new(1.0, 0.0);
    let z = c64::new(0.0, 0.0);
    let i = c64::new(0.0, 1.0);
    [[o, z, z, o], [z, o, -i, z], [z, o, i, z], [o, z, z, -o]]
}

/// Applies a `4 x 4` map along every axis of a flat `[4; n]` tensor.
pub fn apply_site_map_all(data: &mut [c64], n: usize, map: &[[c64; 4]; 4]) {
    debug_assert_eq!(data.len(), PAULI_DIM.pow(n as u32));
    for axis in 0..n {
        let stride = PAULI_DIM.pow((n - 1 - axis) as u32);
        let block = stride * PAULI_DIM;
        for outer in (0..data.len()).step_by(block) {
            for inner in 0..stride {
                let base = outer + inner;
                let x = [
                    data[base],
                    data[base + stride],
                    data[base + 2 * stride],
                    data[base + 3 * stride],
                ];
                for (row, coeffs) in map.iter().enumerate() {
                    data[base + row * stride] =
                        coeffs[0] * x[0] + coeffs[1] * x[1] + coeffs[2] * x[2] + coeffs[3] * x[3];
                }
            }
        }
    }
}

/// Spreads the low bits of `x` to the even bit positions.
fn spread_bits(x: usize, n: usize) -> usize {
    (0..n).fold(0, |acc, b| acc | (((x >> b) & 1) << (2 * b)))
}

/// Rearranges a `2^n x 2^n` operator into the site-paired layout where site
/// `i` carries the pair index `2 s_i + s'_i`.
pub fn operator_to_pair_tensor(op: &Array2<c64>, n: usize) -> Vec<c64> {
    let dim = 1usize << n;
    let spread: Vec<usize> = (0..dim).map(|x| spread_bits(x, n)).collect();
    let mut out = vec![c64::new(0.0, 0.0); dim * dim];
    for (r, row) in op.outer_iter().enumerate() {
        let hi = spread[r] << 1;
        for (c, &v) in row.iter().enumerate() {
            out[hi | spread[c]] = v;
        }
    }
    out
}

pub fn pair_tensor_to_operator(pairs: &[c64], n: usize) -> Array2<c64> {
    let dim = 1usize << n;
    let spread: Vec<usize> = (0..dim).map(|x| spread_bits(x, n)).collect();
    Array2::from_shape_fn((dim, dim), |(r, c)| pairs[(spread[r] << 1) | spread[c]])
}

/// Pauli coefficients `A(g) = Tr(rho sigma^g) / 2^n` of a dense operator.
pub fn operator_to_coefficients(op: &Array2<c64>, n: usize) -> Vec<c64> {
    let mut data = operator_to_pair_tensor(op, n);
    apply_site_map_all(&mut data, n, &computational_to_pauli_map());
    data
}

/// Inverse of [`operator_to_coefficients`].
pub fn coefficients_to_operator(coeffs: &[c64], n: usize) -> Array2<c64> {
    let mut data = coeffs.to_vec();
    apply_site_map_all(&mut data, n, &pauli_to_computational_map());
    pair_tensor_to_operator(&data, n)
}
