//! Simulated Pauli measurements.
//!
//! [`MeasurementOracle`] answers coefficient-tensor queries `A(g) =
//! <sigma^g> / 2^N` for a known target state, optionally perturbed. Noise is
//! a pure function of `(seed, g)`, so a string returns the same value however
//! often and in whatever order it is asked for.

use std::fmt;

use indexmap::IndexMap;
use ndarray::Array1;
use rand::Rng;
use rand_distr::{Binomial, Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::cross::{ElementOracle, QueryLog};
use crate::error::{Error, Result};
use crate::pauli::{PauliString, PAULI_DIM};
use crate::rng::index_rng;
use crate::tt::RealTT;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NoiseMode {
    Exact,
    Gaussian,
    Shots,
}

impl fmt::Display for NoiseMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            NoiseMode::Exact => "exact",
            NoiseMode::Gaussian => "gaussian",
            NoiseMode::Shots => "shots",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NoiseModel {
    pub mode: NoiseMode,
    /// Relative error `epsilon` of the Gaussian mode.
    pub epsilon: f64,
    /// Copies per measured string in the shots mode.
    pub shots: u64,
    pub seed: u64,
}

impl Default for NoiseModel {
    fn default() -> Self {
        Self { mode: NoiseMode::Exact, epsilon: 0.01, shots: 1_000_000, seed: 0 }
    }
}

impl NoiseModel {
    pub fn exact() -> Self {
        Self::default()
    }

    pub fn gaussian(epsilon: f64, seed: u64) -> Self {
        Self { mode: NoiseMode::Gaussian, epsilon, seed, ..Self::default() }
    }

    pub fn shots(shots: u64, seed: u64) -> Self {
        Self { mode: NoiseMode::Shots, shots, seed, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        match self.mode {
            NoiseMode::Gaussian if !(self.epsilon > 0.0 && self.epsilon.is_finite()) => {
                Err(Error::InvalidArgument(format!("gaussian noise needs epsilon > 0, got {}", self.epsilon)))
            }
            NoiseMode::Shots if self.shots == 0 => Err(Error::InvalidArgument("shots mode needs at least one copy".into())),
            _ => Ok(()),
        }
    }
}

/// Outcome counts of `M` copies measured in the local basis of one string.
/// Entry `o` counts copies whose outcome on the `j`-th support site (in site
/// order) was `-1` exactly when bit `j` of `o` is set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShotRecord {
    pub string: PauliString,
    pub counts: Vec<u64>,
}

impl ShotRecord {
    pub fn copies(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Sum over copies of the outcome product on each subset of the support,
    /// indexed by subset bitmask: a Walsh-Hadamard transform of the counts.
    pub fn subset_sums(&self) -> Vec<i64> {
        let mut out: Vec<i64> = self.counts.iter().map(|&c| c as i64).collect();
        let mut h = 1;
        while h < out.len() {
            for block in (0..out.len()).step_by(2 * h) {
                for i in block..block + h {
                    let (a, b) = (out[i], out[i + h]);
                    out[i] = a + b;
                    out[i + h] = a - b;
                }
            }
            h *= 2;
        }
        out
    }

    /// Estimated `<sigma^g>` of the measured string itself.
    pub fn estimate(&self) -> f64 {
        let sums = self.subset_sums();
        sums[sums.len() - 1] as f64 / self.copies() as f64
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LoggedValue {
    pub string: PauliString,
    /// Returned coefficient `A(g)`, i.e. the expectation divided by `2^N`.
    pub value: f64,
}

/// Everything an experiment produced: the queried strings with their
/// returned values and, in shots mode, the raw outcome counts.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeasurementRecord {
    pub n: usize,
    pub noise: NoiseModel,
    pub delta: Option<f64>,
    pub total_queries: usize,
    pub entries: Vec<LoggedValue>,
    #[serde(default)]
    pub shots: Vec<ShotRecord>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MeasurementLedger {
    /// Distinct Pauli strings measured, `N_b`.
    pub distinct_strings: usize,
    pub total_queries: usize,
    /// Strings not implied by zeroing entries of another measured string.
    pub settings: usize,
    /// `N_b * M` in shots mode.
    pub implied_copies: Option<u64>,
}

impl MeasurementLedger {
    pub const CSV_HEADER: &'static str = "run_id,N,mode,eps_or_M,Nb,total_queries,implied_copies";

    pub fn csv_row(&self, run_id: &str, n: usize, noise: &NoiseModel) -> String {
        let param = match noise.mode {
            NoiseMode::Exact => String::new(),
            NoiseMode::Gaussian => noise.epsilon.to_string(),
            NoiseMode::Shots => noise.shots.to_string(),
        };
        let copies = self.implied_copies.map(|c| c.to_string()).unwrap_or_default();
        format!("{run_id},{n},{},{param},{},{},{copies}", noise.mode, self.distinct_strings, self.total_queries)
    }
}

/// `<sigma^g> = 2^N A(g)`.
pub fn exact_expectation(state: &RealTT, p: &PauliString) -> Result<f64> {
    Ok(2f64.powi(state.len() as i32) * state.element(p)?)
}

/// `ceil(2^N / (epsilon^2 purity))`.
pub fn required_copies_for(n: usize, purity: f64, epsilon: f64) -> Result<u64> {
    if !(epsilon > 0.0) || !(purity > 0.0) {
        return Err(Error::InvalidArgument(format!("need epsilon > 0 and purity > 0, got {epsilon} and {purity}")));
    }
    let m = 2f64.powi(n as i32) / (epsilon * epsilon * purity);
    // Snap rounding noise so exact ratios like 2 / 0.1^2 do not ceil upward.
    let r = m.round();
    Ok(if (m - r).abs() <= 1e-9 * m { r } else { m.ceil() } as u64)
}

pub fn required_copies(state: &RealTT, epsilon: f64) -> Result<u64> {
    required_copies_for(state.len(), state.purity(), epsilon)
}

/// Noise scale `delta = epsilon sqrt(purity / 2^N)` of the Gaussian mode.
pub fn gaussian_delta(n: usize, purity: f64, epsilon: f64) -> f64 {
    epsilon * (purity / 2f64.powi(n as i32)).sqrt()
}

/// Outcome distribution of measuring `string` on its support: for outcome
/// `o`, `P(o) = sum_b A(b) prod_i v_i(b_i)` with `v_i = e_0 + o_i e_{g_i}` on
/// measured sites and `2 e_0` elsewhere.
pub fn outcome_probabilities(state: &RealTT, string: &[u8]) -> Result<Vec<f64>> {
    if string.len() != state.len() {
        return Err(Error::DimensionMismatch { site: string.len().min(state.len()), detail: "string length differs from state".into() });
    }
    let k = string.iter().filter(|&&g| g != 0).count();
    let mut probs = vec![0.0; 1 << k];
    let start = Array1::ones(1);
    branch(state, string, 0, 0, 0, start, &mut probs);
    for p in probs.iter_mut() {
        *p = p.max(0.0);
    }
    let total: f64 = probs.iter().sum();
    if !(total > 0.0) {
        return Err(Error::Numerical(format!("outcome distribution of {} has no weight", PauliString::new(string.to_vec())?)));
    }
    probs.iter_mut().for_each(|p| *p /= total);
    Ok(probs)
}

fn branch(state: &RealTT, string: &[u8], site: usize, bit: usize, outcome: usize, env: Array1<f64>, out: &mut [f64]) {
    if site == string.len() {
        out[outcome] = env[0];
        return;
    }
    let core = state.core(site);
    let slab0 = core.index_axis(ndarray::Axis(1), 0);
    let g = string[site] as usize;
    if g == 0 {
        let next = env.dot(&slab0) * 2.0;
        branch(state, string, site + 1, bit, outcome, next, out);
    } else {
        let base = env.dot(&slab0);
        let along = env.dot(&core.index_axis(ndarray::Axis(1), g));
        branch(state, string, site + 1, bit + 1, outcome, &base + &along, out);
        branch(state, string, site + 1, bit + 1, outcome | (1 << bit), &base - &along, out);
    }
}

/// Multinomial counts by sequential conditional binomials.
fn sample_counts<R: Rng>(probs: &[f64], copies: u64, rng: &mut R) -> Vec<u64> {
    let mut counts = vec![0u64; probs.len()];
    let mut left = copies;
    let mut mass = 1.0;
    for (i, &p) in probs.iter().enumerate() {
        if left == 0 {
            break;
        }
        if i + 1 == probs.len() {
            counts[i] = left;
            break;
        }
        let q = if mass > 0.0 { (p / mass).clamp(0.0, 1.0) } else { 0.0 };
        let c = Binomial::new(left, q).expect("probability clamped").sample(rng);
        counts[i] = c;
        left -= c;
        mass -= p;
    }
    counts
}

/// Measurement oracle on a known target state.
#[derive(Clone, Debug)]
pub struct MeasurementOracle {
    state: RealTT,
    noise: NoiseModel,
    delta: Option<f64>,
    log: QueryLog,
    shots: IndexMap<Vec<u8>, ShotRecord>,
}

impl MeasurementOracle {
    pub fn new(state: RealTT, noise: NoiseModel) -> Result<Self> {
        noise.validate()?;
        if let Some(site) = state.cores().iter().position(|c| c.dim().1 != PAULI_DIM) {
            return Err(Error::DimensionMismatch { site, detail: format!("expected physical dimension {PAULI_DIM}") });
        }
        let delta = (noise.mode == NoiseMode::Gaussian).then(|| gaussian_delta(state.len(), state.purity(), noise.epsilon));
        Ok(Self { state, noise, delta, log: QueryLog::new(), shots: IndexMap::new() })
    }

    /// Restores an oracle with the log and outcome counts of an earlier run.
    pub fn from_record(state: RealTT, record: &MeasurementRecord) -> Result<Self> {
        if record.n != state.len() {
            return Err(Error::InvalidArgument(format!("record has {} qubits, state {}", record.n, state.len())));
        }
        let mut oracle = Self::new(state, record.noise.clone())?;
        for e in &record.entries {
            oracle.log.record(&e.string, e.value);
        }
        for _ in record.entries.len()..record.total_queries {
            oracle.log.count_hit();
        }
        for s in &record.shots {
            oracle.shots.insert(s.string.to_vec(), s.clone());
        }
        Ok(oracle)
    }

    pub fn state(&self) -> &RealTT {
        &self.state
    }

    pub fn noise(&self) -> &NoiseModel {
        &self.noise
    }

    pub fn delta(&self) -> Option<f64> {
        self.delta
    }

    pub fn shot_records(&self) -> impl Iterator<Item = &ShotRecord> + '_ {
        self.shots.values()
    }

    fn scale(&self) -> f64 {
        2f64.powi(self.state.len() as i32)
    }

    fn gaussian_value(&self, idx: &[u8], exact: f64) -> f64 {
        if idx.iter().all(|&g| g == 0) {
            return exact;
        }
        let eta: f64 = index_rng(self.noise.seed, idx).sample(StandardNormal);
        exact + eta * self.delta.unwrap_or(0.0) / self.scale()
    }

    fn measure_shots(&self, idx: &[u8]) -> Result<ShotRecord> {
        let probs = outcome_probabilities(&self.state, idx)?;
        let mut rng = index_rng(self.noise.seed, idx);
        Ok(ShotRecord { string: PauliString::new(idx.to_vec())?, counts: sample_counts(&probs, self.noise.shots, &mut rng) })
    }

    /// The value a query for `idx` returns, without logging it.
    pub fn peek(&self, idx: &[u8]) -> Result<f64> {
        if let Some(v) = self.log.get(idx) {
            return Ok(v);
        }
        let exact = self.state.element(idx)?;
        Ok(match self.noise.mode {
            NoiseMode::Exact => exact,
            NoiseMode::Gaussian => self.gaussian_value(idx, exact),
            NoiseMode::Shots => self.measure_shots(idx)?.estimate() / self.scale(),
        })
    }

    pub fn ledger(&self) -> MeasurementLedger {
        let distinct = self.log.distinct();
        MeasurementLedger {
            distinct_strings: distinct,
            total_queries: self.log.total(),
            settings: self.log.setting_count(),
            implied_copies: (self.noise.mode == NoiseMode::Shots).then(|| distinct as u64 * self.noise.shots),
        }
    }

    pub fn record(&self) -> MeasurementRecord {
        MeasurementRecord {
            n: self.state.len(),
            noise: self.noise.clone(),
            delta: self.delta,
            total_queries: self.log.total(),
            entries: self
                .log
                .entries()
                .map(|(idx, value)| LoggedValue { string: PauliString::new(idx.to_vec()).expect("validated on query"), value })
                .collect(),
            shots: self.shots.values().cloned().collect(),
        }
    }
}

impl ElementOracle for MeasurementOracle {
    fn query(&mut self, idx: &[u8]) -> Result<f64> {
        if let Some(v) = self.log.get(idx) {
            self.log.count_hit();
            return Ok(v);
        }
        let exact = self.state.element(idx)?;
        let value = match self.noise.mode {
            NoiseMode::Exact => exact,
            NoiseMode::Gaussian => self.gaussian_value(idx, exact),
            NoiseMode::Shots => {
                let rec = self.measure_shots(idx)?;
                let v = rec.estimate() / self.scale();
                self.shots.insert(idx.to_vec(), rec);
                v
            }
        };
        self.log.record(idx, value);
        Ok(value)
    }

    fn log(&self) -> &QueryLog {
        &self.log
    }
}
