use indexmap::IndexMap;

use crate::cross::ElementOracle;
use crate::error::{Error, Result};
use crate::measure::{MeasurementOracle, NoiseMode};

/// Pauli expectations (not coefficients) keyed by string, closed under
/// resetting any subset of entries to identity.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrainingSet {
    n: usize,
    entries: IndexMap<Vec<u8>, f64>,
    base: usize,
}

impl TrainingSet {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Number of logged strings the closure was built from.
    pub fn base_len(&self) -> usize {
        self.base
    }

    pub fn get(&self, idx: &[u8]) -> Option<f64> {
        self.entries.get(idx).copied()
    }

    pub fn entries(&self) -> impl Iterator<Item = (&[u8], f64)> + Clone + '_ {
        self.entries.iter().map(|(k, &v)| (k.as_slice(), v))
    }

    pub fn entry(&self, i: usize) -> (&[u8], f64) {
        let (k, &v) = self.entries.get_index(i).expect("index in range");
        (k.as_slice(), v)
    }

    /// True when every zero-replacement descendant of every entry is present.
    pub fn is_closed(&self) -> bool {
        self.entries.keys().all(|k| descendants(k).all(|d| self.entries.contains_key(&d)))
    }

    /// Builds a set from explicit expectations, adding nothing.
    pub fn from_values(n: usize, values: impl IntoIterator<Item = (Vec<u8>, f64)>) -> Result<Self> {
        let entries: IndexMap<Vec<u8>, f64> = values.into_iter().collect();
        if let Some(k) = entries.keys().find(|k| k.len() != n) {
            return Err(Error::InvalidArgument(format!("string of length {} in a {n}-qubit set", k.len())));
        }
        let base = entries.len();
        Ok(Self { n, entries, base })
    }
}

/// All strings obtained from `idx` by zeroing a subset of its non-zero
/// entries, `idx` itself included.
pub(crate) fn descendants(idx: &[u8]) -> impl Iterator<Item = Vec<u8>> + '_ {
    let support: Vec<usize> = (0..idx.len()).filter(|&i| idx[i] != 0).collect();
    (0..1usize << support.len()).map(move |mask| {
        let mut out = vec![0u8; idx.len()];
        for (j, &site) in support.iter().enumerate() {
            if mask >> j & 1 == 1 {
                out[site] = idx[site];
            }
        }
        out
    })
}

/// Training set from an oracle's measurement history.
///
/// Shots mode reuses the outcome counts: the expectation of a descendant is
/// the mean outcome product over its sites. When several measured strings
/// contain the same descendant their copies are pooled. Gaussian and exact
/// modes read descendants from the oracle's frozen per-string values. The
/// identity is exactly 1.
pub fn build_closure(oracle: &MeasurementOracle) -> Result<TrainingSet> {
    let log = oracle.log();
    if log.is_empty() {
        return Err(Error::InvalidArgument("closure needs at least one measured string".into()));
    }
    let n = oracle.state().len();
    let scale = 2f64.powi(n as i32);
    let mut entries: IndexMap<Vec<u8>, f64> = IndexMap::new();
    match oracle.noise().mode {
        NoiseMode::Shots => {
            let mut pooled: IndexMap<Vec<u8>, (i64, u64)> = IndexMap::new();
            for idx in log.indices() {
                pooled.entry(idx.to_vec()).or_insert((0, 0));
            }
            for rec in oracle.shot_records() {
                let sums = rec.subset_sums();
                let copies = rec.copies();
                for (mask, desc) in descendants(&rec.string).enumerate() {
                    let e = pooled.entry(desc).or_insert((0, 0));
                    e.0 += sums[mask];
                    e.1 += copies;
                }
            }
            for (idx, (sum, copies)) in pooled {
                if idx.iter().all(|&g| g == 0) {
                    entries.insert(idx, 1.0);
                } else if copies > 0 {
                    entries.insert(idx, sum as f64 / copies as f64);
                } else {
                    return Err(Error::Oracle(format!("no outcome counts for measured string {idx:?}")));
                }
            }
        }
        NoiseMode::Exact | NoiseMode::Gaussian => {
            for idx in log.indices() {
                for desc in descendants(idx) {
                    if entries.contains_key(&desc) {
                        continue;
                    }
                    let v = if desc.iter().all(|&g| g == 0) { 1.0 } else { scale * oracle.peek(&desc)? };
                    entries.insert(desc, v);
                }
            }
        }
    }
    Ok(TrainingSet { n, entries, base: log.distinct() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::NoiseModel;
    use crate::states::{random_lptn_pauli, LptnSpec};
    use crate::tt::RealTT;
    use std::collections::BTreeSet;

    #[test]
    fn descendants_of_pair() {
        let got: BTreeSet<Vec<u8>> = descendants(&[1, 1]).collect();
        let want: BTreeSet<Vec<u8>> = [vec![1, 1], vec![1, 0], vec![0, 1], vec![0, 0]].into_iter().collect();
        assert_eq!(got, want);
        assert_eq!(descendants(&[0, 3, 0, 2, 1]).count(), 8);
    }

    fn state() -> RealTT {
        random_lptn_pauli(&LptnSpec::new(4, 2, 5)).unwrap()
    }

    #[test]
    fn gaussian_closure_uses_frozen_values() {
        let mut oracle = MeasurementOracle::new(state(), NoiseModel::gaussian(0.05, 3)).unwrap();
        oracle.query(&[1, 2, 0, 3]).unwrap();
        oracle.query(&[1, 0, 0, 0]).unwrap();
        let set = build_closure(&oracle).unwrap();
        assert_eq!(set.len(), 8);
        assert!(set.is_closed());
        assert_eq!(set.get(&[0, 0, 0, 0]), Some(1.0));
        assert_eq!(set.get(&[1, 2, 0, 3]), Some(16.0 * oracle.log().get(&[1, 2, 0, 3]).unwrap()));
        assert_eq!(set.get(&[0, 2, 0, 3]), Some(16.0 * oracle.peek(&[0, 2, 0, 3]).unwrap()));
        assert_eq!(set.base_len(), 2);
    }

    #[test]
    fn shot_closure_matches_outcome_recount() {
        let mut oracle = MeasurementOracle::new(state(), NoiseModel::shots(500, 1)).unwrap();
        oracle.query(&[2, 0, 1, 3]).unwrap();
        let set = build_closure(&oracle).unwrap();
        assert_eq!(set.len(), 8);
        let rec = oracle.shot_records().next().unwrap().clone();
        // Expand counts to per-copy outcome arrays and recompute directly.
        let copies: Vec<[i64; 3]> = rec
            .counts
            .iter()
            .enumerate()
            .flat_map(|(o, &c)| std::iter::repeat_n([0, 1, 2].map(|j| if o >> j & 1 == 1 { -1 } else { 1 }), c as usize))
            .collect();
        for (desc, keep) in [(vec![2u8, 0, 1, 3], [true, true, true]), (vec![2, 0, 0, 3], [true, false, true]), (vec![0, 0, 1, 0], [false, true, false])] {
            let total: i64 = copies.iter().map(|o| (0..3).filter(|&j| keep[j]).map(|j| o[j]).product::<i64>()).sum();
            assert_eq!(set.get(&desc), Some(total as f64 / 500.0));
        }
        assert_eq!(set.get(&[2, 0, 1, 3]).unwrap(), 16.0 * oracle.log().get(&[2, 0, 1, 3]).unwrap());
    }

    #[test]
    fn shot_closure_pools_shared_descendants() {
        let mut oracle = MeasurementOracle::new(state(), NoiseModel::shots(300, 2)).unwrap();
        oracle.query(&[1, 1, 0, 0]).unwrap();
        oracle.query(&[1, 2, 0, 0]).unwrap();
        let set = build_closure(&oracle).unwrap();
        let recs: Vec<_> = oracle.shot_records().cloned().collect();
        let s0 = recs[0].subset_sums()[1];
        let s1 = recs[1].subset_sums()[1];
        assert_eq!(set.get(&[1, 0, 0, 0]), Some((s0 + s1) as f64 / 600.0));
    }

    #[test]
    fn empty_log_is_rejected() {
        let oracle = MeasurementOracle::new(state(), NoiseModel::exact()).unwrap();
        assert!(build_closure(&oracle).is_err());
    }
}
