use indexmap::IndexMap;

use crate::error::Result;

/// Distinct queried indices with the values returned for them, in first-query
/// order, plus the total number of queries including repeats.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct QueryLog {
    values: IndexMap<Vec<u8>, f64>,
    total: usize,
}

impl QueryLog {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self, idx: &[u8]) -> Option<f64> {
        self.values.get(idx).copied()
    }

    pub fn contains(&self, idx: &[u8]) -> bool {
        self.values.contains_key(idx)
    }

    /// Counts one query; stores the value only the first time `idx` is seen.
    pub fn record(&mut self, idx: &[u8], value: f64) {
        self.total += 1;
        if !self.values.contains_key(idx) {
            self.values.insert(idx.to_vec(), value);
        }
    }

    pub(crate) fn count_hit(&mut self) {
        self.total += 1;
    }

    pub fn distinct(&self) -> usize {
        self.values.len()
    }

    pub fn total(&self) -> usize {
        self.total
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn entries(&self) -> impl Iterator<Item = (&[u8], f64)> + '_ {
        self.values.iter().map(|(k, &v)| (k.as_slice(), v))
    }

    pub fn indices(&self) -> impl Iterator<Item = &[u8]> + '_ {
        self.values.keys().map(|k| k.as_slice())
    }

    /// Logged strings that are not obtained from another logged string by
    /// replacing non-zero entries with zero. Each such string needs its own
    /// local measurement setting; the rest can be read off a dominating one.
    pub fn setting_count(&self) -> usize {
        let keys: Vec<&Vec<u8>> = self.values.keys().collect();
        let dominated = |s: &[u8], t: &[u8]| s != t && s.iter().zip(t).all(|(&a, &b)| a == 0 || a == b);
        keys.iter().filter(|s| !keys.iter().any(|t| dominated(s, t))).count()
    }
}

/// Lazily evaluated tensor elements with query accounting.
///
/// Implementations must be deterministic within one instance: a repeated
/// query returns the value recorded the first time.
pub trait ElementOracle {
    fn query(&mut self, idx: &[u8]) -> Result<f64>;

    fn log(&self) -> &QueryLog;

    fn query_count(&self) -> usize {
        self.log().total()
    }
}

/// Number of distinct multi-indices an oracle has been asked for.
pub fn queried_basis_count(oracle: &dyn ElementOracle) -> usize {
    oracle.log().distinct()
}

/// Caching oracle around a plain function.
pub struct FnOracle<F> {
    eval: F,
    log: QueryLog,
}

impl<F> FnOracle<F>
where
    F: FnMut(&[u8]) -> Result<f64>,
{
    pub fn new(eval: F) -> Self {
        Self { eval, log: QueryLog::new() }
    }
}

impl<F> ElementOracle for FnOracle<F>
where
    F: FnMut(&[u8]) -> Result<f64>,
{
    fn query(&mut self, idx: &[u8]) -> Result<f64> {
        if let Some(v) = self.log.get(idx) {
            self.log.count_hit();
            return Ok(v);
        }
        let v = (self.eval)(idx)?;
        self.log.record(idx, v);
        Ok(v)
    }

    fn log(&self) -> &QueryLog {
        &self.log
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fresh_oracle_has_no_queries() {
        let oracle = FnOracle::new(|_: &[u8]| Ok(1.0));
        assert_eq!(queried_basis_count(&oracle), 0);
        assert_eq!(oracle.query_count(), 0);
    }

    #[test]
    fn repeated_queries_count_once() {
        let mut calls = 0;
        let mut oracle = FnOracle::new(|idx: &[u8]| {
            calls += 1;
            Ok(idx.iter().map(|&g| g as f64).sum())
        });
        assert_eq!(oracle.query(&[1, 2]).unwrap(), 3.0);
        assert_eq!(oracle.query(&[1, 2]).unwrap(), 3.0);
        assert_eq!(queried_basis_count(&oracle), 1);
        assert_eq!(oracle.query_count(), 2);
        drop(oracle);
        assert_eq!(calls, 1);
    }

    #[test]
    fn setting_count_merges_dominated_strings() {
        let mut log = QueryLog::new();
        for s in [[1u8, 2, 3], [1, 0, 3], [0, 0, 3], [2, 2, 2], [0, 1, 0]] {
            log.record(&s, 0.0);
        }
        // [1,0,3] and [0,0,3] are read off [1,2,3]; [0,1,0] needs its own setting.
        assert_eq!(log.setting_count(), 3);
    }
}
