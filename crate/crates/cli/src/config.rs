//! Run configuration shared by all subcommands.
//!
//! A config file is TOML with the same shape as [`RunConfig`]; every key is
//! optional. Values from a config file override command-line flags, which
//! override the defaults.

use std::env;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use ttqst_core::cross::CrossConfig;
use ttqst_core::measure::NoiseModel;
use ttqst_core::metrics::FidelityConvention;
use ttqst_core::refine::TrainConfig;
use ttqst_core::states::{random_lptn_pauli, thermal_ising, LptnSpec, ThermalSpec};
use ttqst_core::RealTT;

use crate::error::{CliError, Result};

/// Environment variable naming the output directory when no flag or config
/// entry sets one.
pub const OUT_DIR_ENV: &str = "TTQST_OUT_DIR";
pub const DEFAULT_OUT_DIR: &str = "out";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum TargetSpec {
    Lptn(LptnSpec),
    Thermal(ThermalSpec),
}

impl Default for TargetSpec {
    fn default() -> Self {
        TargetSpec::Lptn(LptnSpec::new(8, 4, 0))
    }
}

impl TargetSpec {
    pub fn kind(&self) -> &'static str {
        match self {
            TargetSpec::Lptn(_) => "lptn",
            TargetSpec::Thermal(_) => "thermal",
        }
    }

    pub fn n(&self) -> usize {
        match self {
            TargetSpec::Lptn(s) => s.n,
            TargetSpec::Thermal(s) => s.n,
        }
    }

    pub fn with_n(&self, n: usize) -> Self {
        let mut t = self.clone();
        match &mut t {
            TargetSpec::Lptn(s) => s.n = n,
            TargetSpec::Thermal(s) => s.n = n,
        }
        t
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            TargetSpec::Lptn(s) => s.validate()?,
            TargetSpec::Thermal(s) => s.validate()?,
        }
        Ok(())
    }

    /// Pauli-coefficient train of the target. `tt_tol` is the TT-SVD
    /// tolerance for thermal states and is unused for LPTNs.
    pub fn generate(&self, tt_tol: f64) -> Result<RealTT> {
        self.validate()?;
        Ok(match self {
            TargetSpec::Lptn(s) => random_lptn_pauli(s)?,
            TargetSpec::Thermal(s) => thermal_ising(s, tt_tol)?,
        })
    }

    /// File stem such as `lptn_n8_k4_s7` or `thermal_n8_t2_g1`.
    pub fn stem(&self) -> String {
        match self {
            TargetSpec::Lptn(s) => format!("lptn_n{}_k{}_s{}", s.n, s.kappa, s.seed),
            TargetSpec::Thermal(s) => format!("thermal_n{}_t{}_g{}", s.n, s.temperature, s.g),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub target: TargetSpec,
    /// TT-SVD tolerance when generating thermal targets.
    pub tt_tol: f64,
    /// The `seed` inside is replaced by the repetition seed.
    pub noise: NoiseModel,
    /// The `seed` inside is replaced by the repetition seed.
    pub cross: CrossConfig,
    pub train: TrainConfig,
    pub fidelity: FidelityConvention,
    /// Compute `F` for runs with at most this many qubits (capped at 10).
    pub fidelity_max_n: usize,
    pub out_dir: Option<PathBuf>,
    /// Repetition `r` uses seed `seed + r`.
    pub seed: u64,
    pub repetitions: usize,
    /// Qubit range of `sweep`, inclusive. An empty range is allowed.
    pub n_min: usize,
    pub n_max: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            target: TargetSpec::default(),
            tt_tol: 1e-10,
            noise: NoiseModel::default(),
            cross: CrossConfig::default(),
            train: TrainConfig::default(),
            fidelity: FidelityConvention::default(),
            fidelity_max_n: ttqst_core::metrics::MAX_FIDELITY_QUBITS,
            out_dir: None,
            seed: 0,
            repetitions: 1,
            n_min: 4,
            n_max: 12,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        self.target.validate()?;
        self.noise.validate()?;
        self.cross.validate()?;
        self.train.validate()?;
        if self.repetitions == 0 {
            return Err(CliError::Usage("repetitions must be at least 1".into()));
        }
        if !(self.tt_tol > 0.0 && self.tt_tol.is_finite()) {
            return Err(CliError::Usage(format!("tt_tol must be positive, got {}", self.tt_tol)));
        }
        Ok(())
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| CliError::Usage(format!("config: {e}")))
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| CliError::Usage(format!("config: {e}")))
    }

    /// Lays the TOML document `overlay` over `self`. Tables merge key by key;
    /// a `[target]` with a different `kind` replaces the target outright.
    pub fn overlay_toml(&self, overlay: &str) -> Result<Self> {
        let over: toml::Table = overlay.parse().map_err(|e| CliError::Usage(format!("config: {e}")))?;
        let toml::Value::Table(base) = toml::Value::try_from(self).map_err(|e| CliError::Usage(format!("config: {e}")))?
        else {
            unreachable!("a struct serializes to a table")
        };
        toml::Value::Table(merge(base, over)).try_into().map_err(|e| CliError::Usage(format!("config: {e}")))
    }

    pub fn overlay_file(&self, path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        self.overlay_toml(&text)
    }

    /// `out_dir` if set, else `$TTQST_OUT_DIR`, else `./out`.
    pub fn resolved_out_dir(&self) -> PathBuf {
        self.out_dir
            .clone()
            .or_else(|| env::var_os(OUT_DIR_ENV).filter(|v| !v.is_empty()).map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_DIR))
    }

    pub fn repetition_seed(&self, rep: usize) -> u64 {
        self.seed.wrapping_add(rep as u64)
    }

    pub fn fidelity_enabled(&self, n: usize) -> bool {
        n <= self.fidelity_max_n.min(ttqst_core::metrics::MAX_FIDELITY_QUBITS)
    }
}

fn merge(mut base: toml::Table, over: toml::Table) -> toml::Table {
    for (key, value) in over {
        let replace_target = key == "target"
            && value.get("kind").is_some()
            && value.get("kind") != base.get("target").and_then(|t| t.get("kind"));
        match (base.remove(&key), value) {
            (Some(toml::Value::Table(b)), toml::Value::Table(o)) if !replace_target => {
                base.insert(key, toml::Value::Table(merge(b, o)));
            }
            (_, v) => {
                base.insert(key, v);
            }
        }
    }
    base
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_round_trips() {
        let cfg = RunConfig::default();
        let text = cfg.to_toml_string().unwrap();
        assert_eq!(RunConfig::from_toml_str(&text).unwrap(), cfg);
    }

    #[test]
    fn overlay_keeps_unset_fields() {
        let base = RunConfig { repetitions: 3, ..RunConfig::default() };
        let cfg = base.overlay_toml("seed = 9\n[cross]\nmax_rank = 6\n").unwrap();
        assert_eq!(cfg.seed, 9);
        assert_eq!(cfg.repetitions, 3);
        assert_eq!(cfg.cross.max_rank, 6);
        assert_eq!(cfg.cross.local_tol, 1e-3);
    }

    #[test]
    fn overlay_switches_target_kind() {
        let cfg = RunConfig::default().overlay_toml("[target]\nkind = \"thermal\"\nn = 6\ntemperature = 0.5\n").unwrap();
        assert_eq!(cfg.target, TargetSpec::Thermal(ThermalSpec::new(6, 0.5)));
        let cfg = RunConfig::default().overlay_toml("[target]\nkappa = 2\n").unwrap();
        assert_eq!(cfg.target, TargetSpec::Lptn(LptnSpec::new(8, 2, 0)));
    }

    #[test]
    fn unknown_keys_and_bad_values_are_usage_errors() {
        assert!(matches!(RunConfig::from_toml_str("repetitons = 2"), Err(CliError::Usage(_))));
        let cfg = RunConfig::from_toml_str("repetitions = 0").unwrap();
        assert!(matches!(cfg.validate(), Err(CliError::Usage(_))));
    }

    #[test]
    fn out_dir_falls_back_to_default() {
        let cfg = RunConfig { out_dir: Some("x".into()), ..RunConfig::default() };
        assert_eq!(cfg.resolved_out_dir(), PathBuf::from("x"));
    }
}
