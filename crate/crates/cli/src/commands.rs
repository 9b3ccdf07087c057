//! Subcommand implementations. Each takes a validated [`RunConfig`] and an
//! output directory, writes its artifacts there and returns what it wrote.
//!
//! Output layout under the output directory:
//!
//! ```text
//! states/<stem>.tt, states/<stem>.meta.json   generate
//! runs.csv                                    reconstruct
//! recon/<run_id>.tt                           reconstructed train
//! recon/<run_id>.record.json                  measurement record
//! recon/<run_id>.skeleton.txt                 cross skeleton
//! sweep.csv                                   sweep
//! refine.csv, refine/<run_id>.tt              refine
//! refine/<run_id>.loss.csv                    loss history (epoch,loss)
//! ```

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use log::{info, warn};
use serde::{Deserialize, Serialize};
use ttqst_core::cross::{ttcross_dmrg, CrossConfig, CrossOutcome, ElementOracle};
use ttqst_core::dense::DenseOperator;
use ttqst_core::io::{load_tt, save_tt, FORMAT_VERSION};
use ttqst_core::measure::{MeasurementOracle, MeasurementRecord, NoiseMode, NoiseModel};
use ttqst_core::metrics::{distance_d, distance_ds, fidelity_with, DistanceReport, FidelityConvention};
use ttqst_core::refine::{build_closure, train, TrainOutcome};
use ttqst_core::RealTT;

use crate::config::{RunConfig, TargetSpec};
use crate::error::{CliError, Result};
use crate::record::{append_csv, RefineRecord, RunRecord};

/// Sidecar written next to a generated state.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StateMeta {
    pub format_version: u8,
    pub target: TargetSpec,
    pub n: usize,
    pub tt_tol: f64,
    /// `kappa^2` for an LPTN, the largest bond for a thermal state.
    pub chi_target: usize,
    pub purity: f64,
    pub bond_dims: Vec<usize>,
}

impl StateMeta {
    pub fn describe(target: &TargetSpec, tt: &RealTT, tt_tol: f64) -> Self {
        let chi_target = match target {
            TargetSpec::Lptn(s) => s.chi(),
            TargetSpec::Thermal(_) => tt.max_bond(),
        };
        Self {
            format_version: FORMAT_VERSION,
            target: target.clone(),
            n: tt.len(),
            tt_tol,
            chi_target,
            purity: tt.purity(),
            bond_dims: tt.bond_dims(),
        }
    }
}

/// Target family and reference bond dimension for run records.
#[derive(Clone, Debug, PartialEq)]
pub struct TargetInfo {
    pub kind: String,
    pub chi_target: Option<usize>,
}

impl From<&StateMeta> for TargetInfo {
    fn from(m: &StateMeta) -> Self {
        Self { kind: m.target.kind().into(), chi_target: Some(m.chi_target) }
    }
}

pub fn meta_path(state_path: &Path) -> PathBuf {
    state_path.with_extension("meta.json")
}

#[derive(Clone, Debug)]
pub struct Generated {
    pub tt_path: PathBuf,
    pub meta_path: PathBuf,
    pub meta: StateMeta,
}

pub fn cmd_generate(cfg: &RunConfig, out_dir: &Path) -> Result<Generated> {
    let tt = cfg.target.generate(cfg.tt_tol)?;
    let meta = StateMeta::describe(&cfg.target, &tt, cfg.tt_tol);
    let dir = out_dir.join("states");
    fs::create_dir_all(&dir)?;
    let tt_path = dir.join(format!("{}.tt", cfg.target.stem()));
    save_tt(&tt_path, &tt)?;
    let meta_path = meta_path(&tt_path);
    fs::write(&meta_path, serde_json::to_string_pretty(&meta)? + "\n")?;
    info!("wrote {} (bonds {:?})", tt_path.display(), meta.bond_dims);
    Ok(Generated { tt_path, meta_path, meta })
}

/// Loads a state container and its sidecar if present. Without a sidecar
/// the kind is `file` and `chi_target` is the largest bond.
pub fn load_state(path: &Path) -> Result<(RealTT, TargetInfo)> {
    let tt = load_tt(path)?.into_real()?;
    let meta = meta_path(path);
    let info = if meta.exists() {
        let m: StateMeta = serde_json::from_str(&fs::read_to_string(&meta)?)?;
        if m.n != tt.len() {
            return Err(CliError::Usage(format!("{} describes {} qubits, state has {}", meta.display(), m.n, tt.len())));
        }
        TargetInfo::from(&m)
    } else {
        TargetInfo { kind: "file".into(), chi_target: Some(tt.max_bond()) }
    };
    Ok((tt, info))
}

/// Reference state with its dense form cached for fidelities.
pub struct Target {
    pub tt: RealTT,
    pub info: TargetInfo,
    dense: Option<DenseOperator>,
}

impl Target {
    pub fn new(tt: RealTT, info: TargetInfo) -> Self {
        Self { tt, info, dense: None }
    }

    fn dense(&mut self) -> Result<&DenseOperator> {
        if self.dense.is_none() {
            self.dense = Some(self.tt.to_dense_operator()?);
        }
        Ok(self.dense.as_ref().expect("set above"))
    }

    pub fn fidelity(&mut self, recon: &RealTT, convention: FidelityConvention) -> Result<f64> {
        let rho2 = recon.to_dense_operator()?;
        Ok(fidelity_with(self.dense()?, &rho2, convention)?)
    }
}

/// One measured reconstruction: the record plus what produced it.
pub struct Reconstruction {
    pub record: RunRecord,
    pub outcome: CrossOutcome,
    pub oracle: MeasurementOracle,
}

/// Runs repetition `rep`: measurement oracle with seed `cfg.seed + rep`,
/// DMRG cross, then `D`, `D_s` and (for small `N`) `F`.
pub fn reconstruct_once(target: &mut Target, cfg: &RunConfig, rep: usize, run_id: String) -> Result<Reconstruction> {
    let start = Instant::now();
    let seed = cfg.repetition_seed(rep);
    let n = target.tt.len();
    let noise = NoiseModel { seed, ..cfg.noise.clone() };
    let cross = CrossConfig { seed, ..cfg.cross.clone() };
    let mut oracle = MeasurementOracle::new(target.tt.clone(), noise.clone())?;
    let outcome = ttcross_dmrg(&mut oracle, &target.tt.phys_dims(), &cross)?;
    let d = distance_d(&target.tt, &outcome.tt)?;
    let ds = distance_ds(oracle.log().entries(), &outcome.tt)?;
    let mut flags = Vec::new();
    if !outcome.converged {
        flags.push("nonconverged".to_string());
    }
    if outcome.degenerate_pivots > 0 {
        flags.push(format!("degenerate_pivots={}", outcome.degenerate_pivots));
    }
    let fidelity = if cfg.fidelity_enabled(n) {
        match target.fidelity(&outcome.tt, cfg.fidelity) {
            Ok(f) => Some(f),
            Err(e) => {
                flags.push(format!("F:error {e}"));
                None
            }
        }
    } else {
        flags.push(format!("F:skipped N>{}", cfg.fidelity_max_n.min(ttqst_core::metrics::MAX_FIDELITY_QUBITS)));
        None
    };
    let record = RunRecord {
        run_id,
        n,
        kind: target.info.kind.clone(),
        chi_target: target.info.chi_target,
        noise_mode: noise.mode,
        eps: (noise.mode == NoiseMode::Gaussian).then_some(noise.epsilon),
        shots: (noise.mode == NoiseMode::Shots).then_some(noise.shots),
        n_b: oracle.log().distinct(),
        d: Some(d),
        ds: Some(ds),
        fidelity,
        wall_ms: start.elapsed().as_millis() as u64,
        seed,
        flags,
    };
    Ok(Reconstruction { record, outcome, oracle })
}

/// Row for a repetition that failed before producing a reconstruction.
pub fn failure_record(n: usize, info: &TargetInfo, cfg: &RunConfig, rep: usize, run_id: String, err: &CliError) -> RunRecord {
    let noise = &cfg.noise;
    RunRecord {
        run_id,
        n,
        kind: info.kind.clone(),
        chi_target: info.chi_target,
        noise_mode: noise.mode,
        eps: (noise.mode == NoiseMode::Gaussian).then_some(noise.epsilon),
        shots: (noise.mode == NoiseMode::Shots).then_some(noise.shots),
        n_b: 0,
        d: None,
        ds: None,
        fidelity: None,
        wall_ms: 0,
        seed: cfg.repetition_seed(rep),
        flags: vec![format!("error: {err}")],
    }
}

#[derive(Clone, Debug)]
pub struct RunSummary {
    pub records: Vec<RunRecord>,
    pub csv: PathBuf,
}

impl RunSummary {
    /// Mean `D` over the runs that produced one.
    pub fn mean_d(&self) -> Option<f64> {
        let ds: Vec<f64> = self.records.iter().filter_map(|r| r.d).collect();
        (!ds.is_empty()).then(|| ds.iter().sum::<f64>() / ds.len() as f64)
    }

    pub fn nonconverged(&self) -> usize {
        self.records.iter().filter(|r| r.has_flag("nonconverged")).count()
    }

    pub fn failures(&self) -> usize {
        self.records.iter().filter(|r| r.d.is_none()).count()
    }

    /// `Err` with the exit category when any run failed or did not converge.
    pub fn status(&self) -> Result<()> {
        let n = self.records.len();
        if self.failures() > 0 {
            return Err(CliError::Numerical(format!("{} of {n} runs failed, see {}", self.failures(), self.csv.display())));
        }
        if self.nonconverged() > 0 {
            return Err(CliError::NonConvergence(format!(
                "{} of {n} runs hit max_sweeps, see {}",
                self.nonconverged(),
                self.csv.display()
            )));
        }
        Ok(())
    }
}

/// Reconstructs the state in `state_path` `cfg.repetitions` times and appends
/// one row per repetition to `runs.csv`.
pub fn cmd_reconstruct(cfg: &RunConfig, state_path: &Path, out_dir: &Path) -> Result<RunSummary> {
    let (tt, info) = load_state(state_path)?;
    let mut target = Target::new(tt, info);
    let stem = state_path.file_stem().and_then(|s| s.to_str()).unwrap_or("state").to_string();
    let recon_dir = out_dir.join("recon");
    fs::create_dir_all(&recon_dir)?;
    let csv = out_dir.join("runs.csv");
    let mut records = Vec::with_capacity(cfg.repetitions);
    for rep in 0..cfg.repetitions {
        let run_id = format!("{stem}-s{}", cfg.repetition_seed(rep));
        let record = match reconstruct_once(&mut target, cfg, rep, run_id.clone()) {
            Ok(r) => {
                save_tt(recon_dir.join(format!("{run_id}.tt")), &r.outcome.tt)?;
                fs::write(recon_dir.join(format!("{run_id}.record.json")), serde_json::to_string(&r.oracle.record())?)?;
                fs::write(recon_dir.join(format!("{run_id}.skeleton.txt")), r.outcome.skeleton.to_string())?;
                r.record
            }
            Err(e) => {
                warn!("{run_id}: {e}");
                failure_record(target.tt.len(), &target.info, cfg, rep, run_id, &e)
            }
        };
        append_csv(&csv, &RunRecord::HEADER, &[record.fields()])?;
        records.push(record);
    }
    Ok(RunSummary { records, csv })
}

/// Runs `cfg.repetitions` reconstructions of `cfg.target` at every
/// `N` in `n_min..=n_max` and appends rows to `sweep.csv`. Failures at one
/// `N` are recorded and the sweep continues.
pub fn cmd_sweep(cfg: &RunConfig, out_dir: &Path) -> Result<RunSummary> {
    fs::create_dir_all(out_dir)?;
    let csv = out_dir.join("sweep.csv");
    let mut header: Vec<&str> = RunRecord::HEADER.to_vec();
    header.push(RunRecord::SWEEP_EXTRA);
    append_csv(&csv, &header, &[])?;
    let mut records = Vec::new();
    for n in cfg.n_min..=cfg.n_max {
        let spec = cfg.target.with_n(n);
        let stem = spec.stem();
        let spec_info = TargetInfo {
            kind: spec.kind().into(),
            chi_target: match &spec {
                TargetSpec::Lptn(s) => Some(s.chi()),
                TargetSpec::Thermal(_) => None,
            },
        };
        let generated = spec.generate(cfg.tt_tol).map(|tt| {
            let meta = StateMeta::describe(&spec, &tt, cfg.tt_tol);
            Target::new(tt, TargetInfo::from(&meta))
        });
        let mut target = match generated {
            Ok(t) => Some(t),
            Err(e) => {
                warn!("{stem}: {e}");
                for rep in 0..cfg.repetitions {
                    let rec = failure_record(n, &spec_info, cfg, rep, format!("{stem}-s{}", cfg.repetition_seed(rep)), &e);
                    append_csv(&csv, &header, &[rec.sweep_fields()])?;
                    records.push(rec);
                }
                None
            }
        };
        let Some(target) = target.as_mut() else { continue };
        for rep in 0..cfg.repetitions {
            let run_id = format!("{stem}-s{}", cfg.repetition_seed(rep));
            let rec = match reconstruct_once(target, cfg, rep, run_id.clone()) {
                Ok(r) => r.record,
                Err(e) => {
                    warn!("{run_id}: {e}");
                    failure_record(n, &target.info, cfg, rep, run_id, &e)
                }
            };
            info!("{}: D {:?} Nb {}", rec.run_id, rec.d, rec.n_b);
            append_csv(&csv, &header, &[rec.sweep_fields()])?;
            records.push(rec);
        }
    }
    Ok(RunSummary { records, csv })
}

/// Result of one refinement.
pub struct Refinement {
    pub record: RefineRecord,
    pub outcome: TrainOutcome,
}

/// Builds the training set from the oracle's record, trains, and reports
/// `D` and `F` before and after.
pub fn refine_once(target: &mut Target, recon: &RealTT, oracle: &MeasurementOracle, cfg: &RunConfig, run_id: String) -> Result<Refinement> {
    let start = Instant::now();
    let n = target.tt.len();
    if recon.len() != n {
        return Err(CliError::Usage(format!("reconstruction has {} qubits, target {n}", recon.len())));
    }
    let data = build_closure(oracle)?;
    let outcome = train(recon, &data, &cfg.train)?;
    let d_before = distance_d(&target.tt, recon)?;
    let d_after = distance_d(&target.tt, &outcome.tt)?;
    let mut flags = Vec::new();
    let (f_before, f_after) = if cfg.fidelity_enabled(n) {
        (Some(target.fidelity(recon, cfg.fidelity)?), Some(target.fidelity(&outcome.tt, cfg.fidelity)?))
    } else {
        flags.push(format!("F:skipped N>{}", cfg.fidelity_max_n.min(ttqst_core::metrics::MAX_FIDELITY_QUBITS)));
        (None, None)
    };
    if outcome.diverged() {
        flags.push("diverged".into());
    }
    let ledger = oracle.ledger();
    let record = RefineRecord {
        run_id,
        n,
        kind: target.info.kind.clone(),
        n_b: ledger.distinct_strings,
        settings: ledger.settings,
        training_size: data.len(),
        d_before,
        d_after,
        f_before,
        f_after,
        loss_before: outcome.initial_loss,
        loss_after: outcome.best_loss,
        epochs: outcome.history.len(),
        best_epoch: outcome.best_epoch,
        stop: outcome.stop,
        wall_ms: start.elapsed().as_millis() as u64,
        seed: cfg.train.seed,
        flags,
    };
    Ok(Refinement { record, outcome })
}

/// Refines a saved reconstruction against its saved measurement record.
pub fn cmd_refine(cfg: &RunConfig, state_path: &Path, recon_path: &Path, record_path: &Path, out_dir: &Path) -> Result<Refinement> {
    let (tt, info) = load_state(state_path)?;
    let mut target = Target::new(tt, info);
    let recon = load_tt(recon_path)?.into_real()?;
    let record: MeasurementRecord = serde_json::from_str(&fs::read_to_string(record_path)?)?;
    let oracle = MeasurementOracle::from_record(target.tt.clone(), &record)?;
    let run_id = recon_path.file_stem().and_then(|s| s.to_str()).unwrap_or("recon").to_string();
    let refined = refine_once(&mut target, &recon, &oracle, cfg, run_id.clone())?;

    let dir = out_dir.join("refine");
    fs::create_dir_all(&dir)?;
    save_tt(dir.join(format!("{run_id}.tt")), &refined.outcome.tt)?;
    let rows: Vec<Vec<String>> =
        refined.outcome.history.iter().map(|e| vec![e.epoch.to_string(), e.loss.to_string()]).collect();
    let loss_path = dir.join(format!("{run_id}.loss.csv"));
    if loss_path.exists() {
        fs::remove_file(&loss_path)?;
    }
    append_csv(&loss_path, &["epoch", "loss"], &rows)?;
    append_csv(&out_dir.join("refine.csv"), &RefineRecord::HEADER, &[refined.record.fields()])?;
    Ok(refined)
}

/// `D` (and `F` for small `N`) between two stored states, plus `D_s` and
/// `N_b` when a measurement record of `reference` is given.
pub fn cmd_metrics(
    reference: &Path,
    candidate: &Path,
    record: Option<&Path>,
    convention: FidelityConvention,
) -> Result<DistanceReport> {
    let rho1 = load_tt(reference)?.into_real()?;
    let rho2 = load_tt(candidate)?.into_real()?;
    if rho1.len() != rho2.len() {
        return Err(CliError::Usage(format!("states have {} and {} qubits", rho1.len(), rho2.len())));
    }
    let mut report = DistanceReport { d: distance_d(&rho1, &rho2)?, ..DistanceReport::default() };
    if let Some(path) = record {
        let rec: MeasurementRecord = serde_json::from_str(&fs::read_to_string(path)?)?;
        report.ds = Some(distance_ds(rec.entries.iter().map(|e| (e.string.as_slice(), e.value)), &rho2)?);
        report.n_b = rec.entries.len();
    }
    if rho1.len() <= ttqst_core::metrics::MAX_FIDELITY_QUBITS {
        report.fidelity = Some(fidelity_with(&rho1.to_dense_operator()?, &rho2.to_dense_operator()?, convention)?);
    }
    Ok(report)
}
