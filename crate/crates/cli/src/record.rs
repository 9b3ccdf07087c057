//! CSV rows written by the subcommands.
//!
//! Empty cells are nulls; the reason for each null is listed in `flags`
//! (semicolon separated) unless it follows from `noise_mode` (`eps` is only
//! set for gaussian runs, `M` only for shots runs).

use std::fs::{self, OpenOptions};
use std::path::Path;

use serde::{Deserialize, Serialize};
use ttqst_core::measure::NoiseMode;
use ttqst_core::refine::StopReason;

use crate::error::{CliError, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub run_id: String,
    pub n: usize,
    pub kind: String,
    pub chi_target: Option<usize>,
    pub noise_mode: NoiseMode,
    pub eps: Option<f64>,
    pub shots: Option<u64>,
    pub n_b: usize,
    pub d: Option<f64>,
    pub ds: Option<f64>,
    pub fidelity: Option<f64>,
    pub wall_ms: u64,
    pub seed: u64,
    pub flags: Vec<String>,
}

impl RunRecord {
    pub const HEADER: [&'static str; 14] =
        ["run_id", "N", "kind", "chi_target", "noise_mode", "eps", "M", "Nb", "D", "Ds", "F", "wall_ms", "seed", "flags"];
    /// Extra column of `sweep`: the `3^N` settings of unstructured tomography.
    pub const SWEEP_EXTRA: &'static str = "3^N";

    pub fn has_flag(&self, prefix: &str) -> bool {
        self.flags.iter().any(|f| f.starts_with(prefix))
    }

    pub fn converged(&self) -> bool {
        self.d.is_some() && !self.has_flag("nonconverged")
    }

    pub fn fields(&self) -> Vec<String> {
        vec![
            self.run_id.clone(),
            self.n.to_string(),
            self.kind.clone(),
            opt(self.chi_target),
            self.noise_mode.to_string(),
            opt(self.eps),
            opt(self.shots),
            self.n_b.to_string(),
            opt(self.d),
            opt(self.ds),
            opt(self.fidelity),
            self.wall_ms.to_string(),
            self.seed.to_string(),
            self.flags.join(";"),
        ]
    }

    pub fn sweep_fields(&self) -> Vec<String> {
        let mut f = self.fields();
        f.push(3u128.pow(self.n as u32).to_string());
        f
    }

    pub fn from_fields(row: &csv::StringRecord) -> Result<Self> {
        if row.len() < Self::HEADER.len() {
            return Err(CliError::Usage(format!("run record has {} columns, expected {}", row.len(), Self::HEADER.len())));
        }
        let noise_mode = match &row[4] {
            "exact" => NoiseMode::Exact,
            "gaussian" => NoiseMode::Gaussian,
            "shots" => NoiseMode::Shots,
            other => return Err(CliError::Usage(format!("unknown noise mode {other:?}"))),
        };
        Ok(Self {
            run_id: row[0].to_string(),
            n: parse(&row[1])?,
            kind: row[2].to_string(),
            chi_target: parse_opt(&row[3])?,
            noise_mode,
            eps: parse_opt(&row[5])?,
            shots: parse_opt(&row[6])?,
            n_b: parse(&row[7])?,
            d: parse_opt(&row[8])?,
            ds: parse_opt(&row[9])?,
            fidelity: parse_opt(&row[10])?,
            wall_ms: parse(&row[11])?,
            seed: parse(&row[12])?,
            flags: row[13].split(';').filter(|s| !s.is_empty()).map(str::to_string).collect(),
        })
    }

    pub fn read_csv(path: &Path) -> Result<Vec<Self>> {
        let mut rd = csv::Reader::from_path(path)?;
        rd.records().map(|r| Self::from_fields(&r?)).collect()
    }
}

/// Before/after metrics of one refinement.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RefineRecord {
    pub run_id: String,
    pub n: usize,
    pub kind: String,
    pub n_b: usize,
    pub settings: usize,
    pub training_size: usize,
    pub d_before: f64,
    pub d_after: f64,
    pub f_before: Option<f64>,
    pub f_after: Option<f64>,
    pub loss_before: f64,
    pub loss_after: f64,
    pub epochs: usize,
    pub best_epoch: usize,
    pub stop: StopReason,
    pub wall_ms: u64,
    pub seed: u64,
    pub flags: Vec<String>,
}

impl RefineRecord {
    pub const HEADER: [&'static str; 18] = [
        "run_id",
        "N",
        "kind",
        "Nb",
        "settings",
        "training_size",
        "D_before",
        "D_after",
        "F_before",
        "F_after",
        "loss_before",
        "loss_after",
        "epochs",
        "best_epoch",
        "stop",
        "wall_ms",
        "seed",
        "flags",
    ];

    pub fn fields(&self) -> Vec<String> {
        vec![
            self.run_id.clone(),
            self.n.to_string(),
            self.kind.clone(),
            self.n_b.to_string(),
            self.settings.to_string(),
            self.training_size.to_string(),
            self.d_before.to_string(),
            self.d_after.to_string(),
            opt(self.f_before),
            opt(self.f_after),
            self.loss_before.to_string(),
            self.loss_after.to_string(),
            self.epochs.to_string(),
            self.best_epoch.to_string(),
            format!("{:?}", self.stop).to_lowercase(),
            self.wall_ms.to_string(),
            self.seed.to_string(),
            self.flags.join(";"),
        ]
    }
}

/// Appends rows to a CSV file, writing `header` first when the file is new
/// or empty. An empty `rows` still leaves a file with the header.
pub fn append_csv<S: AsRef<str>>(path: &Path, header: &[S], rows: &[Vec<String>]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    let fresh = fs::metadata(path).map(|m| m.len() == 0).unwrap_or(true);
    let file = OpenOptions::new().create(true).append(true).open(path)?;
    let mut w = csv::Writer::from_writer(file);
    if fresh {
        w.write_record(header.iter().map(|h| h.as_ref()))?;
    }
    for row in rows {
        w.write_record(row)?;
    }
    w.flush()?;
    Ok(())
}

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn parse<T: std::str::FromStr>(s: &str) -> Result<T> {
    s.parse().map_err(|_| CliError::Usage(format!("cannot parse {s:?} in run record")))
}

fn parse_opt<T: std::str::FromStr>(s: &str) -> Result<Option<T>> {
    if s.is_empty() {
        Ok(None)
    } else {
        parse(s).map(Some)
    }
}
