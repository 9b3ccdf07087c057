//! Command-line flags and their mapping onto [`RunConfig`].

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use ttqst_core::measure::NoiseMode;
use ttqst_core::metrics::FidelityConvention;
use ttqst_core::states::ThermalSpec;

use crate::commands::{cmd_generate, cmd_metrics, cmd_reconstruct, cmd_refine, cmd_sweep};
use crate::config::{RunConfig, TargetSpec, OUT_DIR_ENV};
use crate::error::{CliError, Result};

#[derive(Debug, Parser)]
#[command(name = "ttqst", version, about = "Tensor-train cross tomography of MPO states")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a target state (TT container plus metadata sidecar).
    Generate(RunArgs),
    /// Reconstruct a stored state from simulated measurements.
    Reconstruct {
        #[arg(long)]
        state: PathBuf,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Reconstruct generated targets for every N in --n-min..=--n-max.
    Sweep(RunArgs),
    /// Refine a reconstruction against its measurement record.
    Refine {
        #[arg(long)]
        state: PathBuf,
        #[arg(long)]
        recon: PathBuf,
        #[arg(long)]
        record: PathBuf,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Compare two stored states; prints JSON.
    Metrics {
        #[arg(long)]
        reference: PathBuf,
        #[arg(long)]
        candidate: PathBuf,
        /// Measurement record of the reference, for D_s and N_b.
        #[arg(long)]
        record: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = FidelityArg::PrincipalReal)]
        fidelity: FidelityArg,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum NoiseArg {
    Exact,
    Gaussian,
    Shots,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum FidelityArg {
    PrincipalReal,
    SignedSqrt,
}

impl From<FidelityArg> for FidelityConvention {
    fn from(a: FidelityArg) -> Self {
        match a {
            FidelityArg::PrincipalReal => FidelityConvention::PrincipalReal,
            FidelityArg::SignedSqrt => FidelityConvention::SignedSqrt,
        }
    }
}

/// Flags shared by the run subcommands. Unset flags keep the defaults; a
/// `--config` file is applied last and wins over flags.
#[derive(Debug, Default, Args)]
pub struct RunArgs {
    /// TOML run configuration; its values override flags.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, env = OUT_DIR_ENV)]
    pub out_dir: Option<PathBuf>,
    /// Run seed; repetition r uses seed + r. Also the LPTN seed when
    /// --state-seed is absent.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub repetitions: Option<usize>,

    #[arg(long, conflicts_with = "thermal")]
    pub lptn: bool,
    #[arg(long)]
    pub thermal: bool,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub kappa: Option<usize>,
    #[arg(long)]
    pub kraus: Option<usize>,
    #[arg(long)]
    pub state_seed: Option<u64>,
    /// Temperature of the thermal target.
    #[arg(long = "t")]
    pub temperature: Option<f64>,
    /// Transverse field of the thermal target.
    #[arg(long)]
    pub g: Option<f64>,
    #[arg(long)]
    pub tt_tol: Option<f64>,

    #[arg(long, value_enum)]
    pub noise: Option<NoiseArg>,
    #[arg(long)]
    pub eps: Option<f64>,
    /// Copies per measured string in shots mode.
    #[arg(long)]
    pub shots: Option<u64>,

    #[arg(long)]
    pub max_rank: Option<usize>,
    #[arg(long)]
    pub local_tol: Option<f64>,
    #[arg(long)]
    pub max_sweeps: Option<usize>,
    #[arg(long)]
    pub maxvol_tol: Option<f64>,
    #[arg(long)]
    pub pinv_cutoff: Option<f64>,

    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub patience: Option<usize>,
    #[arg(long)]
    pub train_seed: Option<u64>,

    #[arg(long, value_enum)]
    pub fidelity: Option<FidelityArg>,
    /// Compute F only up to this many qubits (at most 10).
    #[arg(long)]
    pub fidelity_max_n: Option<usize>,
    #[arg(long)]
    pub n_min: Option<usize>,
    #[arg(long)]
    pub n_max: Option<usize>,
}

fn set<T>(slot: &mut T, v: Option<T>) {
    if let Some(v) = v {
        *slot = v;
    }
}

impl RunArgs {
    /// Defaults, then flags, then the config file; validated.
    pub fn to_config(&self) -> Result<RunConfig> {
        let mut cfg = RunConfig::default();
        if self.thermal {
            cfg.target = TargetSpec::Thermal(ThermalSpec::new(self.n.unwrap_or(8), self.temperature.unwrap_or(2.0)));
        }
        match &mut cfg.target {
            TargetSpec::Lptn(s) => {
                if self.temperature.is_some() || self.g.is_some() {
                    return Err(CliError::Usage("--t and --g need --thermal".into()));
                }
                set(&mut s.n, self.n);
                set(&mut s.kappa, self.kappa);
                set(&mut s.kraus, self.kraus);
                set(&mut s.seed, self.state_seed.or(self.seed));
            }
            TargetSpec::Thermal(s) => {
                if self.kappa.is_some() || self.kraus.is_some() || self.state_seed.is_some() {
                    return Err(CliError::Usage("--kappa, --kraus and --state-seed apply to LPTN targets".into()));
                }
                set(&mut s.g, self.g);
            }
        }
        set(&mut cfg.tt_tol, self.tt_tol);
        if let Some(mode) = self.noise {
            cfg.noise.mode = match mode {
                NoiseArg::Exact => NoiseMode::Exact,
                NoiseArg::Gaussian => NoiseMode::Gaussian,
                NoiseArg::Shots => NoiseMode::Shots,
            };
        }
        set(&mut cfg.noise.epsilon, self.eps);
        set(&mut cfg.noise.shots, self.shots);
        set(&mut cfg.cross.max_rank, self.max_rank);
        set(&mut cfg.cross.local_tol, self.local_tol);
        set(&mut cfg.cross.max_sweeps, self.max_sweeps);
        set(&mut cfg.cross.maxvol_tol, self.maxvol_tol);
        set(&mut cfg.cross.pinv_cutoff, self.pinv_cutoff);
        set(&mut cfg.train.learning_rate, self.lr);
        set(&mut cfg.train.batch_size, self.batch_size);
        set(&mut cfg.train.epochs, self.epochs);
        set(&mut cfg.train.patience, self.patience);
        set(&mut cfg.train.seed, self.train_seed);
        if let Some(f) = self.fidelity {
            cfg.fidelity = f.into();
        }
        set(&mut cfg.fidelity_max_n, self.fidelity_max_n);
        set(&mut cfg.n_min, self.n_min);
        set(&mut cfg.n_max, self.n_max);
        set(&mut cfg.seed, self.seed);
        set(&mut cfg.repetitions, self.repetitions);
        if self.out_dir.is_some() {
            cfg.out_dir = self.out_dir.clone();
        }
        if let Some(path) = &self.config {
            cfg = cfg.overlay_file(path)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Runs a parsed command, printing a short summary to stdout.
pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Generate(args) => {
            let cfg = args.to_config()?;
            let g = cmd_generate(&cfg, &cfg.resolved_out_dir())?;
            println!("{}", g.tt_path.display());
            println!("{}", g.meta_path.display());
            Ok(())
        }
        Command::Reconstruct { state, run } => {
            let cfg = run.to_config()?;
            let s = cmd_reconstruct(&cfg, &state, &cfg.resolved_out_dir())?;
            print_summary(&s);
            s.status()
        }
        Command::Sweep(args) => {
            let cfg = args.to_config()?;
            let s = cmd_sweep(&cfg, &cfg.resolved_out_dir())?;
            print_summary(&s);
            s.status()
        }
        Command::Refine { state, recon, record, run } => {
            let cfg = run.to_config()?;
            let r = cmd_refine(&cfg, &state, &recon, &record, &cfg.resolved_out_dir())?;
            let rec = &r.record;
            println!(
                "D {:.4e} -> {:.4e}  F {} -> {}  epochs {} stop {:?}",
                rec.d_before,
                rec.d_after,
                fmt_opt(rec.f_before),
                fmt_opt(rec.f_after),
                rec.epochs,
                rec.stop
            );
            if r.outcome.diverged() {
                return Err(CliError::Numerical("training diverged; the best iterate was kept".into()));
            }
            Ok(())
        }
        Command::Metrics { reference, candidate, record, fidelity } => {
            let report = cmd_metrics(&reference, &candidate, record.as_deref(), fidelity.into())?;
            println!("{}", serde_json::to_string(&report)?);
            Ok(())
        }
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.6}")).unwrap_or_else(|| "-".into())
}

fn print_summary(s: &crate::commands::RunSummary) {
    println!(
        "runs {} mean_D {} nonconverged {} failed {} csv {}",
        s.records.len(),
        s.mean_d().map(|d| format!("{d:.4e}")).unwrap_or_else(|| "-".into()),
        s.nonconverged(),
        s.failures(),
        s.csv.display()
    );
}

#[cfg(test)]
mod tests {
    use ttqst_core::states::LptnSpec;

    use super::*;

    fn parse(args: &[&str]) -> Cli {
        Cli::try_parse_from(std::iter::once("ttqst").chain(args.iter().copied())).unwrap()
    }

    fn run_args(cli: Cli) -> RunArgs {
        match cli.command {
            Command::Generate(a) | Command::Sweep(a) => a,
            Command::Reconstruct { run, .. } | Command::Refine { run, .. } => run,
            Command::Metrics { .. } => panic!("no run args"),
        }
    }

    #[test]
    fn seed_doubles_as_lptn_seed() {
        let cfg = run_args(parse(&["generate", "--lptn", "--n", "8", "--kappa", "4", "--seed", "7"])).to_config().unwrap();
        assert_eq!(cfg.target, TargetSpec::Lptn(LptnSpec::new(8, 4, 7)));
        assert_eq!(cfg.seed, 7);
    }

    #[test]
    fn thermal_flags() {
        let cfg = run_args(parse(&["generate", "--thermal", "--n", "6", "--t", "0.5", "--g", "1.5"])).to_config().unwrap();
        assert_eq!(cfg.target, TargetSpec::Thermal(ThermalSpec { n: 6, g: 1.5, temperature: 0.5 }));
    }

    #[test]
    fn mismatched_target_flags_are_usage_errors() {
        let a = run_args(parse(&["generate", "--thermal", "--kappa", "2"]));
        assert!(matches!(a.to_config(), Err(CliError::Usage(_))));
        let a = run_args(parse(&["generate", "--t", "2"]));
        assert!(matches!(a.to_config(), Err(CliError::Usage(_))));
        assert!(Cli::try_parse_from(["ttqst", "generate", "--lptn", "--thermal"]).is_err());
    }

    #[test]
    fn noise_and_cross_flags() {
        let a = run_args(parse(&["sweep", "--noise", "gaussian", "--eps", "0.02", "--max-rank", "6", "--n-min", "4", "--n-max", "5"]));
        let cfg = a.to_config().unwrap();
        assert_eq!(cfg.noise.mode, NoiseMode::Gaussian);
        assert_eq!(cfg.noise.epsilon, 0.02);
        assert_eq!(cfg.cross.max_rank, 6);
        assert_eq!((cfg.n_min, cfg.n_max), (4, 5));
    }

    #[test]
    fn config_file_overrides_flags() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.toml");
        std::fs::write(&path, "repetitions = 5\n[cross]\nmax_rank = 4\n").unwrap();
        let mut a = run_args(parse(&["sweep", "--max-rank", "8", "--repetitions", "2", "--seed", "3"]));
        a.config = Some(path);
        let cfg = a.to_config().unwrap();
        assert_eq!(cfg.cross.max_rank, 4);
        assert_eq!(cfg.repetitions, 5);
        assert_eq!(cfg.seed, 3);
    }

    #[test]
    fn invalid_values_are_rejected() {
        let a = run_args(parse(&["sweep", "--repetitions", "0"]));
        assert!(matches!(a.to_config(), Err(CliError::Usage(_))));
        let a = run_args(parse(&["sweep", "--noise", "gaussian", "--eps=-1"]));
        assert!(matches!(a.to_config(), Err(CliError::Usage(_))));
    }
}
