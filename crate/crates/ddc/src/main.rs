use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use ddc::experiments::{self, ExperimentConfig};
use ddc_core::{DdcError, Result};

#[derive(Parser)]
#[command(
    name = "ddc",
    version,
    about = "Data-driven controller synthesis, stealthy sensor attacks, and detection"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a packaged experiment end to end
    Run {
        #[command(subcommand)]
        scenario: RunScenario,
    },
    /// Scan a parameter range
    Sweep {
        #[command(subcommand)]
        target: SweepTarget,
    },
    /// Structural probes of generated data
    Probe {
        #[command(subcommand)]
        target: ProbeTarget,
    },
    /// Run the stealth detector on a saved dataset
    Detect {
        /// Dataset path: the .ddc.csv file or its base name
        file: PathBuf,
        /// Detector threshold
        #[arg(long, default_value_t = 1.0)]
        gamma: f64,
    },
}

#[derive(Subcommand)]
enum RunScenario {
    /// Forged-record attack: certify a chosen gain from faked measurements
    Example1(RunOpts),
    /// Alternating stealthy attack on the H2 synthesis pipeline
    Example2(RunOpts),
}

#[derive(Subcommand)]
enum SweepTarget {
    /// Stealth scale of the forged-record attack
    Kappa(RunOpts),
}

#[derive(Subcommand)]
enum ProbeTarget {
    /// Constant-bias rank condition and its failure modes
    Bias(RunOpts),
}

#[derive(Args)]
struct RunOpts {
    /// Detector threshold
    #[arg(long)]
    gamma: Option<f64>,
    /// Forgery scale in (0, 1]; defaults to the closed-form stealthy value
    #[arg(long)]
    kappa: Option<f64>,
    /// Alternating-attack iteration budget
    #[arg(long)]
    nmax: Option<usize>,
    /// Input generation seed
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory for CSV, SVG, and report files
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

impl RunOpts {
    fn apply(&self, mut cfg: ExperimentConfig) -> ExperimentConfig {
        if let Some(gamma) = self.gamma {
            cfg.gamma = gamma;
        }
        if self.kappa.is_some() {
            cfg.kappa = self.kappa;
        }
        if let Some(n_max) = self.nmax {
            cfg.n_max = n_max;
        }
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        cfg
    }
}

fn dispatch(cli: Cli) -> Result<String> {
    match cli.command {
        Command::Run {
            scenario: RunScenario::Example1(opts),
        } => {
            let cfg = opts.apply(ExperimentConfig::example1(opts.out.clone()));
            to_json(&experiments::run_example1(&cfg)?)
        }
        Command::Run {
            scenario: RunScenario::Example2(opts),
        } => {
            let cfg = opts.apply(ExperimentConfig::example2(opts.out.clone()));
            to_json(&experiments::run_example2(&cfg)?)
        }
        Command::Sweep {
            target: SweepTarget::Kappa(opts),
        } => {
            let cfg = opts.apply(ExperimentConfig::kappa_sweep(opts.out.clone()));
            to_json(&experiments::sweep_kappa(&cfg)?)
        }
        Command::Probe {
            target: ProbeTarget::Bias(opts),
        } => {
            let cfg = opts.apply(ExperimentConfig::bias_probe(opts.out.clone()));
            to_json(&experiments::probe_bias(&cfg)?)
        }
        Command::Detect { file, gamma } => to_json(&experiments::detect_file(&file, gamma)?),
    }
}

fn to_json<T: serde::Serialize>(report: &T) -> Result<String> {
    serde_json::to_string_pretty(report)
        .map_err(|e| DdcError::SolverFailure(format!("report serialization failed: {e}")))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(json) => {
            println!("{json}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
