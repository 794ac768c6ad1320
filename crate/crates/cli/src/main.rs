//! `swarm-lattice` command-line driver.
//!
//! Exit codes: 0 success, 1 a failed check, 2 configuration
//! error, 3 numerical failure.

mod commands;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use swarm_lattice::config::ExperimentConfig;
use swarm_lattice::Error;

pub const OUT_ENV: &str = "SWARM_LATTICE_OUT";
const DEFAULT_OUT: &str = "swarm-lattice-out";

#[derive(Parser, Debug)]
#[command(name = "swarm-lattice", version, about = "Swarm-to-lattice simulations and diagnostics")]
struct Cli {
    /// Output root; each command writes into a subdirectory.
    #[arg(long, global = true, env = OUT_ENV)]
    out: Option<PathBuf>,

    /// Worker threads for batch commands (default: available cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Perturb one lattice and integrate it.
    Simulate(Overrides),
    /// Monte-Carlo sweep over the perturbation radius.
    Sweep(Overrides),
    /// Error time series over several trials at one perturbation radius.
    Converge(Overrides),
    /// Jacobian spectra at generated lattices.
    Spectrum(SpectrumArgs),
    /// Check the interaction function requirements.
    Validate(ValidateArgs),
    /// Rigidity and triangularity of a configuration file (`agent,x,y` CSV or JSON).
    Rigidity(RigidityArgs),
}

#[derive(Args, Debug, Default)]
pub struct Overrides {
    /// TOML configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    delta: Option<f64>,
    /// Comma-separated perturbation grid for sweeps.
    #[arg(long, value_delimiter = ',')]
    deltas: Option<Vec<f64>>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long)]
    horizon: Option<f64>,
    #[arg(long)]
    record_every: Option<usize>,
    #[arg(long)]
    r_a: Option<f64>,
    #[arg(long)]
    r_s: Option<f64>,
}

#[derive(Args, Debug)]
struct SpectrumArgs {
    #[command(flatten)]
    common: Overrides,
    /// Comma-separated lattice sizes.
    #[arg(long, value_delimiter = ',')]
    sizes: Option<Vec<usize>>,
    /// Comma-separated lattice seeds.
    #[arg(long, value_delimiter = ',')]
    seeds: Option<Vec<u64>>,
}

#[derive(Args, Debug)]
struct ValidateArgs {
    #[command(flatten)]
    common: Overrides,
    #[arg(long, default_value_t = 1e-3)]
    grid_step: f64,
}

#[derive(Args, Debug)]
struct RigidityArgs {
    positions: PathBuf,
    #[command(flatten)]
    common: Overrides,
}

/// Failure classes, one per non-zero exit code.
#[derive(Debug)]
pub enum Failure {
    Criterion(String),
    Config(String),
    Numerical(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Criterion(_) => 1,
            Failure::Config(_) => 2,
            Failure::Numerical(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Criterion(m) | Failure::Config(m) | Failure::Numerical(m) => m,
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let msg = e.to_string();
        match e {
            Error::Config(_) | Error::InvalidInput(_) | Error::Domain(_) | Error::Csv(_) | Error::Json(_) => {
                Failure::Config(msg)
            }
            Error::Io(_) => Failure::Config(msg),
            Error::CoincidentAgents { .. }
            | Error::Diverged { .. }
            | Error::SingularLink { .. }
            | Error::Numerical(_)
            | Error::Generation { .. } => Failure::Numerical(msg),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Config(format!("i/o error: {e}"))
    }
}

impl Overrides {
    /// Defaults, then the file, then flags.
    pub fn resolve(&self) -> Result<ExperimentConfig, Failure> {
        let mut c = match &self.config {
            Some(path) => ExperimentConfig::load(path)?,
            None => ExperimentConfig::default(),
        };
        let e = &mut c.experiment;
        if let Some(v) = self.n {
            e.n = v;
        }
        if let Some(v) = self.delta {
            e.delta = v;
        }
        if let Some(v) = &self.deltas {
            e.deltas = v.clone();
        }
        if let Some(v) = self.trials {
            e.trials = v;
        }
        if let Some(v) = self.seed {
            e.seed = v;
        }
        let s = &mut c.simulation;
        if let Some(v) = self.dt {
            s.dt = v;
        }
        if let Some(v) = self.horizon {
            s.horizon = v;
        }
        if let Some(v) = self.record_every {
            s.record_every = v;
        }
        if let Some(v) = self.r_a {
            c.geometry.r_a = v;
        }
        if let Some(v) = self.r_s {
            c.geometry.r_s = v;
        }
        c.validate()?;
        Ok(c)
    }
}

fn output_root(flag: &Option<PathBuf>, config: &ExperimentConfig) -> PathBuf {
    flag.clone()
        .or_else(|| config.output.dir.clone())
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT))
}

fn dispatch(cli: &Cli) -> Result<(), Failure> {
    if let Some(jobs) = cli.jobs {
        if jobs == 0 {
            return Err(Failure::Config("--jobs must be >= 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .map_err(|e| Failure::Config(format!("cannot size worker pool: {e}")))?;
    }
    match &cli.command {
        Command::Simulate(o) => {
            let c = o.resolve()?;
            commands::simulate(&c, &output_root(&cli.out, &c).join("simulate"))
        }
        Command::Sweep(o) => {
            let c = o.resolve()?;
            commands::sweep(&c, &output_root(&cli.out, &c).join("sweep"))
        }
        Command::Converge(o) => {
            let c = o.resolve()?;
            commands::converge(&c, &output_root(&cli.out, &c).join("converge"))
        }
        Command::Spectrum(a) => {
            let mut c = a.common.resolve()?;
            if let Some(v) = &a.sizes {
                c.spectrum.sizes = v.clone();
            }
            if let Some(v) = &a.seeds {
                c.spectrum.seeds = v.clone();
            }
            c.validate()?;
            commands::spectrum(&c, &output_root(&cli.out, &c).join("spectrum"))
        }
        Command::Validate(a) => commands::validate(&a.common.resolve()?, a.grid_step),
        Command::Rigidity(a) => commands::rigidity(&a.common.resolve()?, &a.positions),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}
