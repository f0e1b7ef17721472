use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::config::{NetworkTask, RunConfig};
use crate::error::Result;
use crate::pipeline::{run_pipeline, RunManifest, Stage};

#[derive(Debug, Parser)]
#[command(name = "boundary-lab", version, about = "Emergency-coverage boundary estimation and diffusion experiments")]
pub struct Cli {
    #[command(flatten)]
    pub common: Common,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Common {
    /// TOML or JSON run configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true, env = "BOUNDARY_LAB_SEED")]
    pub seed: Option<u64>,
    /// Base output directory; the run writes into a hash-named subdirectory.
    #[arg(long, global = true, env = "BOUNDARY_LAB_OUT")]
    pub out: Option<PathBuf>,
    /// Incident CSV to analyse instead of simulating.
    #[arg(long, global = true)]
    pub input: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the configured stages, or the comma-separated `--stages` list.
    Run {
        #[arg(long)]
        stages: Option<String>,
    },
    /// Simulate incidents and write them as CSV.
    Simulate,
    /// Exponential decay fit and critical boundary.
    Fit,
    /// Decay fits and difference tests by group.
    Heterogeneity,
    /// Kernel, local polynomial and spline curves against the parametric fit.
    Nonparametric,
    /// Two-by-two difference-in-differences.
    Did,
    /// Event-study coefficients by event-time bin.
    Eventstudy {
        #[arg(long)]
        bin_weeks: Option<u32>,
    },
    /// Bootstrap specification test of the decay model.
    Spectest {
        #[arg(long)]
        resamples: Option<usize>,
    },
    /// Summary statistics, coverage gaps and poor-access profile.
    Report,
    #[command(subcommand)]
    Network(NetworkCommand),
}

#[derive(Debug, Clone, Copy, Subcommand)]
pub enum NetworkCommand {
    /// Steady-state coverage on a street network.
    Solve,
    /// Coverage decay after every station closes.
    Closure,
    /// Linear against exponential distance response.
    Formtest,
    /// Log-log slope of decay rate on diffusion by period.
    Sqrtlaw,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Run { .. } => "run",
            Command::Simulate => "simulate",
            Command::Fit => "fit",
            Command::Heterogeneity => "heterogeneity",
            Command::Nonparametric => "nonparametric",
            Command::Did => "did",
            Command::Eventstudy { .. } => "eventstudy",
            Command::Spectest { .. } => "spectest",
            Command::Report => "report",
            Command::Network(NetworkCommand::Solve) => "network solve",
            Command::Network(NetworkCommand::Closure) => "network closure",
            Command::Network(NetworkCommand::Formtest) => "network formtest",
            Command::Network(NetworkCommand::Sqrtlaw) => "network sqrtlaw",
        }
    }
}

/// Resolves flags over the configuration file and runs the pipeline.
pub fn execute(cli: Cli) -> Result<RunManifest> {
    let mut config = match &cli.common.config {
        Some(p) => RunConfig::from_path(p)?,
        None => RunConfig::default(),
    };
    if let Some(s) = cli.common.seed {
        config.seed = s;
    }
    if let Some(o) = cli.common.out {
        config.out = o;
    }
    if let Some(i) = cli.common.input {
        config.input = Some(i);
    }
    let single = |s: Stage| vec![s];
    config.stages = match &cli.command {
        Command::Run { stages: Some(list) } => Stage::parse_list(list)?,
        Command::Run { stages: None } => config.stages.clone(),
        Command::Simulate => single(Stage::Simulate),
        Command::Fit => single(Stage::Fit),
        Command::Heterogeneity => single(Stage::Heterogeneity),
        Command::Nonparametric => single(Stage::Nonparametric),
        Command::Did => single(Stage::Did),
        Command::Eventstudy { bin_weeks } => {
            if let Some(b) = bin_weeks {
                config.eventstudy.bin_weeks = *b;
            }
            single(Stage::Eventstudy)
        }
        Command::Spectest { resamples } => {
            if let Some(r) = resamples {
                config.spectest.resamples = *r;
            }
            single(Stage::Spectest)
        }
        Command::Report => single(Stage::Report),
        Command::Network(n) => {
            config.network.tasks = vec![match n {
                NetworkCommand::Solve => NetworkTask::Solve,
                NetworkCommand::Closure => NetworkTask::Closure,
                NetworkCommand::Formtest => NetworkTask::Formtest,
                NetworkCommand::Sqrtlaw => NetworkTask::Sqrtlaw,
            }];
            single(Stage::Network)
        }
    };
    run_pipeline(&config, cli.command.name())
}
