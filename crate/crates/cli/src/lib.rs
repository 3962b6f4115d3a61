//! Library side of the `greenmono` binary: config loading, suite runs, reports.

pub mod config;
pub mod run;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use greenmono_core::greens::USource;
use greenmono_core::monotonicity::LevelParameter;
use greenmono_core::{ModelSpec, RadiusGrid};

pub use config::{ConfigError, Format, Origins, Resolved, RunConfig, Suite};
pub use run::{run, RunReport, Status, SuiteStatus};

/// Default output directory when neither `--out` nor the config file sets one.
pub const OUTPUT_ENV: &str = "GREENMONO_OUT";

#[derive(Debug, Parser)]
#[command(name = "greenmono", version, about = "Green's-function monotonicity checks on model manifolds")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Identity checker on sampled points.
    CheckIdentities(Common),
    /// Monotone quantities, their derivative formulas and the V-ODE.
    Monotone(Common),
    /// Umbilicity functional over a radius grid.
    Umbilic(Common),
    /// Tabulated Green's function with harmonicity and nonparabolicity checks.
    GreensProfile(Common),
    /// Every applicable suite.
    All(Common),
    /// The suite named by `--suite` or the config file (default: all).
    Run {
        #[arg(long, value_enum)]
        suite: Option<Suite>,
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Debug, Clone, Default, Args)]
pub struct Common {
    /// TOML config file; flags override its keys.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// e.g. euclidean:3, cone:3:0.9, rotsym:3:0.8:1, product_r3_s1:6.2832
    #[arg(long)]
    pub manifold: Option<ModelSpec>,
    /// greens | analytic_radial | example:<u1|u2|ex1|radial>
    #[arg(long = "u")]
    pub u: Option<USource>,
    /// Comma-separated β list.
    #[arg(long, value_delimiter = ',', num_args = 1)]
    pub betas: Option<Vec<f64>>,
    /// rmin:rmax:ratio
    #[arg(long)]
    pub grid: Option<RadiusGrid>,
    /// Levels of u or of u² for the umbilicity functional.
    #[arg(long, value_parser = parse_level_parameter)]
    pub level_parameter: Option<LevelParameter>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory [default: $GREENMONO_OUT, else ./greenmono-out]
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
}

fn parse_level_parameter(s: &str) -> Result<LevelParameter, String> {
    match s {
        "u" => Ok(LevelParameter::U),
        "u_squared" => Ok(LevelParameter::USquared),
        _ => Err(format!("`{s}`: expected u or u_squared")),
    }
}

impl Command {
    /// The suite, whether it came from `--suite`, and the shared flags.
    fn split(self) -> (Option<Suite>, bool, Common) {
        match self {
            Command::CheckIdentities(c) => (Some(Suite::Identities), false, c),
            Command::Monotone(c) => (Some(Suite::Monotone), false, c),
            Command::Umbilic(c) => (Some(Suite::Umbilic), false, c),
            Command::GreensProfile(c) => (Some(Suite::GreensProfile), false, c),
            Command::All(c) => (Some(Suite::All), false, c),
            Command::Run { suite, common } => (suite, suite.is_some(), common),
        }
    }
}

impl Common {
    fn flags(&self, suite: Option<Suite>) -> RunConfig {
        RunConfig {
            manifold: self.manifold.clone(),
            u_source: self.u,
            suite,
            betas: self.betas.clone(),
            radius_grid: self.grid,
            level_parameter: self.level_parameter,
            seed: self.seed,
            output: self.out.clone(),
            format: self.format,
        }
    }
}

/// Merges the config file, the flags and the environment into a validated run.
pub fn resolve_cli(cli: Cli) -> Result<Resolved, ConfigError> {
    let (suite, suite_flag, common) = cli.command.split();
    let (file, base) = match &common.config {
        Some(path) => {
            let (src, cfg) = config::Source::read(path)?;
            (Some(src), cfg)
        }
        None => (None, RunConfig::default()),
    };
    let flags = common.flags(suite);
    let merged = base.overlay(&flags);
    let origins = Origins::new(file, &RunConfig { suite: suite.filter(|_| suite_flag), ..flags });
    let env_out = std::env::var_os(OUTPUT_ENV).filter(|v| !v.is_empty()).map(PathBuf::from);
    config::resolve(&merged, &origins, env_out)
}

/// Exit status: 0 all checks pass, 1 a check failed or a suite errored, 2 config or IO error.
pub fn execute(cli: Cli) -> u8 {
    let resolved = match resolve_cli(cli) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("{e}");
            return 2;
        }
    };
    match run(&resolved) {
        Ok(report) => {
            for s in &report.suites {
                println!("{} {}: {}", s.suite, s.status.label(), s.detail);
            }
            println!(
                "{} -> {}",
                if report.pass { "all checks pass" } else { "checks failed" },
                resolved.output.display()
            );
            report.exit_code()
        }
        Err(e) => {
            eprintln!("io error: {e}");
            2
        }
    }
}
