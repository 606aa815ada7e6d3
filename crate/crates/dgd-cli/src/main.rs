use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use dgd_cli::config::{ConfigError, RunConfig};
use dgd_cli::runner::{self, HarnessError};
use dgd_cli::scenario;

#[derive(Parser)]
#[command(
    name = "dgd",
    version,
    about = "Decentralized gradient descent experiment runner",
    after_help = "Canned scenarios: example21, fig1, fig2, fig3, fig4, bp-desk.\n\
                  Exit codes: 0 success, 2 config error, 3 bound violation in audit mode,\n\
                  4 every stepsize diverged, 1 other failures."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a stepsize sweep and write trace CSVs plus bound JSONs
    Run {
        /// TOML config file
        #[arg(long)]
        config: Option<PathBuf>,
        /// Canned scenario name (takes precedence over --config)
        #[arg(long)]
        scenario: Option<String>,
        /// Exit nonzero if any audited bound is violated
        #[arg(long)]
        audit: bool,
        /// Output directory (overrides the config)
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print the mixing spectrum and the stepsize ceiling
    Spectrum {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        scenario: Option<String>,
    },
    /// Precompute and cache the oracle ground truth
    Oracle {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        scenario: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Resolves the effective config and a label for output file names.
fn resolve_config(
    config: Option<&PathBuf>,
    scenario_name: Option<&str>,
) -> Result<(RunConfig, String), HarnessError> {
    if let Some(name) = scenario_name {
        let cfg = scenario::canned(name).ok_or_else(|| {
            ConfigError::Parse(format!(
                "unknown scenario {name:?}; available: {}",
                scenario::SCENARIO_NAMES.join(", ")
            ))
        })?;
        return Ok((cfg, name.to_string()));
    }
    if let Some(path) = config {
        let cfg = RunConfig::load(path)?;
        let label = path
            .file_stem()
            .map_or_else(|| "run".to_string(), |s| s.to_string_lossy().into_owned());
        return Ok((cfg, label));
    }
    Err(ConfigError::Parse("provide --config <path> or --scenario <name>".into()).into())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match run(cli) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err}");
            err.exit_code()
        }
    };
    ExitCode::from(code as u8)
}

fn run(cli: Cli) -> Result<i32, HarnessError> {
    match cli.command {
        Command::Run { config, scenario, audit, out } => {
            let (cfg, label) = resolve_config(config.as_ref(), scenario.as_deref())?;
            let report = runner::run_scenario(&cfg, &label, audit, out.as_deref())?;
            Ok(report.exit_code(audit))
        }
        Command::Spectrum { config, scenario } => {
            let (cfg, _) = resolve_config(config.as_ref(), scenario.as_deref())?;
            print!("{}", runner::spectrum(&cfg)?);
            Ok(0)
        }
        Command::Oracle { config, scenario, out } => {
            let (cfg, _) = resolve_config(config.as_ref(), scenario.as_deref())?;
            print!("{}", runner::precompute_oracle(&cfg, out.as_deref())?);
            Ok(0)
        }
    }
}
