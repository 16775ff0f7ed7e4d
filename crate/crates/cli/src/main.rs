use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use coedit_cli::config::{example, StudyConfig};
use coedit_cli::synth::{generate, SynthSpec};
use coedit_cli::{census_from_usage, Pipeline, PipelineError, EXIT_CONFIG, EXIT_TOTAL_FAILURE};
use coedit_core::actions::{format_share, BotCatalog};

#[derive(Parser)]
#[command(name = "coedit", version, about = "Co-editing network study pipeline")]
struct Cli {
    /// More log output (repeat for debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args)]
struct ConfigArg {
    /// Study configuration file.
    #[arg(short, long, default_value = "study.toml")]
    config: PathBuf,
}

#[derive(Subcommand)]
enum Cmd {
    /// Extract event logs from every listed repository.
    Mine(ConfigArg),
    /// Date bot adoptions and take the actions census.
    Detect(ConfigArg),
    /// Actions census, from a config or a standalone `repo,action` table.
    Census {
        #[arg(short, long, conflicts_with = "usage")]
        config: Option<PathBuf>,
        #[arg(long, requires = "out")]
        usage: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Bot catalog for the category totals; built-in list if omitted.
        #[arg(long)]
        catalog: Option<PathBuf>,
    },
    /// Whole-history networks and metrics.
    Metrics(ConfigArg),
    /// Selection, matching and hypothesis tests.
    Study(ConfigArg),
    /// Markdown summary and plot data.
    Report(ConfigArg),
    /// Every stage in order.
    Run(ConfigArg),
    /// Configuration helpers.
    Config {
        /// Print a documented configuration with all defaults.
        #[arg(long)]
        example: bool,
    },
    /// Generate a synthetic corpus with a planted effect.
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = 8)]
        treated: usize,
        #[arg(long, default_value_t = 4)]
        controls: usize,
        /// Generate without the planted effect.
        #[arg(long)]
        no_effect: bool,
    },
}

fn pipeline(arg: &ConfigArg) -> Result<Pipeline, PipelineError> {
    Pipeline::new(StudyConfig::load(&arg.config)?)
}

fn run_stage(arg: &ConfigArg, f: impl FnOnce(&mut Pipeline) -> Result<(), PipelineError>) -> Result<(), PipelineError> {
    let mut p = pipeline(arg)?;
    let result = f(&mut p);
    for o in p.outcomes() {
        let status = match o.status {
            coedit_cli::StageStatus::Computed => "computed",
            coedit_cli::StageStatus::Cached => "cached",
        };
        println!("{:<8} {status:<9} {}", o.stage, o.detail);
    }
    result
}

fn census_cmd(config: Option<PathBuf>, usage: Option<PathBuf>, out: Option<PathBuf>, catalog: Option<PathBuf>) -> Result<(), PipelineError> {
    match (config, usage, out) {
        (_, Some(usage), Some(out)) => {
            let catalog = match catalog {
                Some(p) => {
                    let text = std::fs::read_to_string(&p).map_err(|e| PipelineError::Config(format!("{}: {e}", p.display())))?;
                    BotCatalog::parse(&text).map_err(|e| PipelineError::Config(format!("{}: {e}", p.display())))?
                }
                None => BotCatalog::default(),
            };
            let c = census_from_usage(&usage, &out, &catalog)?;
            println!(
                "{} repositories, {} using actions ({}%), distinct actions min {:?} median {:?} max {:?}",
                c.total_repos,
                c.repos_with_actions,
                format_share(c.share_with_actions_pct),
                c.min_actions,
                c.median_actions,
                c.max_actions
            );
            for r in c.top(10) {
                println!("  {:<40} {:>8} {:>6}%", r.action, r.count, format_share(r.share_pct));
            }
            Ok(())
        }
        (config, None, _) => run_stage(&ConfigArg { config: config.unwrap_or_else(|| "study.toml".into()) }, |p| p.detect()),
        _ => Err(PipelineError::Config("census needs --config, or --usage with --out".into())),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();

    let result: anyhow::Result<()> = match cli.cmd {
        Cmd::Mine(a) => run_stage(&a, |p| p.mine()).map_err(Into::into),
        Cmd::Detect(a) => run_stage(&a, |p| p.detect()).map_err(Into::into),
        Cmd::Census { config, usage, out, catalog } => census_cmd(config, usage, out, catalog).map_err(Into::into),
        Cmd::Metrics(a) => run_stage(&a, |p| p.metrics()).map_err(Into::into),
        Cmd::Study(a) => run_stage(&a, |p| p.study()).map_err(Into::into),
        Cmd::Report(a) => run_stage(&a, |p| p.report()).map_err(Into::into),
        Cmd::Run(a) => run_stage(&a, |p| p.run_all()).map_err(Into::into),
        Cmd::Config { example: true } => {
            print!("{}", example());
            Ok(())
        }
        Cmd::Config { example: false } => Err(PipelineError::Config("nothing to do; try `config --example`".into()).into()),
        Cmd::Synth { out, seed, treated, controls, no_effect } => {
            let spec = SynthSpec { seed, treated, controls, effect: !no_effect, ..SynthSpec::default() };
            generate(&out, &spec)
                .with_context(|| format!("writing synthetic corpus to {}", out.display()))
                .map(|c| println!("wrote {} repositories; config at {}", c.repos.len(), c.config.display()))
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            let code = e.downcast_ref::<PipelineError>().map_or(EXIT_TOTAL_FAILURE, PipelineError::exit_code);
            debug_assert!(code == EXIT_CONFIG || code == EXIT_TOTAL_FAILURE);
            ExitCode::from(code as u8)
        }
    }
}
