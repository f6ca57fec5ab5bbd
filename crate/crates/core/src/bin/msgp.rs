use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use msgp::harness::{run, CirculantName, ExperimentConfig, OutputFormat, Overrides};
use msgp::MsgpError;

#[derive(Parser)]
#[command(name = "msgp", version, about = "Structured GP experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a TOML config.
    Run(RunArgs),
}

#[derive(clap::Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    /// Training set size(s), comma separated.
    #[arg(long, value_delimiter = ',')]
    n: Option<Vec<usize>>,
    /// Grid size(s) per dimension, comma separated.
    #[arg(long, value_delimiter = ',')]
    m: Option<Vec<usize>>,
    /// Probe count for the variance estimator.
    #[arg(long)]
    ns: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// whittle, strang, tchan or tyrtyshnikov.
    #[arg(long, value_parser = |s: &str| s.parse::<CirculantName>())]
    circulant: Option<CirculantName>,
    #[arg(long)]
    whittle_window: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// csv or json.
    #[arg(long, value_parser = |s: &str| s.parse::<OutputFormat>())]
    format: Option<OutputFormat>,
}

fn configure(args: &RunArgs) -> msgp::Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::load(&args.config)?;
    cfg.apply(&Overrides {
        n: args.n.clone(),
        m: args.m.clone(),
        n_s: args.ns,
        seed: args.seed,
        circulant: args.circulant,
        whittle_window: args.whittle_window,
        out: args.out.clone(),
        format: args.format,
    })?;
    cfg.validate()?;
    Ok(cfg)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let Command::Run(args) = Cli::parse().command;
    let cfg = match configure(&args) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("config error: {e}");
            return ExitCode::from(2);
        }
    };
    match run(&cfg) {
        Ok(report) => {
            log::info!("{} rows", report.rows.len());
            ExitCode::SUCCESS
        }
        Err(MsgpError::Config(e)) => {
            eprintln!("config error: {e}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
