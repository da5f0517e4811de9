#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

mod config;
mod output;
mod run;

use config::{ModeFlag, SchemaError};
use run::{Command, Flags};

/// Boundary observation and initial-data reconstruction for 1-D
/// quasilinear wave equations.
#[derive(Debug, Parser)]
#[command(name = "waveobs", version)]
struct Cli {
    command: Command,
    /// JSON run configuration, or a manifest for `replay`.
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    mode: Option<ModeFlag>,
    /// Output directory; overrides the configuration.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Seed for random-data studies; overrides the configuration.
    #[arg(long)]
    seed: Option<u64>,
    /// With `obstime`, classify a grid of initial times.
    #[arg(long)]
    classify: bool,
}

const EXIT_VALIDATION: u8 = 2;
const EXIT_PIPELINE: u8 = 3;

fn exit_code(e: &anyhow::Error) -> u8 {
    if e.downcast_ref::<SchemaError>().is_some() {
        return EXIT_VALIDATION;
    }
    match e.downcast_ref::<waveobs_core::Error>() {
        Some(core) if core.is_validation() => EXIT_VALIDATION,
        _ => EXIT_PIPELINE,
    }
}

fn describe(e: &anyhow::Error) -> String {
    match e.downcast_ref::<waveobs_core::Error>() {
        Some(core) => format!("[{}] {e:#}", core.module()),
        None => format!("{e:#}"),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let flags = Flags {
        config: cli.config,
        mode: cli.mode,
        out: cli.out,
        seed: cli.seed,
        classify: cli.classify,
    };
    match run::run(cli.command, &flags) {
        Ok(manifest) => {
            println!("{}", manifest.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("waveobs: error {}", describe(&e));
            ExitCode::from(exit_code(&e))
        }
    }
}
