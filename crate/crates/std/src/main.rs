use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use distopt::commands;

/// Round-synchronous distributed optimization experiments.
#[derive(Debug, Parser)]
#[command(name = "distopt", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run one algorithm and write its trace, summary and final states.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run every entry of `algorithms` on the same problem and graph.
    Compare {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Rerun the config once per value of a scalar field.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        /// Dotted path such as `algorithm.alpha0`.
        #[arg(long)]
        param: String,
        /// Comma-separated values.
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<String>,
        #[arg(long)]
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run { config, out } => commands::cmd_run(config, out).map(|_| ()),
        Command::Compare { config, out } => commands::cmd_compare(config, out).map(|_| ()),
        Command::Sweep {
            config,
            param,
            values,
            out,
        } => commands::cmd_sweep(config, param, values, out).map(|_| ()),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("distopt: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
