use std::path::PathBuf;
use std::process::ExitCode;

use cavtool::cli::{run, Command};
use clap::{Parser, ValueEnum};

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Sub {
    Stack,
    Dispersion,
    Fit,
    Report,
    BetaScan,
    Synth,
}

/// Membrane microcavity modelling and analysis.
#[derive(Debug, Parser)]
#[command(name = "cavtool", version)]
struct Args {
    #[arg(value_enum)]
    command: Sub,
    /// JSON config; relative paths inside it resolve against its directory.
    #[arg(long)]
    config: PathBuf,
    /// Output directory (created if missing).
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
}

fn main() -> ExitCode {
    let args = match Args::try_parse() {
        Ok(a) => a,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    if let Some(n) = std::env::var("CAVTOOL_THREADS").ok().and_then(|v| v.parse::<usize>().ok()) {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global();
    }
    let command = match args.command {
        Sub::Stack => Command::Stack,
        Sub::Dispersion => Command::Dispersion,
        Sub::Fit => Command::Fit,
        Sub::Report => Command::Report,
        Sub::BetaScan => Command::BetaScan,
        Sub::Synth => Command::Synth,
    };
    match run(command, &args.config, &args.out, args.seed) {
        Ok(files) => {
            for f in files {
                println!("{}", f.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("cavtool {}: {e}", command.name());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
