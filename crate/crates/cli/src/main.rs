use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use nozzleflow_cli::{run, Command, RunConfig};

#[derive(Parser)]
#[command(name = "nozzleflow", version, about = "Subsonic-sonic nozzle flow experiments")]
struct Args {
    #[command(subcommand)]
    command: Option<Cmd>,
    /// JSON run configuration; defaults apply to missing keys.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Overrides `experiment.seed`.
    #[arg(long, global = true)]
    seed: Option<u64>,
}

#[derive(Subcommand, Clone, Copy)]
enum Cmd {
    Symmetric,
    Solve,
    Verify,
    Perturb,
    HopfGallery,
}

impl From<Cmd> for Command {
    fn from(c: Cmd) -> Self {
        match c {
            Cmd::Symmetric => Command::Symmetric,
            Cmd::Solve => Command::Solve,
            Cmd::Verify => Command::Verify,
            Cmd::Perturb => Command::Perturb,
            Cmd::HopfGallery => Command::HopfGallery,
        }
    }
}

fn main() -> ExitCode {
    let args = Args::parse();
    let config = match &args.config {
        Some(path) => RunConfig::load(path),
        None => Ok(RunConfig::default()),
    };
    let mut config = match config {
        Ok(c) => c,
        Err(e) => {
            eprintln!("{e}");
            return ExitCode::from(e.exit_code() as u8);
        }
    };
    if let Some(seed) = args.seed {
        config.experiment.seed = seed;
    }
    let command = args.command.map(Command::from).unwrap_or(config.experiment.kind);
    let outcome = run(command, &config, &args.out);
    if outcome.code == 0 {
        println!("{}", outcome.message);
    } else {
        eprintln!("{}", outcome.message);
    }
    ExitCode::from(outcome.code as u8)
}
