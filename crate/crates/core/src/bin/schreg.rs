use std::path::PathBuf;

use clap::Parser;
use schreg::cli::{execute, Command};

/// Run a schreg experiment from a JSON config.
#[derive(Parser)]
#[command(name = "schreg", version)]
struct Args {
    command: Command,
    #[arg(long)]
    config: PathBuf,
    /// Worker threads; defaults to one per core.
    #[arg(long, env = "SCHREG_JOBS")]
    jobs: Option<usize>,
    /// Overrides `output_dir` from the config.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() {
    let args = Args::parse();
    std::process::exit(execute(args.command, &args.config, args.jobs, args.out));
}
