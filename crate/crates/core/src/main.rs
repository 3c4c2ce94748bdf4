use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use fracsym::cli::{run, Command, RunConfig};

#[derive(Parser, Debug)]
#[command(name = "fracsym", version, about = "Fractional torsion solver and symmetry/stability checks")]
struct Args {
    /// solve, verify, stability, counterexample or geometry
    command: Command,
    /// JSON run file
    #[arg(long)]
    config: PathBuf,
    /// Worker threads; results do not depend on it
    #[arg(long)]
    workers: Option<usize>,
    /// Validate and print the resolved configuration, then exit
    #[arg(long)]
    dry_run: bool,
}

fn main() -> ExitCode {
    let args = Args::parse();
    let cfg = match RunConfig::load(&args.config) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("{}: {e}", args.config.display());
            return ExitCode::from(2);
        }
    };
    if let Err(e) = cfg.validate(args.command) {
        eprintln!("{}: {e}", args.config.display());
        return ExitCode::from(2);
    }
    if args.dry_run {
        let resolved = cfg.resolved(args.command);
        println!("{}", serde_json::to_string_pretty(&resolved).expect("config serializes"));
        return ExitCode::SUCCESS;
    }
    match run(args.command, &cfg, args.workers) {
        Ok(outcome) => {
            for c in &outcome.checks {
                eprintln!("{:?}: {}", c.status, c.name);
            }
            if outcome.success() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
