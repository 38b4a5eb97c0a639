use std::path::PathBuf;
use std::process::ExitCode;

use clap::{ArgGroup, Parser, Subcommand};

use franson_cnot::cli::{self, Outcome, Sweep, SweepRange, TruthMode};
use franson_cnot::config::{parse_config, ExperimentConfig};
use franson_cnot::Error;

/// Simulator for a post-selected linear-optical CNOT gate.
#[derive(Parser, Debug)]
#[command(name = "franson", version)]
struct Args {
    /// TOML experiment configuration (defaults to the nominal setup)
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides noise.seed
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output file prefix
    #[arg(long, global = true, default_value = "franson")]
    out: String,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Polarization truth table of the gate
    TruthTable {
        /// Exact probabilities (default)
        #[arg(long, conflicts_with = "montecarlo")]
        ideal: bool,
        /// Poisson-counted experiment with the [noise] settings
        #[arg(long)]
        montecarlo: bool,
    },
    /// Post-selected state for the configured superposition input
    Entangle,
    /// Two-photon fringe behind diagonal analyzers
    #[command(group(ArgGroup::new("sweep").required(true).args(["volts", "theta"])))]
    Fringe {
        /// PZT voltage sweep start:stop:step
        #[arg(long, allow_hyphen_values = true)]
        volts: Option<SweepRange>,
        /// Total phase sweep start:stop:step in radians (`pi` suffix allowed)
        #[arg(long, allow_hyphen_values = true)]
        theta: Option<SweepRange>,
        #[arg(long)]
        montecarlo: bool,
    },
    /// Check that cascaded gates keep unwanted branches outside the window
    CascadeCheck,
}

fn load(args: &Args) -> Result<ExperimentConfig, Error> {
    let text = match &args.config {
        Some(p) => std::fs::read_to_string(p).map_err(|e| Error::Config(format!("{}: {e}", p.display())))?,
        None => String::new(),
    };
    let cfg = parse_config(&text)?;
    Ok(match args.seed {
        Some(s) => cfg.with_seed(s),
        None => cfg,
    })
}

fn run(args: &Args) -> Result<Outcome, Error> {
    let cfg = load(args)?;
    for w in &cfg.warnings {
        eprintln!("warning: {w}");
    }
    match &args.command {
        Command::TruthTable { montecarlo, .. } => {
            let mode = if *montecarlo {
                TruthMode::MonteCarlo
            } else {
                TruthMode::Ideal
            };
            cli::cmd_truth_table(&cfg, mode, &args.out)
        }
        Command::Entangle => cli::cmd_entangle(&cfg, &args.out),
        Command::Fringe {
            volts,
            theta,
            montecarlo,
        } => {
            let sweep = match (volts, theta) {
                (Some(v), _) => Sweep::Volts(*v),
                (None, Some(t)) => Sweep::Theta(*t),
                (None, None) => unreachable!("clap requires one sweep"),
            };
            cli::cmd_fringe(&cfg, sweep, *montecarlo, &args.out)
        }
        Command::CascadeCheck => cli::cmd_cascade_check(&cfg),
    }
}

fn main() -> ExitCode {
    let args = match Args::try_parse() {
        Ok(a) => a,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(&args) {
        Ok(out) => {
            print!("{}", out.stdout);
            eprint!("{}", out.stderr);
            ExitCode::from(out.exit_code as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
