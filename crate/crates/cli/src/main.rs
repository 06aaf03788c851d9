use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use lrp_cli::commands::{self, Overrides};
use lrp_cli::config::Config;
use lrp_cli::CliError;

/// Radar reflector placement optimization and tracking simulation.
#[derive(Parser)]
#[command(name = "lrp", version)]
struct Cli {
    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Optimize reflector placements and write the Pareto front.
    Optimize {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out_dir: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        iterations: Option<usize>,
        /// Swarm size.
        #[arg(long)]
        particles: Option<usize>,
    },
    /// Report objectives, constraints and maps of a placement.
    Evaluate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        placement: PathBuf,
        /// Also write metrics and maps here.
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Simulate tracking along the configured path.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        placement: PathBuf,
        /// Second placement run on the same seeds for a paired report.
        #[arg(long)]
        compare: Option<PathBuf>,
        #[arg(long)]
        out_dir: Option<PathBuf>,
        /// First seed; replaces `[simulation] seed`.
        #[arg(long)]
        seed: Option<u64>,
        /// Filter particle count.
        #[arg(long)]
        particles: Option<usize>,
    },
}

fn run(cli: Cli) -> Result<String, CliError> {
    match cli.command {
        Command::Optimize { config, out_dir, seed, iterations, particles } => {
            let cfg = Config::load(&config)?;
            let out = out_dir.unwrap_or_else(|| commands::default_out_dir(&config, "optimize_out"));
            commands::optimize(&cfg, &out, &Overrides { seed, iterations, particles })
        }
        Command::Evaluate { config, placement, out_dir } => {
            let cfg = Config::load(&config)?;
            commands::evaluate_placement(&cfg, &placement, out_dir.as_deref())
        }
        Command::Simulate { config, placement, compare, out_dir, seed, particles } => {
            let cfg = Config::load(&config)?;
            let out = out_dir.unwrap_or_else(|| commands::default_out_dir(&config, "simulate_out"));
            commands::simulate(&cfg, &placement, compare.as_deref(), &out, &Overrides { seed, iterations: None, particles })
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cli.threads {
        builder = builder.num_threads(n.max(1));
    }
    let pool = match builder.build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("lrp: {e}");
            return ExitCode::from(1);
        }
    };
    match pool.install(|| run(cli)) {
        Ok(text) => {
            print!("{text}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("lrp: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
