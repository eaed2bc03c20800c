use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use nearstat::harness::{list_methods, load_config, run_experiment, write_outputs};
use nearstat::Error;

#[derive(Parser)]
#[command(name = "nearstat", version, about = "Run gradient-norm minimization experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every method and seed in a config, writing traces.csv and summary.csv.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Output directory; overrides `output_dir` in the config.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print the method names accepted in configs.
    ListMethods,
    /// Parse and check a config without running it.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
}

fn run(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::ListMethods => {
            for (name, about) in list_methods() {
                println!("{name:<14} {about}");
            }
        }
        Command::Validate { config } => {
            let cfg = load_config(&config)?;
            println!("{}: ok ({} methods, {} seeds)", config.display(), cfg.methods.len(), cfg.seeds.len());
        }
        Command::Run { config, out } => {
            let cfg = load_config(&config)?;
            let dir = out
                .or_else(|| cfg.output_dir.clone())
                .ok_or_else(|| Error::Config("no output directory: pass --out or set output_dir".into()))?;
            let result = run_experiment(&cfg)?;
            let (traces, summary) = write_outputs(&result, &dir)?;
            let last = cfg.budget_passes;
            for row in result.summary.rows.iter().filter(|r| r.passes == last) {
                println!(
                    "{:<20} passes {:>4}  log10 min ‖∇f‖ {:>8.3} ± {:.3}",
                    row.method, row.passes, row.mean_log10, row.std_log10
                );
            }
            println!("wrote {} and {}", traces.display(), summary.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Config(_) | Error::Parse { .. } => ExitCode::from(2),
                _ => ExitCode::FAILURE,
            }
        }
    }
}
