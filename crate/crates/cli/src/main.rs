use std::io;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use trajfrac::scaling::{DEFAULT_MIN_L, DEFAULT_Q0};
use trajfrac_cli::analytic::{AnalyticParams, Model};
use trajfrac_cli::{cmd_analytic, cmd_fit, cmd_simulate, resolve_workers, SimulateOptions};

/// Monitored single-particle dynamics: ensembles, closed forms and fits.
#[derive(Parser)]
#[command(name = "trajfrac", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
#[value(rename_all = "snake_case")]
enum ModelArg {
    SingleShot,
    Resetting,
}

#[derive(Subcommand)]
enum Command {
    /// Run the ensemble described by a TOML config.
    Simulate {
        config: PathBuf,
        /// Also record statistics at logarithmically spaced times.
        #[arg(long)]
        time_series: bool,
        /// Worker threads (default: $TRAJFRAC_WORKERS, else all cores).
        #[arg(long)]
        workers: Option<usize>,
        /// Output directory, overriding the config.
        #[arg(long, short)]
        output: Option<PathBuf>,
    },
    /// Tabulate closed-form results over a q grid.
    Analytic {
        model: ModelArg,
        /// Lattice length (resetting: the scale L with lambda = 1/L).
        #[arg(long = "L", alias = "l")]
        len: usize,
        #[arg(long, default_value_t = 0.25)]
        q_min: f64,
        #[arg(long, default_value_t = 4.0)]
        q_max: f64,
        #[arg(long, default_value_t = 0.25)]
        q_step: f64,
        /// Measured sites (single-shot).
        #[arg(long, default_value_t = 1)]
        r: usize,
        /// Measurement error rate (single-shot, one site).
        #[arg(long)]
        e: Option<f64>,
        /// Also write the table as CSV.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Recompute the exponent table from a stats.csv.
    Fit {
        stats: PathBuf,
        #[arg(long = "min-L", alias = "min-l", default_value_t = DEFAULT_MIN_L)]
        min_l: f64,
        #[arg(long, default_value_t = DEFAULT_Q0)]
        q0: f64,
        /// Output file (default: standard output).
        #[arg(long, short)]
        output: Option<PathBuf>,
    },
}

fn dispatch(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Simulate {
            config,
            time_series,
            workers,
            output,
        } => {
            let options = SimulateOptions {
                run: resolve_workers(workers)?,
                time_series,
                output_dir: output,
            };
            let dir = cmd_simulate(&config, &options)?;
            eprintln!("results written to {}", dir.display());
        }
        Command::Analytic {
            model,
            len,
            q_min,
            q_max,
            q_step,
            r,
            e,
            csv,
        } => {
            let params = AnalyticParams {
                model: match model {
                    ModelArg::SingleShot => Model::SingleShot,
                    ModelArg::Resetting => Model::Resetting,
                },
                len,
                q_min,
                q_max,
                q_step,
                measured: r,
                error_rate: e,
            };
            cmd_analytic(&params, csv.as_deref(), io::stdout().lock())?;
        }
        Command::Fit {
            stats,
            min_l,
            q0,
            output,
        } => match output {
            Some(path) => {
                let file = std::fs::File::create(&path)?;
                cmd_fit(&stats, min_l, q0, io::BufWriter::new(file))?;
            }
            None => {
                cmd_fit(&stats, min_l, q0, io::stdout().lock())?;
            }
        },
    }
    Ok(())
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
