use clap::{Parser, Subcommand};
use splinempc_cli::{
    compare, dimensionality, explain, gen_data, load_config, output_path, pipeline, symreg, train_approx,
    train_monitor, CliResult, GenDataArgs, TrainApproxArgs,
};
use std::path::PathBuf;
use std::process::ExitCode;

/// Legendre-Spline NMPC data generation, learning and explanation pipeline.
#[derive(Parser)]
#[command(name = "splinempc", version)]
struct Cli {
    /// TOML run configuration; defaults apply to missing keys.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate randomized closed-loop scenarios into a dataset.
    GenData {
        #[arg(long)]
        scenarios: Option<usize>,
        #[arg(long)]
        duration: Option<f64>,
        #[arg(long)]
        ts: Option<f64>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train and evaluate an approximate NMPC.
    TrainApprox {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        gamma: Option<f64>,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Compare two eval reports (baseline first).
    Compare {
        #[arg(long)]
        baseline: PathBuf,
        #[arg(long)]
        penalized: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Fit the KPI forest and its worst-case threshold.
    TrainMonitor {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Shapley summaries of one model output.
    Explain {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value = "K2_ms")]
        output: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Symbolic regression of a KPI.
    Symreg {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        target: Option<String>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Coefficient count against sampled points.
    Dimensionality,
    /// Every stage in sequence under one configuration.
    Pipeline {
        #[arg(long)]
        out: PathBuf,
    },
}

fn run(cli: Cli) -> CliResult<()> {
    let mut cfg = load_config(cli.config.as_deref())?;
    match cli.command {
        Command::GenData {
            scenarios,
            duration,
            ts,
            seed,
            out,
        } => {
            let args = GenDataArgs {
                scenarios,
                duration_s: duration,
                step_s: ts,
                seed,
            };
            gen_data(&mut cfg, &args, &output_path(&out)).map(drop)
        }
        Command::TrainApprox {
            data,
            gamma,
            epochs,
            out,
        } => train_approx(&mut cfg, &data, &TrainApproxArgs { gamma, epochs }, &output_path(&out)).map(drop),
        Command::Compare {
            baseline,
            penalized,
            out,
        } => compare(&baseline, &penalized, &output_path(&out)).map(drop),
        Command::TrainMonitor { data, out } => train_monitor(&cfg, &data, &output_path(&out)).map(drop),
        Command::Explain {
            model,
            data,
            output,
            out,
        } => explain(&cfg, &model, &data, &output, &output_path(&out)).map(drop),
        Command::Symreg {
            data,
            target,
            seed,
            out,
        } => symreg(&mut cfg, &data, target.as_deref(), seed, &output_path(&out)).map(drop),
        Command::Dimensionality => {
            dimensionality(&cfg);
            Ok(())
        }
        Command::Pipeline { out } => pipeline(&cfg, &output_path(&out)),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code as u8)
        }
    }
}
