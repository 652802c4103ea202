use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

mod commands;
mod error;

#[derive(Parser)]
#[command(name = "udgnn", version, about = "Deep GNN laboratory: data generation, training, depth sweeps, theorem checks and plots")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic dataset file from a spec.
    Gen(GenArgs),
    /// Train one model and write report.json, metrics.csv and diagnostics.csv.
    Train(TrainArgs),
    /// Train every (variant, depth, repeat) cell and write sweep.csv.
    Sweep(SweepArgs),
    /// Check a path-decomposition oracle against the model on random instances.
    Verify(VerifyArgs),
    /// Render a CSV as an SVG line chart.
    Plot(PlotArgs),
}

#[derive(Args)]
struct GenArgs {
    #[arg(long)]
    spec: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
pub struct TrainArgs {
    /// Dataset file.
    #[arg(long, conflicts_with = "spec", required_unless_present = "spec")]
    data: Option<PathBuf>,
    /// Synthetic spec to generate the dataset from instead of --data.
    #[arg(long)]
    spec: Option<PathBuf>,
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    train: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Diagnostics snapshot interval in epochs.
    #[arg(long, default_value_t = 10)]
    log_every: usize,
}

#[derive(Args)]
pub struct SweepArgs {
    #[arg(long)]
    data: PathBuf,
    /// Comma-separated variant names.
    #[arg(long, value_delimiter = ',')]
    variants: Vec<String>,
    #[arg(long, value_delimiter = ',')]
    depths: Vec<usize>,
    #[arg(long, default_value_t = 1)]
    repeats: usize,
    #[arg(long)]
    out: PathBuf,
    /// Comma-separated convolution kinds.
    #[arg(long, value_delimiter = ',', default_value = "gcn")]
    convs: Vec<String>,
    /// Model spec whose width, gates, dropout and propagation every cell uses.
    #[arg(long)]
    model: Option<PathBuf>,
    #[arg(long)]
    train: Option<PathBuf>,
}

#[derive(Args)]
pub struct VerifyArgs {
    #[arg(long, value_parser = clap::value_parser!(u32).range(1..=2))]
    theorem: u32,
    #[arg(long, default_value_t = 100)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, hide = true)]
    inject_fault: bool,
}

#[derive(Args)]
pub struct PlotArgs {
    #[arg(long)]
    csv: PathBuf,
    #[arg(long, default_value = "depth")]
    x: String,
    #[arg(long, default_value = "test_acc")]
    y: String,
    #[arg(long, default_value = "variant")]
    group: String,
    #[arg(long)]
    out: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Gen(a) => commands::gen(&a.spec, &a.out),
        Command::Train(a) => commands::train(&a),
        Command::Sweep(a) => commands::sweep(&a),
        Command::Verify(a) => commands::verify(&a),
        Command::Plot(a) => commands::plot(&a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
