mod analyze;
mod failure;
mod input;
mod output;
mod plotdata;
mod simulate;
mod verify;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

/// Multi-agent model-collapse simulator and trace analyzer.
#[derive(Debug, Parser)]
#[command(name = "collapse-sim", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the GMM network once per seed and write trajectories.
    Simulate(SimulateArgs),
    /// Compute norms and CMDS scatters from an embedding trace.
    Analyze(AnalyzeArgs),
    /// Check simulated weight gaps against the predicted contraction.
    Verify(VerifyArgs),
    /// Turn trajectories or an analysis directory into tidy CSVs for plotting.
    Plotdata(PlotdataArgs),
}

#[derive(Debug, Args)]
struct SeedArgs {
    /// Comma-separated seeds; `a-b` expands to an inclusive range.
    #[arg(long, env = "COLLAPSE_SIM_SEED")]
    seeds: Option<String>,
}

#[derive(Debug, Args)]
struct OutArgs {
    #[arg(long)]
    out: PathBuf,
    /// Write into a non-empty output directory.
    #[arg(long)]
    force: bool,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    /// JSON or TOML config file.
    #[arg(long)]
    config: PathBuf,
    #[command(flatten)]
    seeds: SeedArgs,
    #[command(flatten)]
    out: OutArgs,
    #[arg(long, default_value_t = 1)]
    jobs: usize,
}

#[derive(Debug, Args)]
struct AnalyzeArgs {
    /// JSONL trace file.
    trace: PathBuf,
    /// Steps to project with CMDS (default: 1 and T).
    #[arg(long)]
    t_list: Option<String>,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Debug, Args)]
struct VerifyArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long, default_value_t = 100)]
    replicates: usize,
    #[arg(long, default_value_t = 0.02)]
    tolerance: f64,
    /// Checkpoints (default: 1,2,5,10,20 up to T).
    #[arg(long)]
    t_list: Option<String>,
    #[command(flatten)]
    seeds: SeedArgs,
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    /// Also write the report as JSON into this directory.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    force: bool,
}

#[derive(Debug, Args)]
struct PlotdataArgs {
    /// Directory written by `simulate` or `analyze`.
    input: PathBuf,
    /// Steps for density curves and scatters.
    #[arg(long)]
    t_list: Option<String>,
    /// Half-width of uniform jitter added to scatter coordinates.
    #[arg(long, default_value_t = 0.0)]
    jitter: f64,
    #[command(flatten)]
    seeds: SeedArgs,
    #[command(flatten)]
    out: OutArgs,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate(a) => simulate::run(a),
        Command::Analyze(a) => analyze::run(a),
        Command::Verify(a) => verify::run(a),
        Command::Plotdata(a) => plotdata::run(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            f.report();
            ExitCode::from(f.code())
        }
    }
}
