use std::net::SocketAddr;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use frisson_core::FeedbackDesign;

mod commands;

#[derive(Debug, Parser)]
#[command(name = "frisson", version, about = "Detect, aggregate and replay viewer frissons from EDA recordings")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Align one recorded session to video time and write its frisson series.
    Process(ProcessArgs),
    /// Average the frisson series of one video into an aggregate file.
    Aggregate(AggregateArgs),
    /// Generate synthetic viewer sessions with known event times.
    Simulate(SimulateArgs),
    /// Score detected event times against ground truth.
    Eval(EvalArgs),
    /// Export a feedback keyframe track from an aggregate.
    Keyframes(KeyframesArgs),
    /// Run the ingestion and feedback server.
    Serve(ServeArgs),
}

#[derive(Debug, Args)]
struct ProcessArgs {
    /// Session directory (meta.json, eda.csv, events.jsonl).
    #[arg(long, value_name = "DIR")]
    session: PathBuf,
    /// Output frisson series file.
    #[arg(long, value_name = "FILE")]
    out: PathBuf,
    /// TOML file overriding pipeline defaults.
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Also write detected peak times (video seconds, one per line).
    #[arg(long, value_name = "FILE")]
    peaks: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct AggregateArgs {
    /// Video id; only frisson files for this video are used.
    #[arg(long, value_name = "ID")]
    video: String,
    /// Directory of frisson series files (*.json).
    #[arg(long, value_name = "DIR")]
    inputs: PathBuf,
    /// Output aggregate file.
    #[arg(long, value_name = "FILE")]
    out: PathBuf,
    /// Also write `t_s,a` rows for plotting.
    #[arg(long, value_name = "FILE")]
    dump_csv: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    /// Video length in seconds.
    #[arg(long, value_name = "S")]
    duration: f64,
    #[arg(long, value_name = "N")]
    participants: usize,
    /// SCR events per participant.
    #[arg(long, value_name = "K")]
    events: usize,
    #[arg(long, value_name = "SEED")]
    seed: u64,
    /// Output directory; one session directory per participant.
    #[arg(long, value_name = "DIR")]
    out: PathBuf,
    /// Noise standard deviation as a fraction of the SCR amplitude.
    #[arg(long, value_name = "FRAC", default_value_t = 0.02)]
    noise: f64,
    /// Drift amplitude as a fraction of the SCR amplitude.
    #[arg(long, value_name = "FRAC", default_value_t = 0.5)]
    drift: f64,
    /// Minimum gap between events in seconds.
    #[arg(long, value_name = "S", default_value_t = 20.0)]
    min_gap: f64,
    #[arg(long, value_name = "ID", default_value = "sim")]
    video: String,
}

#[derive(Debug, Args)]
struct EvalArgs {
    /// Detected times, one per line.
    #[arg(long, value_name = "FILE")]
    detected: PathBuf,
    /// Ground-truth times, one per line.
    #[arg(long, value_name = "FILE")]
    truth: PathBuf,
    /// Match tolerance in seconds.
    #[arg(long, value_name = "S", default_value_t = 2.5)]
    tol: f64,
}

#[derive(Debug, Args)]
struct KeyframesArgs {
    #[arg(long, value_name = "FILE")]
    aggregate: PathBuf,
    /// ambient_light, icon or vibration.
    #[arg(long, value_name = "NAME")]
    design: FeedbackDesign,
    #[arg(long, value_name = "FILE")]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct ServeArgs {
    #[arg(long, value_name = "ADDR", default_value = "127.0.0.1:7878")]
    listen: SocketAddr,
    /// Data directory.
    #[arg(long, value_name = "DIR", env = frisson_core::server::DATA_DIR_ENV, default_value = "data")]
    data: PathBuf,
    /// TOML file overriding pipeline defaults.
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Tick vibration feedback to every viewer that presses play.
    #[arg(long)]
    feedback: bool,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match commands::run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
