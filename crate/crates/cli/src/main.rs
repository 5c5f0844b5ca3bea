mod commands;
mod input;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

/// Exit status for a run that raised an alarm.
pub const EXIT_ALARM: u8 = 2;
/// Exit status when the training sample fails the stationarity test.
pub const EXIT_NONSTATIONARY: u8 = 3;

#[derive(Parser)]
#[command(name = "covshift", version, about = "Online detection of covariance changes in high-dimensional streams")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Threshold that gives a target average run length.
    Calibrate {
        #[arg(long)]
        arl: f64,
        #[arg(long)]
        window: usize,
    },
    /// Fit a training summary from a CSV sample.
    Train(TrainArgs),
    /// Run the detector over a CSV file or JSON lines on stdin.
    Monitor(MonitorArgs),
    /// Locate the change point in a CSV segment.
    Localize {
        #[arg(long)]
        summary: PathBuf,
        #[arg(long)]
        csv: PathBuf,
        /// Standardized peak below which the estimate is flagged.
        #[arg(long, default_value_t = 3.0)]
        cutoff: f64,
    },
    /// Run a simulation scenario and compare with theory.
    Simulate {
        #[arg(long)]
        scenario: PathBuf,
        /// Overrides the scenario's replicate count.
        #[arg(long)]
        replicates: Option<usize>,
        #[arg(long, env = "COVSHIFT_SEED")]
        seed: Option<u64>,
        /// Also write the results as JSON.
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Write a synthetic stream as CSV.
    Generate {
        /// Generator description (JSON).
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        rows: usize,
        #[arg(long, env = "COVSHIFT_SEED", default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    csv: PathBuf,
    #[arg(long)]
    window: usize,
    /// Level of the stationarity test.
    #[arg(long, default_value_t = covshift::dependence::DEFAULT_ALPHA)]
    alpha: f64,
    /// Cutoff on the lagged trace ratio used to pick M.
    #[arg(long, default_value_t = covshift::dependence::DEFAULT_EPSILON)]
    epsilon: f64,
    #[arg(long, default_value_t = covshift::dependence::DEFAULT_MAX_LAG)]
    max_lag: usize,
    /// Use this dependence order instead of estimating it.
    #[arg(long = "m")]
    dep_order: Option<usize>,
    /// Summary destination; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct MonitorArgs {
    #[arg(long)]
    summary: PathBuf,
    /// Alarm threshold on the standardized statistic.
    #[arg(long)]
    a: Option<f64>,
    /// Target average run length; ignored when `--a` is given.
    #[arg(long)]
    arl: Option<f64>,
    /// Training CSV used to prime the window.
    #[arg(long)]
    train: Option<PathBuf>,
    /// Stream CSV; JSON lines on stdin when omitted.
    #[arg(long)]
    csv: Option<PathBuf>,
    #[arg(long, default_value_t = covshift::detector::DEFAULT_HISTORY_LIMIT)]
    history_limit: usize,
    #[arg(long)]
    no_localize: bool,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let usage = e.use_stderr();
            let _ = e.print();
            return if usage { ExitCode::FAILURE } else { ExitCode::SUCCESS };
        }
    };
    let result = match cli.command {
        Command::Calibrate { arl, window } => commands::calibrate(arl, window),
        Command::Train(args) => commands::train(&args),
        Command::Monitor(args) => commands::monitor(&args),
        Command::Localize { summary, csv, cutoff } => commands::localize(&summary, &csv, cutoff),
        Command::Simulate {
            scenario,
            replicates,
            seed,
            json,
        } => commands::simulate(&scenario, replicates, seed, json.as_deref()),
        Command::Generate { spec, rows, seed, out } => commands::generate(&spec, rows, seed, out.as_deref()),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
