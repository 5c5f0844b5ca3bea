use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use covshift::dependence::{fit_training, TrainingConfig};
use covshift::{solve_threshold, DetectionReport, Detector, DetectorConfig, StepOutcome, TrainingSummaryF64};
use covshift_sim::{gen_stream, render_table, run_scenario, GeneratorSpec, Scenario};
use serde::Serialize;

use crate::input::{read_csv_path, JsonLines};
use crate::{MonitorArgs, TrainArgs, EXIT_ALARM, EXIT_NONSTATIONARY};

const DEFAULT_REPLICATES: usize = 100;
const DEFAULT_SEED: u64 = 2024;

fn sink(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("creating {}", p.display()))?,
        )),
        None => Box::new(io::stdout().lock()),
    })
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    serde_json::from_reader(io::BufReader::new(file)).with_context(|| format!("parsing {}", path.display()))
}

pub fn calibrate(arl: f64, window: usize) -> Result<u8> {
    let res = solve_threshold(arl, window)?;
    let mut out = io::stdout().lock();
    serde_json::to_writer_pretty(&mut out, &res)?;
    writeln!(out)?;
    Ok(0)
}

pub fn train(args: &TrainArgs) -> Result<u8> {
    let data = read_csv_path(&args.csv)?;
    let config = TrainingConfig {
        window: args.window,
        alpha: args.alpha,
        epsilon: args.epsilon,
        max_lag: args.max_lag,
        m_override: args.dep_order,
    };
    let summary = fit_training(&data, &config)?;
    let mut out = sink(args.out.as_deref())?;
    serde_json::to_writer_pretty(&mut out, &summary)?;
    writeln!(out)?;
    out.flush()?;
    let st = &summary.stationarity;
    eprintln!(
        "stationarity: {} (statistic {:.3}, critical value {:.3}); M = {}, n0 = {}, p = {}",
        if st.rejected { "rejected" } else { "not rejected" },
        st.statistic,
        st.z_alpha,
        summary.m_hat,
        summary.n0,
        summary.p
    );
    Ok(if st.rejected { EXIT_NONSTATIONARY } else { 0 })
}

#[derive(Serialize)]
struct FinalLine<'a> {
    report: &'a DetectionReport<f64>,
}

#[derive(Serialize)]
struct StepLine {
    index: usize,
    std_stat: Option<f64>,
    state: &'static str,
}

impl StepLine {
    fn new(index: usize, outcome: StepOutcome<f64>) -> Self {
        let (std_stat, state) = match outcome {
            StepOutcome::Filling => (None, "filling"),
            StepOutcome::Monitoring { std_stat } => (Some(std_stat), "monitoring"),
            StepOutcome::Alarm { std_stat, .. } => (Some(std_stat), "alarm"),
        };
        Self { index, std_stat, state }
    }
}

pub fn monitor(args: &MonitorArgs) -> Result<u8> {
    let summary: TrainingSummaryF64 = read_json(&args.summary)?;
    let threshold = match (args.a, args.arl) {
        (Some(a), arl) => {
            if arl.is_some() {
                log::warn!("--a given, ignoring --arl");
            }
            a
        }
        (None, Some(arl)) => solve_threshold(arl, summary.window)?.threshold,
        (None, None) => bail!("one of --a or --arl is required"),
    };
    let training = args.train.as_deref().map(read_csv_path).transpose()?;
    let mut config = DetectorConfig::new(summary.window, threshold);
    config.localize = !args.no_localize;
    config.history_limit = args.history_limit;
    let mut det = Detector::new(Arc::new(summary), &config, training.as_ref())?;

    let rows: Box<dyn Iterator<Item = Result<Vec<f64>>>> = match &args.csv {
        Some(path) => {
            let data = read_csv_path(path)?;
            let rows: Vec<Vec<f64>> = data.rows().map(<[f64]>::to_vec).collect();
            Box::new(rows.into_iter().map(Ok))
        }
        None => Box::new(JsonLines::new(io::stdin().lock())),
    };
    let mut out = io::stdout().lock();
    let mut alarmed = false;
    for row in rows {
        let outcome = det.step(&row?)?;
        serde_json::to_writer(&mut out, &StepLine::new(det.consumed(), outcome))?;
        writeln!(out)?;
        if matches!(outcome, StepOutcome::Alarm { .. }) {
            alarmed = true;
            break;
        }
    }
    let report = det.report()?;
    serde_json::to_writer(&mut out, &FinalLine { report: &report })?;
    writeln!(out)?;
    out.flush()?;
    Ok(if alarmed { EXIT_ALARM } else { 0 })
}

pub fn localize(summary: &Path, csv: &Path, cutoff: f64) -> Result<u8> {
    let summary: TrainingSummaryF64 = read_json(summary)?;
    let data = read_csv_path(csv)?;
    if data.dim() != summary.p {
        bail!("CSV has {} columns, summary has {}", data.dim(), summary.p);
    }
    let loc = covshift::localize(&data, &summary, cutoff)?;
    let mut out = io::stdout().lock();
    serde_json::to_writer_pretty(&mut out, &loc)?;
    writeln!(out)?;
    Ok(0)
}

#[derive(Serialize)]
struct SimulationOutput<'a> {
    name: Option<&'a str>,
    replicates: usize,
    seed: u64,
    cells: &'a [covshift_sim::CellOutcome],
}

pub fn simulate(path: &Path, replicates: Option<usize>, seed: Option<u64>, json: Option<&Path>) -> Result<u8> {
    let scenario: Scenario = read_json(path)?;
    let reps = replicates.or(scenario.replicates).unwrap_or(DEFAULT_REPLICATES);
    let seed = seed.or(scenario.seed).unwrap_or(DEFAULT_SEED);
    log::info!("running {} cells with {reps} replicates, seed {seed}", scenario.cells.len());
    let rows = run_scenario(&scenario, reps, seed)?;
    let mut out = io::stdout().lock();
    if let Some(name) = &scenario.name {
        writeln!(out, "{name}")?;
    }
    write!(out, "{}", render_table(&rows))?;
    if let Some(p) = json {
        let mut f = sink(Some(p))?;
        let doc = SimulationOutput {
            name: scenario.name.as_deref(),
            replicates: reps,
            seed,
            cells: &rows,
        };
        serde_json::to_writer_pretty(&mut f, &doc)?;
        writeln!(f)?;
        f.flush()?;
    }
    Ok(0)
}

pub fn generate(spec: &Path, rows: usize, seed: u64, out: Option<&Path>) -> Result<u8> {
    let spec: GeneratorSpec = read_json(spec)?;
    let data = gen_stream(&spec, rows, seed)?;
    let mut w = csv::Writer::from_writer(sink(out)?);
    w.write_record((1..=spec.p).map(|j| format!("x{j}")))?;
    for row in data.rows() {
        w.write_record(row.iter().map(|v| v.to_string()))?;
    }
    w.flush()?;
    Ok(0)
}
