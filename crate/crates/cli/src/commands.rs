use std::fmt;
use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::Context;
use floorsync::{parse_config, read_trace, write_trace, ReportFile, SimConfig, Trace};

#[derive(Debug)]
pub enum CliError {
    Usage(anyhow::Error),
    Validation(anyhow::Error),
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(e) | CliError::Validation(e) => write!(f, "{e:#}"),
        }
    }
}

impl From<floorsync::Error> for CliError {
    fn from(e: floorsync::Error) -> Self {
        match e {
            floorsync::Error::Config { .. } | floorsync::Error::TraceFormat { .. } => {
                CliError::Validation(e.into())
            }
            floorsync::Error::Usage(_) | floorsync::Error::Io(_) => CliError::Usage(e.into()),
        }
    }
}

impl From<anyhow::Error> for CliError {
    fn from(e: anyhow::Error) -> Self {
        CliError::Usage(e)
    }
}

pub type CliResult<T = ()> = Result<T, CliError>;

pub fn load_config(path: &Path) -> CliResult<SimConfig> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    parse_config(&text).map_err(|e| CliError::Validation(anyhow::Error::new(e).context(path.display().to_string())))
}

pub fn validate(path: &Path) -> CliResult {
    let config = load_config(path)?;
    println!(
        "{}: ok ({} agents, {} ticks, seed {})",
        path.display(),
        config.agents.len(),
        config.run.ticks,
        config.run.seed
    );
    Ok(())
}

pub fn run(path: &Path, seed: Option<u64>, ticks: Option<u64>, out: &Path) -> CliResult {
    let mut config = load_config(path)?;
    if let Some(s) = seed {
        config.run.seed = s;
    }
    if let Some(t) = ticks {
        config.run.ticks = t;
    }
    let trace = floorsync::run(&config)?;
    save_trace(&trace, out)?;
    println!("wrote {} ticks to {}", trace.records.len() - 1, out.display());
    Ok(())
}

pub fn save_trace(trace: &Trace, out: &Path) -> CliResult {
    let file = File::create(out).with_context(|| format!("creating {}", out.display()))?;
    write_trace(trace, BufWriter::new(file))?;
    Ok(())
}

pub fn analyze(trace_path: &Path, out: &Path, lag: Option<i64>) -> CliResult {
    let file = File::open(trace_path).with_context(|| format!("opening {}", trace_path.display()))?;
    let trace: Trace = read_trace(BufReader::new(file))?;
    let report = build_report(&trace, lag)?;
    write_report(&report, out)?;
    println!("wrote {}", out.display());
    Ok(())
}

pub fn build_report(trace: &Trace, lag: Option<i64>) -> CliResult<ReportFile> {
    let started = Instant::now();
    let mut report = ReportFile::build(trace, lag)?;
    report.wall_time_ms = started.elapsed().as_secs_f64() * 1e3;
    Ok(report)
}

/// Sibling path holding the flat CSV form of a JSON report.
pub fn csv_path(json: &Path) -> PathBuf {
    json.with_extension("csv")
}

pub fn write_report(report: &ReportFile, out: &Path) -> CliResult {
    let mut json = serde_json::to_string_pretty(report).context("serializing report")?;
    json.push('\n');
    fs::write(out, json).with_context(|| format!("writing {}", out.display()))?;

    let csv_out = csv_path(out);
    let mut w = csv::Writer::from_path(&csv_out).with_context(|| format!("creating {}", csv_out.display()))?;
    for row in report.report.csv_rows() {
        w.serialize(row).context("writing report CSV")?;
    }
    w.flush().context("writing report CSV")?;
    Ok(())
}

pub fn ensure_dir(dir: &Path) -> CliResult {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    Ok(())
}

pub fn write_line(out: &mut impl Write, line: &str) -> CliResult {
    writeln!(out, "{line}").context("writing output")?;
    Ok(())
}
