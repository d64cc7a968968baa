use std::path::Path;

use anyhow::{anyhow, Context};
use rayon::prelude::*;
use serde::Serialize;

use crate::commands::{build_report, ensure_dir, load_config, save_trace, write_line, write_report, CliError, CliResult};

/// One row of `aggregate.csv`.
#[derive(Debug, Serialize)]
struct AggregateRow {
    seed: u64,
    converged: bool,
    convergence_tick: Option<usize>,
    interruption_count: usize,
    mean_state_mi: f64,
    mean_plv: f64,
}

/// Parses an inclusive seed range `A..B` (or `A..=B`).
pub fn parse_seeds(spec: &str) -> Result<std::ops::RangeInclusive<u64>, anyhow::Error> {
    let (a, b) = spec
        .split_once("..")
        .ok_or_else(|| anyhow!("seed range must look like A..B, got {spec:?}"))?;
    let b = b.strip_prefix('=').unwrap_or(b);
    let lo: u64 = a.trim().parse().with_context(|| format!("bad range start {a:?}"))?;
    let hi: u64 = b.trim().parse().with_context(|| format!("bad range end {b:?}"))?;
    if lo > hi {
        return Err(anyhow!("empty seed range {spec:?}"));
    }
    Ok(lo..=hi)
}

pub fn sweep(config_path: &Path, seeds: &str, out: &Path, jobs: Option<usize>) -> CliResult {
    let config = load_config(config_path)?;
    let seeds: Vec<u64> = parse_seeds(seeds).map_err(CliError::Usage)?.collect();
    ensure_dir(out)?;

    let work = || -> Vec<CliResult<AggregateRow>> {
        seeds
            .par_iter()
            .map(|&seed| {
                let mut c = config.clone();
                c.run.seed = seed;
                let trace = floorsync::run(&c)?;
                save_trace(&trace, &out.join(format!("trace_seed{seed}.jsonl")))?;
                let report = build_report(&trace, None)?;
                write_report(&report, &out.join(format!("report_seed{seed}.json")))?;
                Ok(AggregateRow {
                    seed,
                    converged: report.report.converged(),
                    convergence_tick: report.report.convergence_tick(),
                    interruption_count: report.event_counts.interruptions,
                    mean_state_mi: report.report.mean_state_mi(),
                    mean_plv: report.report.mean_plv(),
                })
            })
            .collect()
    };
    let results = match jobs {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .context("building thread pool")?
            .install(work),
        None => work(),
    };
    let rows: Vec<AggregateRow> = results.into_iter().collect::<CliResult<_>>()?;

    let agg = out.join("aggregate.csv");
    let mut w = csv::Writer::from_path(&agg).with_context(|| format!("creating {}", agg.display()))?;
    for row in &rows {
        w.serialize(row).context("writing aggregate CSV")?;
    }
    w.flush().context("writing aggregate CSV")?;

    let converged = rows.iter().filter(|r| r.converged).count();
    let mut stdout = std::io::stdout().lock();
    write_line(
        &mut stdout,
        &format!(
            "{} runs, converged fraction {:.3} ({converged}/{}), aggregate at {}",
            rows.len(),
            converged as f64 / rows.len() as f64,
            rows.len(),
            agg.display()
        ),
    )?;
    Ok(())
}
