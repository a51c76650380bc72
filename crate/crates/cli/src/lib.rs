//! Command implementations behind the `trajfrac` binary.
//!
//! - `simulate <config>` runs an ensemble and writes `stats.csv`,
//!   `exponents.csv`, `run.json` and, when requested, `recentered_dist.csv`
//!   and `timeseries.csv`
//! - `analytic <single_shot|resetting>` tabulates closed-form results
//! - `fit <stats.csv>` recomputes the exponent table from stored statistics

// `!(x > 0.0)` is used on purpose so that NaN is rejected too
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analytic;
pub mod config;
pub mod table;

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use serde::Serialize;
use trajfrac::ensemble::{log_spaced_times, run, run_time_series, ExperimentSpec, RunOptions, RunResult};
use trajfrac::scaling::{exponent_table, ExponentTable, SizedCell};

pub use config::ConfigDocument;

/// Environment variable overriding the worker count.
pub const WORKERS_ENV: &str = "TRAJFRAC_WORKERS";

/// Worker count from the flag, else the environment, else all cores.
pub fn resolve_workers(flag: Option<usize>) -> anyhow::Result<RunOptions> {
    let workers = match flag {
        Some(n) => Some(n),
        None => match std::env::var(WORKERS_ENV) {
            Ok(v) => Some(
                v.trim()
                    .parse()
                    .with_context(|| format!("{WORKERS_ENV}={v:?} is not a worker count"))?,
            ),
            Err(_) => None,
        },
    };
    if workers == Some(0) {
        bail!("worker count must be positive");
    }
    Ok(RunOptions { workers })
}

#[derive(Debug, Clone, Default)]
pub struct SimulateOptions {
    pub run: RunOptions,
    pub time_series: bool,
    /// Overrides the config's output directory.
    pub output_dir: Option<PathBuf>,
}

#[derive(Serialize)]
struct SizeMeta {
    #[serde(rename = "L")]
    length: usize,
    p: f64,
    steps: u64,
}

#[derive(Serialize)]
struct RunMeta<'a> {
    version: &'static str,
    master_seed: String,
    experiment: &'a ExperimentSpec,
    output: &'a config::OutputConfig,
    sizes: Vec<SizeMeta>,
    wall_time_secs: f64,
}

fn create(path: &Path) -> anyhow::Result<BufWriter<File>> {
    Ok(BufWriter::new(
        File::create(path).with_context(|| format!("cannot create {}", path.display()))?,
    ))
}

/// Exponent fits; `None` when fewer than three lengths reach `min_l`.
fn fit_if_possible(cells: &[SizedCell], min_l: f64, q0: f64) -> anyhow::Result<Option<ExponentTable>> {
    match exponent_table(cells, min_l, q0) {
        Ok(table) => Ok(Some(table)),
        Err(trajfrac::Error::InsufficientPoints { .. }) => Ok(None),
        Err(e) => Err(e.into()),
    }
}

/// Runs the experiment of a config document and writes all result files
/// into `dir`. Returns the run result.
pub fn simulate_document(doc: &ConfigDocument, dir: &Path, options: &SimulateOptions) -> anyhow::Result<RunResult> {
    let spec = &doc.experiment;
    let result = run(spec, &options.run)?;
    fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;

    let rows = table::stats_rows(&result);
    table::write_stats(create(&dir.join("stats.csv"))?, &rows)?;

    let cells: Vec<SizedCell> = rows.iter().map(table::StatsRow::to_cell).collect();
    let fits = fit_if_possible(&cells, doc.output.min_l, doc.output.q0)?;
    if fits.is_none() {
        eprintln!(
            "note: fewer than 3 lengths with L >= {}; exponents.csv left empty",
            doc.output.min_l
        );
    }
    table::write_exponents(create(&dir.join("exponents.csv"))?, fits.as_ref())?;

    if spec.recentered {
        table::write_recentered(create(&dir.join("recentered_dist.csv"))?, &result)?;
    }

    if options.time_series {
        let mut series = Vec::with_capacity(spec.lengths.len());
        for &len in &spec.lengths {
            let mut single = spec.clone();
            single.lengths = vec![len];
            let times = log_spaced_times(single.steps_at(len), doc.output.time_points);
            series.extend(run_time_series(&single, &times, &options.run)?);
        }
        table::write_time_series(create(&dir.join("timeseries.csv"))?, &series)?;
    }

    let meta = RunMeta {
        version: env!("CARGO_PKG_VERSION"),
        master_seed: spec.master_seed.to_string(),
        experiment: spec,
        output: &doc.output,
        sizes: result
            .sizes
            .iter()
            .map(|s| SizeMeta {
                length: s.length,
                p: s.rate,
                steps: s.steps,
            })
            .collect(),
        wall_time_secs: result.wall_time_secs,
    };
    let mut out = create(&dir.join("run.json"))?;
    serde_json::to_writer_pretty(&mut out, &meta)?;
    out.write_all(b"\n")?;
    out.flush()?;
    Ok(result)
}

/// `simulate <config>`: returns the directory written to.
pub fn cmd_simulate(config_path: &Path, options: &SimulateOptions) -> anyhow::Result<PathBuf> {
    let doc = ConfigDocument::load(config_path)?;
    let dir = options
        .output_dir
        .clone()
        .unwrap_or_else(|| doc.output_dir(config_path));
    simulate_document(&doc, &dir, options)?;
    Ok(dir)
}

/// `fit <stats.csv>`: the exponent table of stored statistics, written as
/// CSV to `out`.
pub fn cmd_fit<W: Write>(stats_path: &Path, min_l: f64, q0: f64, out: W) -> anyhow::Result<ExponentTable> {
    let data = fs::read(stats_path).with_context(|| format!("cannot read {}", stats_path.display()))?;
    let rows = table::parse_stats(&data).with_context(|| format!("invalid {}", stats_path.display()))?;
    let cells: Vec<SizedCell> = rows.iter().map(table::StatsRow::to_cell).collect();
    let fits = exponent_table(&cells, min_l, q0)?;
    table::write_exponents(out, Some(&fits))?;
    Ok(fits)
}

/// `analytic`: prints an aligned table to `out` and optionally a CSV.
pub fn cmd_analytic<W: Write>(params: &analytic::AnalyticParams, csv_path: Option<&Path>, mut out: W) -> anyhow::Result<()> {
    let (header, rows) = analytic::analytic_table(params).map_err(anyhow::Error::msg)?;
    let width = 24;
    let line: Vec<String> = header.iter().map(|h| format!("{h:>width$}")).collect();
    writeln!(out, "{}", line.join(" "))?;
    for row in &rows {
        let line: Vec<String> = row.iter().map(|v| format!("{v:>width$}")).collect();
        writeln!(out, "{}", line.join(" "))?;
    }
    if let Some(path) = csv_path {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(create(path)?);
        w.write_record(&header)?;
        for row in &rows {
            w.write_record(row)?;
        }
        w.flush()?;
    }
    Ok(())
}
