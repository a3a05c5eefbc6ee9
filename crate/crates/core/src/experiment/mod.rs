//! Batch sweeps over seeded channel realizations.

pub mod spec;

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

pub use spec::{ExperimentSpec, OutputFormat, SweepAxis};

use crate::channel::sample_instance;
use crate::config::Scenario;
use crate::error::{Error, Result};
use crate::gml::{self, GmlHyperParams};

/// Environment variable that bounds the worker pool.
pub const WORKERS_ENV: &str = "MARSMA_WORKERS";

pub const CSV_HEADER: &str = "sweep,scenario,seed,sum_rate,dl_rate,ul_rate,feasible,epochs,seconds";

fn ser_scenario<S: Serializer>(s: &Scenario, ser: S) -> std::result::Result<S::Ok, S::Error> {
    ser.serialize_str(s.label())
}

fn de_scenario<'de, D: Deserializer<'de>>(de: D) -> std::result::Result<Scenario, D::Error> {
    let s = String::deserialize(de)?;
    s.parse().map_err(serde::de::Error::custom)
}

/// JSON writes NaN as `null`; read it back as NaN.
fn de_rate<'de, D: Deserializer<'de>>(de: D) -> std::result::Result<f64, D::Error> {
    Ok(Option::<f64>::deserialize(de)?.unwrap_or(f64::NAN))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultRecord {
    pub sweep: f64,
    #[serde(serialize_with = "ser_scenario", deserialize_with = "de_scenario")]
    pub scenario: Scenario,
    pub seed: u64,
    #[serde(deserialize_with = "de_rate")]
    pub sum_rate: f64,
    #[serde(deserialize_with = "de_rate")]
    pub dl_rate: f64,
    #[serde(deserialize_with = "de_rate")]
    pub ul_rate: f64,
    pub feasible: bool,
    pub epochs: usize,
    pub seconds: f64,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct RunOptions {
    /// Record wall-clock seconds; off keeps output byte-stable.
    pub timing: bool,
    /// Worker threads; `None` reads [`WORKERS_ENV`], then uses all cores.
    pub workers: Option<usize>,
}

fn worker_count(opts: &RunOptions) -> usize {
    opts.workers
        .or_else(|| std::env::var(WORKERS_ENV).ok().and_then(|v| v.trim().parse().ok()))
        .filter(|&n| n > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

struct Job {
    value: f64,
    scenario: Scenario,
    seed: u64,
}

fn run_job(spec: &ExperimentSpec, job: &Job, timing: bool) -> Result<ResultRecord> {
    let cfg = spec.axis.apply(&spec.system, job.value);
    let instance = sample_instance(&cfg, job.seed);
    let hyper = GmlHyperParams { scenario: job.scenario, ..spec.hyper.clone() };
    let base = ResultRecord {
        sweep: job.value,
        scenario: job.scenario,
        seed: job.seed,
        sum_rate: f64::NAN,
        dl_rate: f64::NAN,
        ul_rate: f64::NAN,
        feasible: false,
        epochs: hyper.n_epochs,
        seconds: 0.0,
    };
    match gml::run(&cfg, &instance, &hyper, job.seed) {
        Ok(r) => Ok(ResultRecord {
            sum_rate: r.best_rates.sum_rate,
            dl_rate: r.best_rates.dl_sum,
            ul_rate: r.best_rates.ul_sum,
            feasible: r.feasible,
            epochs: r.epochs,
            seconds: if timing { r.seconds } else { 0.0 },
            ..base
        }),
        // a run that never produced a finite candidate is reported, not dropped
        Err(Error::Diverged { .. } | Error::NonFinite { .. }) => Ok(base),
        Err(e) => Err(e),
    }
}

/// Runs every (value, scenario, realization) combination. Realization `r`
/// uses seed `seed0 + r` for both the instance and the optimizer, so all
/// scenarios at one sweep point see the same channels. Records come back in
/// value, scenario, realization order whatever the worker count.
pub fn run_experiment(spec: &ExperimentSpec, opts: &RunOptions) -> Result<Vec<ResultRecord>> {
    spec.validate()?;
    let mut jobs = Vec::with_capacity(spec.record_count());
    for &value in &spec.values {
        for &scenario in &spec.scenarios {
            for r in 0..spec.n_realizations as u64 {
                jobs.push(Job { value, scenario, seed: spec.seed0 + r });
            }
        }
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(worker_count(opts))
        .build()
        .map_err(|e| Error::Config(format!("cannot build worker pool: {e}")))?;
    pool.install(|| jobs.par_iter().map(|j| run_job(spec, j, opts.timing)).collect())
}

pub fn write_records<W: Write>(records: &[ResultRecord], format: OutputFormat, out: W) -> Result<()> {
    match format {
        OutputFormat::Csv => {
            let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
            w.write_record(CSV_HEADER.split(','))?;
            for r in records {
                w.serialize(r)?;
            }
            w.flush()?;
        }
        OutputFormat::JsonLines => {
            let mut w = BufWriter::new(out);
            for r in records {
                serde_json::to_writer(&mut w, r)?;
                w.write_all(b"\n")?;
            }
            w.flush()?;
        }
    }
    Ok(())
}

pub fn emit_records(records: &[ResultRecord], format: OutputFormat, path: &Path) -> Result<()> {
    write_records(records, format, File::create(path)?)
}

pub fn read_records<R: Read>(input: R, format: OutputFormat) -> Result<Vec<ResultRecord>> {
    match format {
        OutputFormat::Csv => {
            let mut r = csv::Reader::from_reader(input);
            r.deserialize().map(|x| x.map_err(Error::from)).collect()
        }
        OutputFormat::JsonLines => BufReader::new(input)
            .lines()
            .filter(|l| l.as_ref().map_or(true, |s| !s.trim().is_empty()))
            .map(|l| Ok(serde_json::from_str(&l?)?))
            .collect(),
    }
}

pub fn parse_records_file(path: &Path) -> Result<Vec<ResultRecord>> {
    let format = match path.extension().and_then(|e| e.to_str()) {
        Some("jsonl") | Some("json") => OutputFormat::JsonLines,
        _ => OutputFormat::Csv,
    };
    read_records(File::open(path)?, format)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    #[serde(serialize_with = "ser_scenario", deserialize_with = "de_scenario")]
    pub scenario: Scenario,
    pub sweep: f64,
    pub count: usize,
    pub feasible_fraction: f64,
    pub mean_sum_rate: f64,
    pub std_sum_rate: f64,
    pub mean_dl_rate: f64,
    pub std_dl_rate: f64,
    pub mean_ul_rate: f64,
    pub std_ul_rate: f64,
}

/// Population mean and standard deviation; NaN for an empty sample.
fn mean_std(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Per (scenario, sweep value) statistics. Rates are averaged over feasible
/// records only; every record counts toward the feasible fraction.
pub fn summarize(records: &[ResultRecord]) -> Vec<SummaryRow> {
    let mut groups: BTreeMap<(Scenario, u64), Vec<&ResultRecord>> = BTreeMap::new();
    for r in records {
        groups.entry((r.scenario, r.sweep.to_bits())).or_default().push(r);
    }
    let mut rows: Vec<SummaryRow> = groups
        .into_iter()
        .map(|((scenario, bits), rs)| {
            let ok: Vec<&&ResultRecord> = rs.iter().filter(|r| r.feasible).collect();
            let col = |f: fn(&ResultRecord) -> f64| mean_std(&ok.iter().map(|r| f(r)).collect::<Vec<_>>());
            let (mean_sum_rate, std_sum_rate) = col(|r| r.sum_rate);
            let (mean_dl_rate, std_dl_rate) = col(|r| r.dl_rate);
            let (mean_ul_rate, std_ul_rate) = col(|r| r.ul_rate);
            SummaryRow {
                scenario,
                sweep: f64::from_bits(bits),
                count: rs.len(),
                feasible_fraction: ok.len() as f64 / rs.len() as f64,
                mean_sum_rate,
                std_sum_rate,
                mean_dl_rate,
                std_dl_rate,
                mean_ul_rate,
                std_ul_rate,
            }
        })
        .collect();
    rows.sort_by(|a, b| a.scenario.cmp(&b.scenario).then(a.sweep.total_cmp(&b.sweep)));
    rows
}
