use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use marsma::experiment::spec::DEFAULT_SPEC_TEXT;
use marsma::experiment::{
    emit_records, parse_records_file, run_experiment, summarize, write_records, ExperimentSpec, OutputFormat,
    RunOptions,
};
use marsma::{Error, Scenario};

/// Sweeps of the movable-antenna full-duplex RSMA meta-learner.
#[derive(Debug, Parser)]
#[command(name = "marsma", version, after_help = "Any hyper-parameter can be overridden with --hyper.<name> <value>.")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the experiment described by an experiment file.
    Run {
        #[arg(long)]
        spec: Option<PathBuf>,
        /// Comma-separated scenarios (1, 2, 3, fpa); replaces the file's list.
        #[arg(long, value_delimiter = ',')]
        scenario: Option<Vec<Scenario>>,
        #[arg(long)]
        seed0: Option<u64>,
        #[arg(long)]
        realizations: Option<usize>,
        /// Output file; stdout when neither this nor the experiment file names one.
        #[arg(long)]
        out: Option<PathBuf>,
        /// csv or jsonl.
        #[arg(long)]
        format: Option<String>,
        /// Record wall-clock seconds per run.
        #[arg(long)]
        timing: bool,
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Per (scenario, sweep value) means, standard deviations and feasible fraction.
    Summarize { records: PathBuf },
    /// Print an experiment file holding every default.
    Defaults,
}

enum Failure {
    Spec(String),
    Io(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        if e.is_spec_error() {
            Failure::Spec(e.to_string())
        } else {
            Failure::Io(e.to_string())
        }
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Io(e.to_string())
    }
}

type Overrides = Vec<(String, String)>;

/// Pulls `--hyper.<name> <value>` and `--hyper.<name>=<value>` out of the
/// argument list, since clap cannot declare open-ended flag families.
fn split_hyper_overrides(args: Vec<String>) -> Result<(Vec<String>, Overrides), Failure> {
    let mut rest = Vec::with_capacity(args.len());
    let mut overrides = Vec::new();
    let mut it = args.into_iter();
    while let Some(a) = it.next() {
        let Some(body) = a.strip_prefix("--hyper.") else {
            rest.push(a);
            continue;
        };
        let (name, value) = match body.split_once('=') {
            Some((n, v)) => (n.to_string(), v.to_string()),
            None => {
                let v = it.next().ok_or_else(|| Failure::Spec(format!("--hyper.{body} needs a value")))?;
                (body.to_string(), v)
            }
        };
        overrides.push((format!("hyper.{name}"), value));
    }
    Ok((rest, overrides))
}

#[allow(clippy::too_many_arguments)]
fn cmd_run(
    spec_path: Option<PathBuf>,
    scenario: Option<Vec<Scenario>>,
    seed0: Option<u64>,
    realizations: Option<usize>,
    out: Option<PathBuf>,
    format: Option<String>,
    timing: bool,
    workers: Option<usize>,
    overrides: &[(String, String)],
) -> Result<(), Failure> {
    let mut spec = match &spec_path {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| Failure::Io(format!("{}: {e}", p.display())))?;
            ExperimentSpec::parse(&text)?
        }
        None => ExperimentSpec::default(),
    };
    for (k, v) in overrides {
        spec.set(k, v).map_err(|m| Failure::Spec(format!("{k}: {m}")))?;
    }
    if let Some(s) = scenario {
        spec.scenarios = s;
    }
    if let Some(s) = seed0 {
        spec.seed0 = s;
    }
    if let Some(r) = realizations {
        spec.n_realizations = r;
    }
    if let Some(f) = format {
        spec.format = f.parse::<OutputFormat>().map_err(Failure::Spec)?;
    }
    if out.is_some() {
        spec.output = out;
    }
    spec.validate()?;
    let records = run_experiment(&spec, &RunOptions { timing, workers })?;
    match &spec.output {
        Some(p) => emit_records(&records, spec.format, p).map_err(|e| Failure::Io(format!("{}: {e}", p.display())))?,
        None => write_records(&records, spec.format, io::stdout().lock())?,
    }
    Ok(())
}

fn cmd_summarize(path: PathBuf) -> Result<(), Failure> {
    let records = parse_records_file(&path).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))?;
    let mut out = io::stdout().lock();
    writeln!(out, "scenario,sweep,count,feasible_fraction,mean_sum_rate,std_sum_rate,mean_dl_rate,std_dl_rate,mean_ul_rate,std_ul_rate")?;
    for r in summarize(&records) {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{}",
            r.scenario,
            r.sweep,
            r.count,
            r.feasible_fraction,
            r.mean_sum_rate,
            r.std_sum_rate,
            r.mean_dl_rate,
            r.std_dl_rate,
            r.mean_ul_rate,
            r.std_ul_rate
        )?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let (args, overrides) = match split_hyper_overrides(std::env::args().collect()) {
        Ok(x) => x,
        Err(Failure::Spec(m) | Failure::Io(m)) => {
            eprintln!("error: {m}");
            return ExitCode::from(2);
        }
    };
    let cli = Cli::parse_from(args);
    let result = match cli.command {
        Command::Run { spec, scenario, seed0, realizations, out, format, timing, workers } => {
            cmd_run(spec, scenario, seed0, realizations, out, format, timing, workers, &overrides)
        }
        Command::Summarize { records } => cmd_summarize(records),
        Command::Defaults => io::stdout().write_all(DEFAULT_SPEC_TEXT.as_bytes()).map_err(Failure::from),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Spec(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
        Err(Failure::Io(m)) => {
            eprintln!("i/o error: {m}");
            ExitCode::from(3)
        }
    }
}
