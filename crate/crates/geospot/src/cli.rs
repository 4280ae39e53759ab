//! Command-line front end.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use geospot_core::optimizer::{search, SearchOptions};

use crate::load::{Loader, DEFAULT_MODELS};
use crate::report::{
    csv_text, cost_csv, metrics_csv, read_output_set, summary_table, text_table, to_json, write_file,
    write_output_set, CalibrationOut, ReportDoc, RunManifest, MANIFEST_FILE,
};
use crate::reproduce::{cells_csv, cells_table, failing, reproduce};
use crate::run::{evaluate, run_calibration, sweep, RunError};
use crate::schema::parse_objective;

pub const EXIT_OK: i32 = 0;
/// Output could not be written, or reproduced values miss their tolerance.
pub const EXIT_FAILED: i32 = 1;
pub const EXIT_INVALID: i32 = 2;
pub const EXIT_INFEASIBLE: i32 = 3;
pub const EXIT_USAGE: i32 = 64;

#[derive(Debug, Parser)]
#[command(name = "geospot", version, about = "Throughput and cost model for geo-distributed training on spot VMs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate one scenario.
    Simulate {
        scenario: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Replace the scenario's model by name.
        #[arg(long)]
        model: Option<String>,
    },
    /// Simulate a scenario at several GPU counts and batch sizes; prints CSV.
    Sweep {
        scenario: PathBuf,
        #[arg(long, value_delimiter = ',', required = true)]
        gpus: Vec<u32>,
        #[arg(long, value_delimiter = ',')]
        tbs: Vec<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Fit averaging overheads and middleware penalties.
    Calibrate {
        observations: PathBuf,
        /// File to write the fitted parameters to.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Search placements over the scenario's catalog.
    Optimize {
        scenario: PathBuf,
        #[arg(long, value_enum)]
        objective: Option<ObjectiveArg>,
        /// USD per hour, for max-sps-under-budget.
        #[arg(long)]
        budget: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Evaluate every neighbour in local search.
        #[arg(long)]
        no_prune: bool,
    },
    /// Print the reports of an output directory.
    Report {
        dir: PathBuf,
        #[arg(long, value_enum, default_value = "table")]
        format: Format,
    },
    /// Compare the bundled scenario suite with published values.
    Reproduce {
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ObjectiveArg {
    MaxSps,
    MinUsdPerMillion,
    MaxSpsUnderBudget,
}

impl ObjectiveArg {
    fn name(self) -> &'static str {
        match self {
            ObjectiveArg::MaxSps => "max-sps",
            ObjectiveArg::MinUsdPerMillion => "min-usd-per-million",
            ObjectiveArg::MaxSpsUnderBudget => "max-sps-under-budget",
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Table,
}

/// Runs the command line and returns the process exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            let text = e.render().to_string();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(out, "{text}");
                    EXIT_OK
                }
                _ => {
                    let _ = write!(err, "{text}");
                    EXIT_USAGE
                }
            };
        }
    };
    let argv: Vec<String> = args.iter().skip(1).map(|a| a.to_string_lossy().into_owned()).collect();
    let loader = Loader::default();
    match dispatch(cli.command, &argv, &loader, out) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            exit_code(&e)
        }
    }
}

fn exit_code(e: &RunError) -> i32 {
    match e {
        RunError::Infeasible(_) => EXIT_INFEASIBLE,
        RunError::Output { .. } => EXIT_FAILED,
        _ => EXIT_INVALID,
    }
}

fn emit(out: &mut dyn Write, text: &str) -> Result<(), RunError> {
    out.write_all(text.as_bytes()).map_err(|source| RunError::Output { path: "stdout".into(), source })
}

fn path_arg(p: &Path) -> Vec<String> {
    vec![p.display().to_string()]
}

fn dispatch(cmd: Command, argv: &[String], loader: &Loader, out: &mut dyn Write) -> Result<i32, RunError> {
    match cmd {
        Command::Simulate { scenario, out: dir, model } => {
            let mut s = loader.load_scenario(&scenario)?;
            if let Some(m) = model {
                s.model = loader.model(Some(loader.data_dir()), DEFAULT_MODELS, &m)?;
                s.validate().map_err(crate::LoadError::from)?;
            }
            let reports = vec![ReportDoc::from_evaluated(&evaluate(&s)?)];
            if let Some(dir) = dir {
                write_output_set(&dir, &reports, &RunManifest::new(argv, path_arg(&scenario), &dir))?;
            }
            emit(out, &summary_table(&reports))?;
        }
        Command::Sweep { scenario, gpus, tbs, out: dir } => {
            let s = loader.load_scenario(&scenario)?;
            let reports: Vec<ReportDoc> = sweep(&s, &gpus, &tbs)?.iter().map(ReportDoc::from_evaluated).collect();
            if let Some(dir) = dir {
                write_output_set(&dir, &reports, &RunManifest::new(argv, path_arg(&scenario), &dir))?;
            }
            emit(out, &metrics_csv(&reports))?;
        }
        Command::Calibrate { observations, out: file } => {
            let input = loader.load_calibration(&observations)?;
            let cal = run_calibration(&input)?;
            let doc = CalibrationOut::new(&input.doc.id, input.doc.gpu.as_deref(), &cal);
            if let Some(file) = file {
                write_file(&file, &to_json(&doc))?;
            }
            emit(out, &to_json(&doc))?;
        }
        Command::Optimize { scenario, objective, budget, out: dir, no_prune } => {
            let s = loader.load_scenario(&scenario)?;
            let mut spec = s.search.clone().ok_or_else(|| crate::LoadError::Validation {
                key: "search".into(),
                message: "scenario has no search section".into(),
            })?;
            if let Some(o) = objective {
                spec.objective = parse_objective(o.name(), budget)?;
            } else if let Some(b) = budget {
                spec.objective = parse_objective(spec.objective.label(), Some(b))?;
            }
            let outcome = search(&spec, &s, SearchOptions { prune: !no_prune, ..SearchOptions::default() })?;
            if outcome.ranked.is_empty() {
                let mut why = outcome.diagnostics.clone();
                why.dedup();
                return Err(RunError::Infeasible(why.join("; ")));
            }
            let header = ["rank", "placement", "gpus", "sps", "usd_per_h", "usd_per_1m", "objective"];
            let rows: Vec<Vec<String>> = outcome
                .ranked
                .iter()
                .map(|r| {
                    let gpus: u32 = r.counts.iter().zip(&spec.catalog).map(|(c, e)| c * e.gpus_per_vm).sum();
                    vec![
                        r.rank.to_string(),
                        r.encoding.clone(),
                        gpus.to_string(),
                        crate::report::fmt_sig6(Some(r.report.sps_global)),
                        crate::report::fmt_sig6(Some(r.cost.usd_per_h)),
                        crate::report::fmt_sig6(Some(r.cost.usd_per_million)),
                        crate::report::fmt_sig6(Some(r.objective_value)),
                    ]
                })
                .collect();
            if let Some(dir) = dir {
                let mut reports = Vec::new();
                for r in &outcome.ranked {
                    let mut cand = s.clone();
                    cand.placement = r.placement.clone();
                    cand.id = format!("{}-{}", s.id, r.encoding);
                    reports.push(ReportDoc::from_evaluated(&evaluate(&cand)?));
                }
                write_output_set(&dir, &reports, &RunManifest::new(argv, path_arg(&scenario), &dir))?;
                write_file(&dir.join("ranking.csv"), &csv_text(&header, &rows))?;
            }
            emit(out, &format!("objective: {}\n", spec.objective.label()))?;
            emit(out, &text_table(&header, &rows))?;
        }
        Command::Report { dir, format } => {
            let reports = read_output_set(&dir)?;
            match format {
                Format::Csv => {
                    emit(out, &metrics_csv(&reports))?;
                    emit(out, "\n")?;
                    emit(out, &cost_csv(&reports))?;
                }
                Format::Table => emit(out, &summary_table(&reports))?,
            }
        }
        Command::Reproduce { out: dir } => {
            let cells = reproduce(loader)?;
            if let Some(dir) = &dir {
                write_file(&dir.join("reproduce.csv"), &cells_csv(&cells))?;
                let manifest = RunManifest::new(argv, vec![loader.data_dir().join("scenarios").display().to_string()], dir);
                write_file(&dir.join(MANIFEST_FILE), &to_json(&manifest))?;
            }
            emit(out, &cells_table(&cells))?;
            let bad = failing(&cells);
            let checked = cells.iter().filter(|c| c.status != crate::reproduce::Status::Info).count();
            emit(out, &format!("\n{} of {checked} checked cells within tolerance\n", checked - bad.len()))?;
            if !bad.is_empty() {
                emit(out, "failing cells:\n")?;
                for c in &bad {
                    emit(out, &format!("  {} / {}: published {}, simulated {}\n", c.section, c.name, c.expected, c.simulated))?;
                }
                return Ok(EXIT_FAILED);
            }
        }
    }
    Ok(EXIT_OK)
}
