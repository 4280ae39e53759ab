//! Report files, CSV exports and console tables.
//!
//! Floats are written with 6 significant digits and keys keep a fixed order,
//! so identical inputs give byte-identical files.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use geospot_core::catalog::TrafficClass;
use geospot_core::protocol::Calibration;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::run::{Evaluated, RunError};
use crate::schema::CommDoc;

/// Rounds to 6 significant digits.
pub fn sig6(v: f64) -> f64 {
    if !v.is_finite() || v == 0.0 {
        return v;
    }
    format!("{v:.5e}").parse().unwrap_or(v)
}

/// Text form of [`sig6`]; empty for `None`.
pub fn fmt_sig6(v: Option<f64>) -> String {
    v.map(|x| sig6(x).to_string()).unwrap_or_default()
}

/// Rounds every float in a JSON tree to 6 significant digits.
pub fn round_floats(v: &mut Value) {
    match v {
        Value::Number(n) if n.is_f64() => {
            if let Some(x) = n.as_f64().and_then(|x| serde_json::Number::from_f64(sig6(x))) {
                *n = x;
            }
        }
        Value::Array(items) => items.iter_mut().for_each(round_floats),
        Value::Object(map) => map.values_mut().for_each(round_floats),
        _ => {}
    }
}

/// Pretty JSON with rounded floats and a trailing newline.
pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut v = serde_json::to_value(value).expect("plain data serializes");
    round_floats(&mut v);
    let mut s = serde_json::to_string_pretty(&v).expect("plain data serializes");
    s.push('\n');
    s
}

/// Writes `text` to `path`, creating parent directories.
pub fn write_file(path: &Path, text: &str) -> Result<(), RunError> {
    let fail = |source| RunError::Output { path: path.display().to_string(), source };
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(fail)?;
    }
    fs::write(path, text).map_err(fail)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsDoc {
    pub n_vms: u32,
    pub n_gpus: u32,
    pub sps: f64,
    pub baseline_sps: f64,
    pub speedup: f64,
    pub per_gpu: f64,
    /// Calculation over averaging time; null without averaging.
    pub granularity: Option<f64>,
    /// Same with matchmaking wait counted as averaging.
    pub granularity_with_wait: Option<f64>,
    /// Throughput limit as calculation time goes to zero; null if unbounded.
    pub asymptotic_sps: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingDoc {
    pub t_calc_s: f64,
    pub t_wait_s: f64,
    pub t_comm_s: f64,
    pub stage1_s: f64,
    pub stage2_s: f64,
    pub comm_overlap: f64,
    pub epoch_time_s: f64,
    pub matchmaking_bound: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeerDoc {
    pub site: String,
    pub rate_sps: f64,
    pub samples: f64,
    pub vm_usd_per_h: f64,
    pub egress_usd_per_h: BTreeMap<String, f64>,
    pub external_egress_usd_per_h: f64,
    pub dataload_usd_per_h: f64,
    pub total_usd_per_h: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostDoc {
    pub pricing_mode: String,
    pub vm_usd_per_h: f64,
    pub egress_usd_per_h: f64,
    pub dataload_usd_per_h: f64,
    pub usd_per_h: f64,
    pub usd_per_million: f64,
    pub usd_per_million_vm_only: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrafficDoc {
    pub calls_by_class: BTreeMap<String, usize>,
    pub bytes_by_class: BTreeMap<String, f64>,
    pub total_bytes: f64,
}

/// Full report of one simulated scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportDoc {
    pub scenario_id: String,
    pub model: String,
    pub tbs: u64,
    pub metrics: MetricsDoc,
    pub timing: TimingDoc,
    pub comm_params: CommDoc,
    pub groups: Vec<Vec<String>>,
    pub traffic: TrafficDoc,
    pub cost: CostDoc,
    pub peers: Vec<PeerDoc>,
}

fn class_map<T: Copy>(m: &BTreeMap<TrafficClass, T>) -> BTreeMap<String, T> {
    m.iter().map(|(c, v)| (c.key().to_string(), *v)).collect()
}

impl ReportDoc {
    pub fn from_evaluated(e: &Evaluated) -> Self {
        let (r, c, m) = (&e.report, &e.cost, &e.metrics);
        let peers = c
            .per_vm
            .iter()
            .enumerate()
            .map(|(i, line)| PeerDoc {
                site: line.site.clone(),
                rate_sps: r.peer_rates[i],
                samples: r.samples_per_peer[i],
                vm_usd_per_h: line.vm_usd_per_h,
                egress_usd_per_h: class_map(&line.egress_usd_per_h),
                external_egress_usd_per_h: line.external_egress(),
                dataload_usd_per_h: line.dataload_usd_per_h,
                total_usd_per_h: line.total(),
            })
            .collect();
        ReportDoc {
            scenario_id: r.scenario_id.clone(),
            model: e.scenario.model.name.clone(),
            tbs: e.scenario.run.tbs,
            metrics: MetricsDoc {
                n_vms: m.n_vms,
                n_gpus: m.n_gpus,
                sps: m.sps,
                baseline_sps: m.baseline_sps,
                speedup: m.speedup,
                per_gpu: m.per_gpu,
                granularity: m.granularity,
                granularity_with_wait: m.granularity_with_wait,
                asymptotic_sps: m.asymptotic_sps,
            },
            timing: TimingDoc {
                t_calc_s: r.t_calc_s,
                t_wait_s: r.t_wait_s,
                t_comm_s: r.t_comm_s,
                stage1_s: r.stage1_s,
                stage2_s: r.stage2_s,
                comm_overlap: r.comm_overlap,
                epoch_time_s: r.epoch_time_s,
                matchmaking_bound: r.matchmaking_bound,
            },
            comm_params: r.comm_params.into(),
            groups: r.groups.iter().map(|g| g.iter().map(|i| r.peer_sites[*i].clone()).collect()).collect(),
            traffic: TrafficDoc {
                calls_by_class: class_map(&r.call_counts()),
                bytes_by_class: class_map(&r.egress_by_class()),
                total_bytes: r.total_egress_bytes(),
            },
            cost: CostDoc {
                pricing_mode: c.pricing_mode.label().into(),
                vm_usd_per_h: c.vm_usd_per_h,
                egress_usd_per_h: c.egress_usd_per_h,
                dataload_usd_per_h: c.dataload_usd_per_h,
                usd_per_h: c.usd_per_h,
                usd_per_million: c.usd_per_million,
                usd_per_million_vm_only: c.usd_per_million_vm_only,
            },
            peers,
        }
    }
}

/// Result file of a calibration run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationOut {
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gpu: Option<String>,
    pub comm: CommDoc,
    /// Measured minus fitted averaging time per observation.
    pub residuals_s: Vec<f64>,
    pub penalties: BTreeMap<String, f64>,
    pub penalty_residuals: BTreeMap<String, Vec<f64>>,
}

impl CalibrationOut {
    pub fn new(id: &str, gpu: Option<&str>, cal: &Calibration) -> Self {
        CalibrationOut {
            id: id.into(),
            gpu: gpu.map(Into::into),
            comm: cal.comm.into(),
            residuals_s: cal.residuals_s.clone(),
            penalties: cal.penalties.clone(),
            penalty_residuals: cal.penalty_residuals.clone(),
        }
    }
}

pub const METRICS_HEADER: [&str; 7] =
    ["scenario_id", "n_gpus", "sps", "speedup", "per_gpu", "granularity", "asymptotic_sps"];

pub const COST_HEADER: [&str; 8] = [
    "scenario_id",
    "mode",
    "vm_usd_h",
    "egress_usd_h",
    "data_usd_h",
    "total_usd_h",
    "usd_per_1m",
    "usd_per_1m_vm_only",
];

/// Comma-separated text with a header row and LF line endings.
pub fn csv_text<S: AsRef<str>>(header: &[&str], rows: &[Vec<S>]) -> String {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for row in rows {
        w.write_record(row.iter().map(AsRef::as_ref)).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("input is UTF-8")
}

pub fn metrics_row(r: &ReportDoc) -> Vec<String> {
    let m = &r.metrics;
    vec![
        r.scenario_id.clone(),
        m.n_gpus.to_string(),
        fmt_sig6(Some(m.sps)),
        fmt_sig6(Some(m.speedup)),
        fmt_sig6(Some(m.per_gpu)),
        fmt_sig6(m.granularity),
        fmt_sig6(m.asymptotic_sps),
    ]
}

pub fn cost_row(r: &ReportDoc) -> Vec<String> {
    let c = &r.cost;
    vec![
        r.scenario_id.clone(),
        c.pricing_mode.clone(),
        fmt_sig6(Some(c.vm_usd_per_h)),
        fmt_sig6(Some(c.egress_usd_per_h)),
        fmt_sig6(Some(c.dataload_usd_per_h)),
        fmt_sig6(Some(c.usd_per_h)),
        fmt_sig6(Some(c.usd_per_million)),
        fmt_sig6(Some(c.usd_per_million_vm_only)),
    ]
}

pub fn metrics_csv(reports: &[ReportDoc]) -> String {
    csv_text(&METRICS_HEADER, &reports.iter().map(metrics_row).collect::<Vec<_>>())
}

pub fn cost_csv(reports: &[ReportDoc]) -> String {
    csv_text(&COST_HEADER, &reports.iter().map(cost_row).collect::<Vec<_>>())
}

/// Left-aligned first column, right-aligned rest.
pub fn text_table<S: AsRef<str>>(header: &[&str], rows: &[Vec<S>]) -> String {
    let mut widths: Vec<usize> = header.iter().map(|h| h.len()).collect();
    for row in rows {
        for (i, cell) in row.iter().enumerate() {
            widths[i] = widths[i].max(cell.as_ref().chars().count());
        }
    }
    let line = |cells: Vec<&str>| {
        let parts: Vec<String> = cells
            .iter()
            .enumerate()
            .map(|(i, c)| if i == 0 { format!("{c:<w$}", w = widths[i]) } else { format!("{c:>w$}", w = widths[i]) })
            .collect();
        parts.join("  ").trim_end().to_string() + "\n"
    };
    let mut out = line(header.to_vec());
    out += &line(widths.iter().map(|w| "-".repeat(*w)).collect::<Vec<_>>().iter().map(String::as_str).collect());
    for row in rows {
        out += &line(row.iter().map(AsRef::as_ref).collect());
    }
    out
}

const SUMMARY_HEADER: [&str; 9] =
    ["scenario", "gpus", "sps", "speedup", "per_gpu", "granularity", "usd_per_h", "usd_per_1m", "usd_per_1m_vm"];

/// Console summary of reports.
pub fn summary_table(reports: &[ReportDoc]) -> String {
    let na = |v: Option<f64>| v.map(|x| format!("{x:.2}")).unwrap_or_else(|| "n/a".into());
    let rows: Vec<Vec<String>> = reports
        .iter()
        .map(|r| {
            vec![
                r.scenario_id.clone(),
                r.metrics.n_gpus.to_string(),
                format!("{:.1}", r.metrics.sps),
                format!("{:.2}", r.metrics.speedup),
                format!("{:.2}", r.metrics.per_gpu),
                na(r.metrics.granularity),
                format!("{:.3}", r.cost.usd_per_h),
                format!("{:.3}", r.cost.usd_per_million),
                format!("{:.3}", r.cost.usd_per_million_vm_only),
            ]
        })
        .collect();
    text_table(&SUMMARY_HEADER, &rows)
}

/// Record of how an output set was produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    /// Arguments after the program name.
    pub command: Vec<String>,
    pub scenario_paths: Vec<String>,
    pub output_dir: String,
    /// No randomness is involved; equal inputs give equal files.
    pub deterministic: bool,
}

impl RunManifest {
    pub fn new(command: &[String], scenario_paths: Vec<String>, output_dir: &Path) -> Self {
        RunManifest {
            tool: env!("CARGO_PKG_NAME").into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: command.to_vec(),
            scenario_paths,
            output_dir: output_dir.display().to_string(),
            deterministic: true,
        }
    }
}

pub const MANIFEST_FILE: &str = "manifest.json";
pub const REPORTS_DIR: &str = "reports";

/// File name of the `i`-th report of an output set.
pub fn report_file(dir: &Path, i: usize, id: &str) -> PathBuf {
    let safe: String = id.chars().map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' }).collect();
    dir.join(REPORTS_DIR).join(format!("{i:03}_{safe}.json"))
}

/// Writes reports, metrics and cost CSVs and the manifest.
pub fn write_output_set(dir: &Path, reports: &[ReportDoc], manifest: &RunManifest) -> Result<(), RunError> {
    for (i, r) in reports.iter().enumerate() {
        write_file(&report_file(dir, i, &r.scenario_id), &to_json(r))?;
    }
    write_file(&dir.join("metrics.csv"), &metrics_csv(reports))?;
    write_file(&dir.join("cost.csv"), &cost_csv(reports))?;
    write_file(&dir.join(MANIFEST_FILE), &to_json(manifest))
}

/// Reads the reports of an output set in file order.
pub fn read_output_set(dir: &Path) -> Result<Vec<ReportDoc>, crate::LoadError> {
    let reports_dir = dir.join(REPORTS_DIR);
    if !reports_dir.is_dir() {
        return Err(crate::LoadError::NotFound { what: "report directory", path: reports_dir });
    }
    let io = |source| crate::LoadError::Io { path: reports_dir.clone(), source };
    let mut files: Vec<PathBuf> = fs::read_dir(&reports_dir)
        .map_err(io)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    files.sort();
    files
        .iter()
        .map(|p| {
            let text = fs::read_to_string(p).map_err(|source| crate::LoadError::Io { path: p.clone(), source })?;
            crate::load::parse_json(&text, p)
        })
        .collect()
}
