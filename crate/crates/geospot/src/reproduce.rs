//! Side-by-side comparison of the bundled scenario suite with published
//! measurements.

use std::path::Path;

use geospot_core::analytics::project_scaling;
use geospot_core::catalog::{Cloud, Placement, Scenario, TrafficClass};
use geospot_core::costing::usd_per_million;
use geospot_core::netmodel::{aggregate_bandwidth, single_stream_bandwidth};
use geospot_core::optimizer::{search, Objective, SearchOptions};
use serde::Serialize;

use crate::load::{Loader, DEFAULT_MODELS};
use crate::report::{csv_text, fmt_sig6, text_table};
use crate::run::{apply_calibration, evaluate, run_calibration, with_vm_count, Evaluated, RunError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Pass,
    Fail,
    /// Shown for context, not checked.
    Info,
}

impl Status {
    pub fn label(self) -> &'static str {
        match self {
            Status::Pass => "PASS",
            Status::Fail => "FAIL",
            Status::Info => "info",
        }
    }

    fn of(ok: bool) -> Self {
        if ok {
            Status::Pass
        } else {
            Status::Fail
        }
    }
}

/// One compared value.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Cell {
    pub section: String,
    pub name: String,
    pub expected: String,
    pub simulated: String,
    pub rel_error: Option<f64>,
    pub tolerance: String,
    pub status: Status,
}

fn rel_err(expected: f64, simulated: f64) -> f64 {
    (simulated - expected) / expected
}

struct Cells {
    section: &'static str,
    out: Vec<Cell>,
}

impl Cells {
    fn push(&mut self, name: impl Into<String>, expected: String, simulated: String, rel: Option<f64>, tol: String, status: Status) {
        self.out.push(Cell {
            section: self.section.into(),
            name: name.into(),
            expected,
            simulated,
            rel_error: rel,
            tolerance: tol,
            status,
        });
    }

    fn rel(&mut self, name: impl Into<String>, expected: f64, simulated: f64, tol: f64) {
        let e = rel_err(expected, simulated);
        self.push(name, fmt_sig6(Some(expected)), fmt_sig6(Some(simulated)), Some(e), format!("±{}%", tol * 100.0), Status::of(e.abs() <= tol));
    }

    fn abs(&mut self, name: impl Into<String>, expected: f64, simulated: f64, tol: f64) {
        let ok = (simulated - expected).abs() <= tol;
        self.push(name, fmt_sig6(Some(expected)), fmt_sig6(Some(simulated)), Some(rel_err(expected, simulated)), format!("±{tol}"), Status::of(ok));
    }

    fn range(&mut self, name: impl Into<String>, published: f64, simulated: f64, lo: f64, hi: f64) {
        let ok = simulated >= lo && simulated <= hi;
        self.push(name, fmt_sig6(Some(published)), fmt_sig6(Some(simulated)), None, format!("[{lo}, {hi}]"), Status::of(ok));
    }

    fn exact(&mut self, name: impl Into<String>, expected: impl ToString, simulated: impl ToString) {
        let (e, s) = (expected.to_string(), simulated.to_string());
        let ok = e == s;
        self.push(name, e, s, None, "exact".into(), Status::of(ok));
    }

    fn info(&mut self, name: impl Into<String>, published: Option<f64>, simulated: f64) {
        let rel = published.map(|p| rel_err(p, simulated));
        self.push(name, fmt_sig6(published), fmt_sig6(Some(simulated)), rel, String::new(), Status::Info);
    }
}

/// Published throughput of bundled scenarios, where reported.
const PUBLISHED_SPS: [(&str, f64); 16] = [
    ("A-2-CV", 70.1),
    ("B-2-CV", 68.4),
    ("A-4-CV", 140.4),
    ("B-4-CV", 135.8),
    ("A-8-CV", 261.9),
    ("A-2-NLP", 211.4),
    ("B-2-NLP", 177.3),
    ("A-8-NLP", 575.1),
    ("E-A-8-CV", 316.8),
    ("E-A-8-NLP", 556.7),
    ("E-B-8-CV", 283.5),
    ("E-B-8-NLP", 330.6),
    ("E-C-8-CV", 429.3),
    ("E-C-8-NLP", 223.7),
    ("F-A-8-CV", 507.0),
    ("F-C-8-CV", 510.0),
];

/// Speedups over one A10 at 2, 3, 4 and 8 GPUs.
pub const A10_SPEEDUPS: [(&str, [f64; 4]); 8] = [
    ("RN18", [1.31, 1.77, 2.07, 3.16]),
    ("RN50", [1.28, 1.86, 2.39, 3.72]),
    ("RN152", [1.46, 2.11, 2.69, 4.37]),
    ("WRN101", [0.95, 1.38, 1.79, 3.01]),
    ("CONV", [0.94, 1.39, 1.82, 3.34]),
    ("RBase", [1.07, 1.49, 1.79, 2.38]),
    ("RLrg", [0.95, 1.30, 1.59, 2.30]),
    ("RXLM", [0.93, 1.28, 1.56, 2.29]),
];

pub const A10_GPU_COUNTS: [u32; 4] = [2, 3, 4, 8];

fn scenario(loader: &Loader, name: &str) -> Result<Scenario, RunError> {
    Ok(loader.load_scenario(Path::new("scenarios").join(name))?)
}

fn eval(loader: &Loader, name: &str) -> Result<Evaluated, RunError> {
    evaluate(&scenario(loader, name)?)
}

fn with_placement(s: &Scenario, site: &str, n: u32) -> Scenario {
    let mut out = s.clone();
    out.placement = vec![Placement { site: site.into(), vm_count: n }];
    out
}

/// A10 scenario for `model` with overheads and penalties fitted from the
/// bundled calibration file.
pub fn calibrated_a10(loader: &Loader, model: &str) -> Result<Scenario, RunError> {
    let input = loader.load_calibration("calibration_a10.json")?;
    let cal = run_calibration(&input)?;
    let mut s = scenario(loader, "a10_conv.json")?;
    s.model = loader.model(Some(loader.data_dir()), DEFAULT_MODELS, model)?;
    s.id = format!("A10-{model}");
    apply_calibration(&mut s, "A10", &cal)?;
    Ok(s)
}

/// Runs every comparison.
pub fn reproduce(loader: &Loader) -> Result<Vec<Cell>, RunError> {
    let mut all = Vec::new();

    let mut c = Cells { section: "cost arithmetic", out: Vec::new() };
    c.rel("DGX-2 6.30 $/h at 413 SPS, $/1M", 4.24, usd_per_million(6.30, 413.0), 0.01);
    c.rel("1xT4 0.18 $/h at 80 SPS, $/1M", 0.62, usd_per_million(0.18, 80.0), 0.01);
    c.rel("1xA10 0.60 $/h at 185 SPS, $/1M", 0.90, usd_per_million(0.60, 185.0), 0.01);
    c.rel("8xA10 4.80 $/h at 620.6 SPS, $/1M", 2.15, usd_per_million(4.80, 620.6), 0.01);
    all.append(&mut c.out);

    let mut c = Cells { section: "scaling", out: Vec::new() };
    let p = |g| project_scaling(g, 2.0).map(|p| p.predicted_speedup_upper).unwrap_or(f64::NAN);
    c.abs("doubling peers at granularity 1", 1.333, p(1.0), 0.005);
    c.abs("doubling peers at granularity 10", 1.833, p(10.0), 0.005);
    all.append(&mut c.out);

    let mut c = Cells { section: "A10 speedups", out: Vec::new() };
    for (model, published) in A10_SPEEDUPS {
        let base = calibrated_a10(loader, model)?;
        let mut last = f64::NEG_INFINITY;
        let mut monotone = true;
        for (n, want) in A10_GPU_COUNTS.iter().zip(published) {
            let e = evaluate(&with_vm_count(&base, *n)?)?;
            c.rel(format!("{model} {n}xA10 speedup"), want, e.metrics.speedup, 0.20);
            monotone &= e.metrics.speedup >= last;
            last = e.metrics.speedup;
        }
        c.exact(format!("{model} speedup nondecreasing in GPUs"), true, monotone);
    }
    all.append(&mut c.out);

    let mut c = Cells { section: "granularity", out: Vec::new() };
    let conv2 = evaluate(&with_vm_count(&calibrated_a10(loader, "CONV")?, 2)?)?;
    c.rel("2xA10 CONV granularity", 21.6, conv2.metrics.granularity.unwrap_or(f64::NAN), 0.20);
    let a8_nlp = eval(loader, "a8_nlp.json")?;
    c.rel("A-8 NLP granularity", 1.15, a8_nlp.metrics.granularity.unwrap_or(f64::NAN), 0.25);
    all.append(&mut c.out);

    let mut c = Cells { section: "geo-distributed", out: Vec::new() };
    let sps = |name: &str| eval(loader, name).map(|e| e.metrics.sps);
    let change = |a: f64, b: f64| b / a - 1.0;
    c.range("B-2 vs A-2 CV throughput change", 68.4 / 70.1 - 1.0, change(sps("a2_cv.json")?, sps("b2_cv.json")?), -0.10, 0.10);
    c.range("B-2 vs A-2 NLP slowdown", 1.0 - 177.3 / 211.4, -change(sps("a2_nlp.json")?, sps("b2_nlp.json")?), 0.10, 0.25);
    c.range("C-8 vs A-8 CV slowdown", 0.07, -change(sps("a8_cv.json")?, sps("c8_cv.json")?), 0.0, 0.15);
    all.append(&mut c.out);

    let mut c = Cells { section: "egress calls", out: Vec::new() };
    let c8 = eval(loader, "c8_nlp.json")?;
    let calls = c8.report.call_counts();
    let count = |k: TrafficClass| calls.get(&k).copied().unwrap_or(0);
    c.exact("C-8 intra-group calls", 8, count(TrafficClass::IntraZone));
    c.exact("C-8 inter-continental calls", 6, count(TrafficClass::BetweenContinents));
    c.exact("C-8 calls involving OCE", 6, count(TrafficClass::AnyToOce));
    c.exact("C-8 total calls", 20, c8.report.calls.len());
    all.append(&mut c.out);

    let mut c = Cells { section: "egress cost", out: Vec::new() };
    let ext = c8.cost.mean_over(|_| true, |l| l.external_egress()).unwrap_or(f64::NAN);
    c.rel("C-8 NLP external egress per VM, GC ($/h)", 4.329, ext, 0.25);
    let aws = evaluate(&scenario(loader, "c8_nlp.json")?.with_cloud(Cloud::Aws))?;
    let total = aws.cost.mean_over(|_| true, |l| l.total()).unwrap_or(f64::NAN);
    c.rel("C-8 NLP total per VM, AWS ($/h)", 1.376, total, 0.25);
    let d3 = eval(loader, "d3_nlp.json")?;
    let azure = d3.cost.mean_over(|s| s == "azure", |l| l.external_egress()).unwrap_or(f64::NAN);
    c.rel("D-3 NLP Azure external egress per VM ($/h)", 0.763, azure, 0.25);
    all.append(&mut c.out);

    let mut c = Cells { section: "data loading", out: Vec::new() };
    let per_vm_load = |e: &Evaluated| e.cost.mean_over(|_| true, |l| l.dataload_usd_per_h).unwrap_or(f64::NAN);
    c.rel("D-1 CV data loading per VM ($/h)", 0.144, per_vm_load(&eval(loader, "d1_cv.json")?), 0.10);
    c.rel("D-1 NLP data loading per VM ($/h)", 0.083, per_vm_load(&eval(loader, "d1_nlp.json")?), 0.10);
    all.append(&mut c.out);

    let mut c = Cells { section: "tcp", out: Vec::new() };
    let net = loader.network_table("net_hybrid.json")?;
    let window = geospot_core::catalog::RunConfig::DEFAULT_WINDOW_BYTES;
    for to in ["GC_US", "LAMBDA_US"] {
        let link = net.link("RTX8000", to).copied().ok_or_else(|| missing_link("RTX8000", to))?;
        let mbit = single_stream_bandwidth(&link, window) * 1000.0;
        c.range(format!("single stream RTX8000-{to} at {} ms (Mbit/s)", link.latency_ms), 65.0, mbit, 50.0, 80.0);
    }
    for (to, want) in [("GC_EU", 6.0), ("GC_US", 4.0)] {
        let link = net.link("RTX8000", to).copied().ok_or_else(|| missing_link("RTX8000", to))?;
        c.exact(format!("80 streams RTX8000-{to} (Gbit/s)"), want, aggregate_bandwidth(&link, 80, window, None));
    }
    all.append(&mut c.out);

    let mut c = Cells { section: "cost per sample", out: Vec::new() };
    let search_conv = scenario(loader, "search_conv.json")?;
    let vm_only = |site: &str, n: u32| evaluate(&with_placement(&search_conv, site, n)).map(|e| e.cost.usd_per_million_vm_only);
    c.rel("DGX-2 CONV, rental only ($/1M)", 4.24, vm_only("dgx2", 1)?, 0.01);
    c.rel("1xT4 CONV, rental only ($/1M)", 0.62, vm_only("us", 1)?, 0.01);
    c.rel("1xA10 CONV, rental only ($/1M)", 0.90, vm_only("lambda", 1)?, 0.01);
    c.rel("8xA10 CONV, rental only ($/1M)", 2.15, vm_only("lambda", 8)?, 0.20);
    let t4 = evaluate(&with_placement(&search_conv, "us", 8))?;
    c.rel("8xT4 CONV, with egress and data loading ($/1M)", 1.77, t4.cost.usd_per_million, 0.15);
    all.append(&mut c.out);

    let mut c = Cells { section: "placement search", out: Vec::new() };
    let search_rxlm = scenario(loader, "search_rxlm.json")?;
    for (label, template, objective, want) in [
        ("CONV cheapest per sample", &search_conv, Objective::MinUsdPerMillion, "usx8"),
        ("CONV fastest", &search_conv, Objective::MaxSps, "lambdax8"),
        ("RXLM cheapest per sample", &search_rxlm, Objective::MinUsdPerMillion, "dgx2x1"),
    ] {
        let mut spec = template.search.clone().ok_or_else(|| RunError::Infeasible(format!("{} has no search section", template.id)))?;
        spec.objective = objective;
        let out = search(&spec, template, SearchOptions::default())?;
        let got = out.ranked.first().map_or_else(|| "none".to_string(), |r| r.encoding.clone());
        c.exact(label, want, got);
    }
    all.append(&mut c.out);

    let mut c = Cells { section: "bundled scenarios (SPS)", out: Vec::new() };
    for name in bundled_scenarios(loader)? {
        let s = scenario(loader, &name)?;
        if s.search.is_some() {
            continue;
        }
        let e = evaluate(&s)?;
        let published = PUBLISHED_SPS.iter().find(|(id, _)| *id == s.id).map(|(_, v)| *v);
        c.info(s.id.clone(), published, e.metrics.sps);
    }
    all.append(&mut c.out);

    Ok(all)
}

fn missing_link(a: &str, b: &str) -> RunError {
    RunError::Load(crate::LoadError::Validation { key: format!("network.{a}-{b}"), message: "missing network entry".into() })
}

/// Scenario file names in the bundled directory, sorted.
pub fn bundled_scenarios(loader: &Loader) -> Result<Vec<String>, RunError> {
    let dir = loader.data_dir().join("scenarios");
    let entries = std::fs::read_dir(&dir).map_err(|source| crate::LoadError::Io { path: dir.clone(), source })?;
    let mut names: Vec<String> = entries
        .filter_map(|e| e.ok())
        .map(|e| e.file_name().to_string_lossy().into_owned())
        .filter(|n| n.ends_with(".json"))
        .collect();
    names.sort();
    Ok(names)
}

const HEADER: [&str; 7] = ["section", "cell", "published", "simulated", "rel_error", "tolerance", "status"];

fn rows(cells: &[Cell]) -> Vec<Vec<String>> {
    cells
        .iter()
        .map(|c| {
            vec![
                c.section.clone(),
                c.name.clone(),
                c.expected.clone(),
                c.simulated.clone(),
                c.rel_error.map(|e| format!("{:+.1}%", e * 100.0)).unwrap_or_default(),
                c.tolerance.clone(),
                c.status.label().into(),
            ]
        })
        .collect()
}

pub fn cells_table(cells: &[Cell]) -> String {
    text_table(&HEADER, &rows(cells))
}

pub fn cells_csv(cells: &[Cell]) -> String {
    let mut r = rows(cells);
    for (row, c) in r.iter_mut().zip(cells) {
        row[4] = fmt_sig6(c.rel_error);
    }
    csv_text(&HEADER, &r)
}

pub fn failing(cells: &[Cell]) -> Vec<&Cell> {
    cells.iter().filter(|c| c.status == Status::Fail).collect()
}
