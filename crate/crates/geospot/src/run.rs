//! Simulating scenarios and scaled copies of them.

use geospot_core::analytics::{asymptotic_throughput, granularity, granularity_with_wait, speedup};
use geospot_core::catalog::{CatalogError, Placement, Scenario};
use geospot_core::costing::{cost_report, CostReport};
use geospot_core::optimizer::OptError;
use geospot_core::protocol::{calibrate, simulate_epoch, Calibration, CalibrationError, EpochReport, SimError};

use crate::error::LoadError;

/// Failure of a command after its inputs were read.
#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error(transparent)]
    Load(#[from] LoadError),
    #[error("simulation failed: {0}")]
    Sim(#[from] SimError),
    #[error("{0}")]
    Catalog(#[from] CatalogError),
    #[error("calibration failed: {0}")]
    Calibration(#[from] CalibrationError),
    #[error("search failed: {0}")]
    Search(#[from] OptError),
    /// No placement satisfies the search constraints.
    #[error("infeasible search: {0}")]
    Infeasible(String),
    #[error("cannot write {path}: {source}")]
    Output { path: String, source: std::io::Error },
}

/// A simulated scenario with its cost and headline metrics.
#[derive(Debug, Clone)]
pub struct Evaluated {
    pub scenario: Scenario,
    pub report: EpochReport,
    pub cost: CostReport,
    pub metrics: Metrics,
}

/// Headline numbers of one simulated round.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Metrics {
    pub n_vms: u32,
    pub n_gpus: u32,
    pub sps: f64,
    /// Single-device throughput of the first placed GPU type.
    pub baseline_sps: f64,
    pub speedup: f64,
    pub per_gpu: f64,
    pub granularity: Option<f64>,
    pub granularity_with_wait: Option<f64>,
    pub asymptotic_sps: Option<f64>,
}

/// GPU type whose single-device throughput serves as the speedup reference.
pub fn reference_gpu(s: &Scenario) -> Option<&str> {
    let first = s.placement.iter().find(|p| p.vm_count > 0)?;
    s.site(&first.site).map(|site| site.gpu.as_str())
}

pub fn evaluate(s: &Scenario) -> Result<Evaluated, RunError> {
    let report = simulate_epoch(s)?;
    let cost = cost_report(s, &report)?;
    let gpu = reference_gpu(s).ok_or_else(|| CatalogError::invalid("placement", "empty placement"))?;
    let baseline_sps = s.compute.baseline(gpu, &s.model.name)?;
    let n_gpus = s.total_gpus();
    let sp = speedup(&report, baseline_sps, n_gpus);
    let metrics = Metrics {
        n_vms: s.total_vms(),
        n_gpus,
        sps: report.sps_global,
        baseline_sps,
        speedup: sp.speedup,
        per_gpu: sp.per_gpu,
        granularity: granularity(&report),
        granularity_with_wait: granularity_with_wait(&report),
        asymptotic_sps: asymptotic_throughput(&report),
    };
    Ok(Evaluated { scenario: s.clone(), report, cost, metrics })
}

fn placed_sites(s: &Scenario) -> Vec<String> {
    let used: Vec<String> = s.placement.iter().filter(|p| p.vm_count > 0).map(|p| p.site.clone()).collect();
    if used.is_empty() {
        s.placement.iter().map(|p| p.site.clone()).collect()
    } else {
        used
    }
}

fn placement_from(order: &[String], counts: &[u32]) -> Vec<Placement> {
    order.iter().zip(counts).map(|(site, n)| Placement { site: site.clone(), vm_count: *n }).collect()
}

/// Copy with `n` VMs dealt round-robin over the scenario's placed sites.
pub fn with_vm_count(s: &Scenario, n: u32) -> Result<Scenario, LoadError> {
    let order = placed_sites(s);
    if order.is_empty() || n == 0 {
        return Err(LoadError::Validation { key: "placement".into(), message: "empty placement".into() });
    }
    let mut counts = vec![0u32; order.len()];
    for i in 0..n as usize {
        counts[i % order.len()] += 1;
    }
    let mut out = s.clone();
    out.placement = placement_from(&order, &counts);
    Ok(out)
}

/// Copy with VMs dealt round-robin over the placed sites until the
/// placement holds exactly `gpus` devices.
pub fn with_gpu_count(s: &Scenario, gpus: u32) -> Result<Scenario, LoadError> {
    let order = placed_sites(s);
    let devices = order
        .iter()
        .map(|id| {
            let site = s.site(id).ok_or_else(|| LoadError::Validation {
                key: format!("placement.{id}"),
                message: "unknown site".into(),
            })?;
            Ok(s.compute.gpu(&site.gpu)?.devices)
        })
        .collect::<Result<Vec<u32>, LoadError>>()?;
    if order.is_empty() || gpus == 0 {
        return Err(LoadError::Validation { key: "placement".into(), message: "empty placement".into() });
    }
    let mut counts = vec![0u32; order.len()];
    let mut total = 0;
    let mut i = 0;
    while total < gpus {
        counts[i % order.len()] += 1;
        total += devices[i % order.len()];
        i += 1;
    }
    if total != gpus {
        return Err(LoadError::Validation {
            key: "gpus".into(),
            message: format!("{gpus} GPUs do not fill whole VMs of this placement"),
        });
    }
    let mut out = s.clone();
    out.placement = placement_from(&order, &counts);
    Ok(out)
}

/// Simulates the scenario at each GPU count and target batch size.
pub fn sweep(s: &Scenario, gpus: &[u32], tbs: &[u64]) -> Result<Vec<Evaluated>, RunError> {
    let tbs_list: Vec<u64> = if tbs.is_empty() { vec![s.run.tbs] } else { tbs.to_vec() };
    let mut out = Vec::with_capacity(gpus.len() * tbs_list.len());
    for &t in &tbs_list {
        for &n in gpus {
            let mut scaled = with_gpu_count(s, n)?;
            scaled.run.tbs = t;
            scaled.id = if tbs.is_empty() { format!("{}-{n}", s.id) } else { format!("{}-{n}-tbs{t}", s.id) };
            scaled.validate().map_err(LoadError::from)?;
            out.push(evaluate(&scaled)?);
        }
    }
    Ok(out)
}

/// Fits overheads and penalties from a calibration file.
pub fn run_calibration(input: &crate::load::CalibrationInput) -> Result<Calibration, RunError> {
    Ok(calibrate(&input.observations, &input.pairs, input.spec)?)
}

/// Installs fitted overheads for `gpu` and every fitted penalty.
pub fn apply_calibration(s: &mut Scenario, gpu: &str, cal: &Calibration) -> Result<(), RunError> {
    let spec = s
        .compute
        .gpus
        .get_mut(gpu)
        .ok_or_else(|| CatalogError::invalid(format!("gpu.{gpu}"), "unknown gpu type"))?;
    spec.comm = Some(cal.comm);
    for (model, p) in &cal.penalties {
        s.compute.penalties.insert(model.clone(), *p);
    }
    Ok(())
}
