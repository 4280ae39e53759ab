//! Hourly and per-sample cost of a simulated placement.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::catalog::{egress_rate, CatalogError, PriceBook, PricingMode, Scenario, Site, TrafficClass};
use crate::protocol::EpochReport;
use crate::BYTES_PER_GB;

/// Rental cost of a placement.
#[derive(Debug, Clone, PartialEq)]
pub struct VmCost {
    /// USD per hour of one VM at each placed site, in placement order.
    pub per_site: Vec<(String, u32, f64)>,
    pub total_usd_per_h: f64,
}

/// Sums `vm_count * rate` over the placement.
pub fn vm_cost(placement: &[(&Site, u32)], prices: &PriceBook, mode: PricingMode) -> Result<VmCost, CatalogError> {
    let mut per_site = Vec::with_capacity(placement.len());
    let mut total = 0.0;
    for (site, count) in placement {
        let rate = prices
            .vm_rate(site.cloud, &site.gpu, mode)
            .ok_or_else(|| CatalogError::MissingRate(format!("{} VM price for site {}", mode.label(), site.id)))?;
        per_site.push((site.id.clone(), *count, rate));
        total += rate * f64::from(*count);
    }
    Ok(VmCost { per_site, total_usd_per_h: total })
}

/// Egress spend of each peer in USD per hour, by class.
pub fn egress_cost(report: &EpochReport, sites: &[&Site], prices: &PriceBook) -> Result<Vec<BTreeMap<TrafficClass, f64>>, CatalogError> {
    let mut out = Vec::with_capacity(report.egress_bytes.len());
    for (peer, bytes) in report.egress_bytes.iter().enumerate() {
        let mut m = BTreeMap::new();
        for (class, b) in bytes {
            let rate = egress_rate(prices, sites[peer], *class)?;
            m.insert(*class, b / BYTES_PER_GB * rate / report.epoch_time_s * 3600.0);
        }
        out.push(m);
    }
    Ok(out)
}

/// USD per hour to stream training samples from object storage.
pub fn dataload_cost(sps: f64, sample_bytes: f64, ingress_usd_per_gb: f64) -> f64 {
    sps * sample_bytes * 3600.0 * ingress_usd_per_gb / BYTES_PER_GB
}

/// USD per million samples at a given hourly spend and throughput.
pub fn usd_per_million(usd_per_h: f64, sps: f64) -> f64 {
    usd_per_h / (sps * 3600.0) * 1e6
}

/// Cost of one VM.
#[derive(Debug, Clone, PartialEq)]
pub struct VmLine {
    pub site: String,
    pub vm_usd_per_h: f64,
    pub egress_usd_per_h: BTreeMap<TrafficClass, f64>,
    pub dataload_usd_per_h: f64,
}

impl VmLine {
    pub fn egress_total(&self) -> f64 {
        self.egress_usd_per_h.values().sum()
    }

    /// Egress that leaves the sender's zone.
    pub fn external_egress(&self) -> f64 {
        self.egress_usd_per_h.iter().filter(|(c, _)| c.is_external()).map(|(_, v)| v).sum()
    }

    pub fn total(&self) -> f64 {
        self.vm_usd_per_h + self.egress_total() + self.dataload_usd_per_h
    }
}

/// Full cost breakdown of a simulated placement.
#[derive(Debug, Clone, PartialEq)]
pub struct CostReport {
    pub scenario_id: String,
    pub pricing_mode: PricingMode,
    pub per_vm: Vec<VmLine>,
    pub vm_usd_per_h: f64,
    pub egress_usd_per_h: f64,
    pub dataload_usd_per_h: f64,
    pub usd_per_h: f64,
    pub sps_global: f64,
    pub usd_per_million: f64,
    /// Rental only, without egress and data loading.
    pub usd_per_million_vm_only: f64,
}

/// Assembles VM, egress and data loading costs of a report.
pub fn cost_report(scenario: &Scenario, report: &EpochReport) -> Result<CostReport, CatalogError> {
    let sites = scenario.peer_sites()?;
    let mode = scenario.run.pricing_mode;
    let egress = egress_cost(report, &sites, &scenario.prices)?;
    let sample_bytes = scenario.model.sample_bytes as f64;
    let ingress = scenario.prices.dataset_ingress_usd_per_gb;
    let mut per_vm = Vec::with_capacity(sites.len());
    for (i, (site, eg)) in sites.iter().zip(egress).enumerate() {
        let vm = vm_cost(&[(site, 1)], &scenario.prices, mode)?.total_usd_per_h;
        let peer_sps = report.samples_per_peer[i] / report.epoch_time_s;
        per_vm.push(VmLine {
            site: site.id.clone(),
            vm_usd_per_h: vm,
            egress_usd_per_h: eg,
            dataload_usd_per_h: dataload_cost(peer_sps, sample_bytes, ingress),
        });
    }
    let vm_usd_per_h: f64 = per_vm.iter().map(|l| l.vm_usd_per_h).sum();
    let egress_usd_per_h: f64 = per_vm.iter().map(VmLine::egress_total).sum();
    let dataload_usd_per_h: f64 = per_vm.iter().map(|l| l.dataload_usd_per_h).sum();
    let usd_per_h = vm_usd_per_h + egress_usd_per_h + dataload_usd_per_h;
    Ok(CostReport {
        scenario_id: scenario.id.clone(),
        pricing_mode: mode,
        per_vm,
        vm_usd_per_h,
        egress_usd_per_h,
        dataload_usd_per_h,
        usd_per_h,
        sps_global: report.sps_global,
        usd_per_million: usd_per_million(usd_per_h, report.sps_global),
        usd_per_million_vm_only: usd_per_million(vm_usd_per_h, report.sps_global),
    })
}

impl CostReport {
    /// Mean per-VM value of `f` over the VMs at sites matching `keep`.
    pub fn mean_over(&self, keep: impl Fn(&str) -> bool, f: impl Fn(&VmLine) -> f64) -> Option<f64> {
        let picked: Vec<f64> = self.per_vm.iter().filter(|l| keep(&l.site)).map(f).collect();
        if picked.is_empty() {
            None
        } else {
            Some(picked.iter().sum::<f64>() / picked.len() as f64)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::{Cloud, Continent, VmPrice};

    fn site(cloud: Cloud, gpu: &str) -> Site {
        Site {
            id: alloc::format!("{cloud}-{gpu}"),
            cloud,
            continent: Continent::Us,
            region: "r".into(),
            zone: "z".into(),
            gpu: gpu.into(),
            net_group: "g".into(),
        }
    }

    fn book() -> PriceBook {
        let mut b = PriceBook::default();
        b.vm.insert((Cloud::Gc, "T4".into()), VmPrice { spot_usd_per_h: 0.18, ondemand_usd_per_h: 0.572 });
        b.vm.insert((Cloud::Lambda, "A10".into()), VmPrice { spot_usd_per_h: 0.60, ondemand_usd_per_h: 0.60 });
        b
    }

    #[test]
    fn rental_sums() {
        let t4 = site(Cloud::Gc, "T4");
        let a10 = site(Cloud::Lambda, "A10");
        let c = vm_cost(&[(&t4, 8)], &book(), PricingMode::Spot).unwrap();
        assert!((c.total_usd_per_h - 1.44).abs() < 1e-12);
        let c = vm_cost(&[(&a10, 8)], &book(), PricingMode::Spot).unwrap();
        assert!((c.total_usd_per_h - 4.80).abs() < 1e-12);
        let c = vm_cost(&[(&t4, 1)], &book(), PricingMode::OnDemand).unwrap();
        assert_eq!(c.total_usd_per_h, 0.572);
        assert_eq!(vm_cost(&[], &book(), PricingMode::Spot).unwrap().total_usd_per_h, 0.0);
        let missing = site(Cloud::Aws, "T4");
        assert!(matches!(vm_cost(&[(&missing, 1)], &book(), PricingMode::Spot), Err(CatalogError::MissingRate(m)) if m.contains("AWS-T4")));
    }

    #[test]
    fn per_million_goldens() {
        assert!((usd_per_million(6.30, 413.0) - 4.237).abs() < 5e-4);
        assert!((usd_per_million(0.18, 80.0) - 0.625).abs() < 5e-4);
        assert!((usd_per_million(0.60, 185.0) - 0.901).abs() < 5e-4);
        assert!((usd_per_million(4.80, 620.6) - 2.148).abs() < 5e-4);
    }

    #[test]
    fn data_loading() {
        assert_eq!(dataload_cost(100.0, 1e6, 0.0), 0.0);
        assert!((dataload_cost(1.0, 1e9 / 3600.0, 0.01) - 0.01).abs() < 1e-15);
    }
}
