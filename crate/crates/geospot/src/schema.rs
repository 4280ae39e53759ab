//! On-disk document shapes and their conversion to and from model types.
//!
//! Every unit is spelled out in the key name. References to other files are
//! plain strings; the loader resolves them before conversion.

use std::collections::BTreeMap;

use geospot_core::catalog::{
    Cloud, ComputeProfile, Continent, Domain, EgressPrices, GpuSpec, ModelProfile, Placement, PriceBook, PricingMode,
    RunConfig, Site, TrafficClass, VmPrice,
};
use geospot_core::netmodel::{Link, NetworkMatrix};
use geospot_core::optimizer::{CatalogEntry, Objective, SearchSpec};
use geospot_core::protocol::CommParams;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::LoadError;

fn default_bytes_per_param() -> u32 {
    2
}

fn default_devices() -> u32 {
    1
}

fn default_ingress() -> f64 {
    0.01
}

fn default_top_k() -> usize {
    5
}

fn is_default<T: Default + PartialEq>(v: &T) -> bool {
    *v == T::default()
}

/// Scenario file. Reference fields hold either a file name or an inline document.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioDoc {
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
    pub sites: Vec<SiteDoc>,
    pub placement: Vec<PlacementDoc>,
    /// Model name looked up in `models`, or an inline model.
    pub model: Value,
    /// Model table used to resolve a model name.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub models: Option<String>,
    pub run: RunDoc,
    /// File name, inline link table, or a list of either, merged in order.
    pub network: Value,
    pub prices: Value,
    pub compute: Value,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub search: Option<SearchDoc>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SiteDoc {
    pub id: String,
    pub cloud: String,
    pub continent: String,
    pub region: String,
    pub zone: String,
    pub gpu: String,
    /// Row/column name in the network tables. Defaults to the continent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub net_group: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlacementDoc {
    pub site: String,
    pub vm_count: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelDoc {
    pub name: String,
    pub domain: String,
    pub params: u64,
    #[serde(default = "default_bytes_per_param")]
    pub bytes_per_param: u32,
    pub sample_bytes: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelsDoc {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
    pub models: Vec<ModelDoc>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunDoc {
    pub tbs: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub matchmaking_floor_s: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pricing_mode: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tcp_window_bytes: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub comm_overlap: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grouping: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinkDoc {
    pub from: String,
    pub to: String,
    pub bandwidth_gbit: f64,
    pub latency_ms: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ceiling_gbit: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkDoc {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
    pub links: Vec<LinkDoc>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VmPriceDoc {
    pub cloud: String,
    pub gpu: String,
    pub vm_spot_usd_per_h: f64,
    pub vm_ondemand_usd_per_h: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PricesDoc {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
    #[serde(default = "default_ingress")]
    pub dataset_ingress_price_per_gb_usd: f64,
    /// Per cloud, per traffic class key.
    pub egress_price_per_gb_usd: BTreeMap<String, BTreeMap<String, f64>>,
    pub vm: Vec<VmPriceDoc>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CommDoc {
    pub beta_s: f64,
    pub gamma_s: f64,
    pub payload_scale: f64,
}

impl From<CommDoc> for CommParams {
    fn from(d: CommDoc) -> Self {
        CommParams { beta_s: d.beta_s, gamma_s: d.gamma_s, payload_scale: d.payload_scale }
    }
}

impl From<CommParams> for CommDoc {
    fn from(p: CommParams) -> Self {
        CommDoc { beta_s: p.beta_s, gamma_s: p.gamma_s, payload_scale: p.payload_scale }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GpuDoc {
    #[serde(default = "default_devices")]
    pub devices: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub host_gbit: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub comm: Option<CommDoc>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PenaltyDoc {
    pub penalty: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BaselineDoc {
    pub gpu: String,
    pub model: String,
    pub sps: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComputeDoc {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
    pub gpus: BTreeMap<String, GpuDoc>,
    pub default_comm: CommDoc,
    #[serde(default)]
    pub penalties: BTreeMap<String, PenaltyDoc>,
    #[serde(default)]
    pub baselines: Vec<BaselineDoc>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CatalogEntryDoc {
    pub site: String,
    pub max_count: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SearchDoc {
    pub catalog: Vec<CatalogEntryDoc>,
    pub objective: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub budget_usd_per_h: Option<f64>,
    pub total_vm_bounds: [u32; 2],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub total_gpu_bounds: Option<[u32; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pricing_mode: Option<String>,
    #[serde(default = "default_top_k")]
    pub top_k: usize,
}

/// Calibration input file.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CalibrationDoc {
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
    /// GPU type whose overheads the fit describes.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gpu: Option<String>,
    #[serde(default)]
    pub fit: FitDoc,
    #[serde(default)]
    pub observations: Vec<ObservationDoc>,
    #[serde(default)]
    pub throughput_pairs: Vec<ThroughputPairDoc>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitDoc {
    pub free: Vec<String>,
    pub fixed: CommDoc,
}

impl Default for FitDoc {
    fn default() -> Self {
        FitDoc { free: vec!["beta".into(), "gamma".into()], fixed: CommParams::default().into() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObservationDoc {
    pub scenario: String,
    /// Replaces the scenario's model.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<String>,
    /// Rescales the placement to this many VMs.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vm_count: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub measured_t_comm_s: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub measured_sps: Option<f64>,
    /// With `measured_sps`, turns throughput into averaging time.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub measured_granularity: Option<f64>,
    #[serde(default, skip_serializing_if = "is_default")]
    pub note: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThroughputPairDoc {
    pub model: String,
    pub baseline_sps: f64,
    pub local_sps: f64,
    #[serde(default, skip_serializing_if = "is_default")]
    pub note: String,
}

fn invalid(key: impl Into<String>, message: impl Into<String>) -> LoadError {
    LoadError::Validation { key: key.into(), message: message.into() }
}

fn parse_token<T: std::str::FromStr>(key: String, what: &str, raw: &str) -> Result<T, LoadError> {
    raw.parse().map_err(|_| invalid(key, format!("unknown {what} `{raw}`")))
}

impl SiteDoc {
    pub fn to_site(&self, idx: usize) -> Result<Site, LoadError> {
        let key = |f: &str| format!("sites[{idx}].{f}");
        let continent: Continent = parse_token(key("continent"), "continent", &self.continent)?;
        Ok(Site {
            id: self.id.clone(),
            cloud: parse_token(key("cloud"), "cloud", &self.cloud)?,
            continent,
            region: self.region.clone(),
            zone: self.zone.clone(),
            gpu: self.gpu.clone(),
            net_group: self.net_group.clone().unwrap_or_else(|| continent.label().to_string()),
        })
    }

    pub fn from_site(s: &Site) -> Self {
        SiteDoc {
            id: s.id.clone(),
            cloud: s.cloud.label().into(),
            continent: s.continent.label().into(),
            region: s.region.clone(),
            zone: s.zone.clone(),
            gpu: s.gpu.clone(),
            net_group: Some(s.net_group.clone()),
        }
    }
}

impl ModelDoc {
    pub fn to_model(&self, key: &str) -> Result<ModelProfile, LoadError> {
        let domain: Domain = parse_token(format!("{key}.domain"), "domain", &self.domain)?;
        Ok(ModelProfile {
            name: self.name.clone(),
            params: self.params,
            bytes_per_param: self.bytes_per_param,
            sample_bytes: self.sample_bytes,
            domain,
        })
    }

    pub fn from_model(m: &ModelProfile) -> Self {
        ModelDoc {
            name: m.name.clone(),
            domain: m.domain.label().into(),
            params: m.params,
            bytes_per_param: m.bytes_per_param,
            sample_bytes: m.sample_bytes,
        }
    }
}

impl RunDoc {
    pub fn to_run(&self) -> Result<RunConfig, LoadError> {
        let mut run = RunConfig::new(self.tbs);
        if let Some(v) = self.matchmaking_floor_s {
            run.matchmaking_floor_s = v;
        }
        if let Some(v) = &self.pricing_mode {
            run.pricing_mode = parse_token("run.pricing_mode".into(), "pricing mode", v)?;
        }
        if let Some(v) = self.tcp_window_bytes {
            run.tcp_window_bytes = v;
        }
        if let Some(v) = self.comm_overlap {
            run.comm_overlap = v;
        }
        if let Some(v) = &self.grouping {
            run.grouping = parse_token("run.grouping".into(), "grouping", v)?;
        }
        Ok(run)
    }

    pub fn from_run(r: &RunConfig) -> Self {
        RunDoc {
            tbs: r.tbs,
            matchmaking_floor_s: Some(r.matchmaking_floor_s),
            pricing_mode: Some(r.pricing_mode.label().into()),
            tcp_window_bytes: Some(r.tcp_window_bytes),
            comm_overlap: Some(r.comm_overlap),
            grouping: Some(r.grouping.label().into()),
        }
    }
}

impl NetworkDoc {
    /// Adds the links to `net`. A link without its own reverse measurement
    /// also serves the reverse direction.
    pub fn apply(&self, net: &mut NetworkMatrix) {
        let mut own = NetworkMatrix::new();
        for l in &self.links {
            let mut link = Link::new(l.bandwidth_gbit, l.latency_ms);
            link.ceiling_gbit = l.ceiling_gbit;
            own.insert(&l.from, &l.to, link);
        }
        net.merge(&own);
    }

    pub fn from_matrix(net: &NetworkMatrix) -> Self {
        NetworkDoc {
            description: None,
            links: net
                .links()
                .map(|(a, b, l)| LinkDoc {
                    from: a.into(),
                    to: b.into(),
                    bandwidth_gbit: l.bandwidth_gbit,
                    latency_ms: l.latency_ms,
                    ceiling_gbit: l.ceiling_gbit,
                })
                .collect(),
        }
    }
}

fn class_keys() -> Vec<(TrafficClass, &'static str)> {
    TrafficClass::ALL.into_iter().filter(|c| *c != TrafficClass::Internal).map(|c| (c, c.key())).collect()
}

impl PricesDoc {
    pub fn to_book(&self) -> Result<PriceBook, LoadError> {
        let mut book = PriceBook { dataset_ingress_usd_per_gb: self.dataset_ingress_price_per_gb_usd, ..Default::default() };
        for (cloud_raw, rates) in &self.egress_price_per_gb_usd {
            let base = format!("prices.egress_price_per_gb_usd.{cloud_raw}");
            let cloud: Cloud = parse_token(base.clone(), "cloud", cloud_raw)?;
            let known = class_keys();
            if let Some(extra) = rates.keys().find(|k| !known.iter().any(|(_, key)| key == k)) {
                return Err(invalid(format!("{base}.{extra}"), "unknown traffic class"));
            }
            let get = |k: &str| rates.get(k).copied().ok_or_else(|| invalid(format!("{base}.{k}"), "missing egress rate"));
            let mut inter_region = BTreeMap::new();
            for c in Continent::ALL {
                inter_region.insert(c, get(TrafficClass::InterRegionSameContinent(c).key())?);
            }
            let e = EgressPrices {
                intra_zone: get(TrafficClass::IntraZone.key())?,
                inter_zone_same_region: get(TrafficClass::InterZoneSameRegion.key())?,
                inter_region,
                any_to_oce: get(TrafficClass::AnyToOce.key())?,
                between_continents: get(TrafficClass::BetweenContinents.key())?,
            };
            book.egress.insert(cloud, e);
        }
        for (i, v) in self.vm.iter().enumerate() {
            let cloud: Cloud = parse_token(format!("prices.vm[{i}].cloud"), "cloud", &v.cloud)?;
            let key = (cloud, v.gpu.clone());
            if book.vm.contains_key(&key) {
                return Err(invalid(format!("prices.vm.{cloud}.{}", v.gpu), "duplicate VM price"));
            }
            book.vm.insert(key, VmPrice { spot_usd_per_h: v.vm_spot_usd_per_h, ondemand_usd_per_h: v.vm_ondemand_usd_per_h });
        }
        Ok(book)
    }

    pub fn from_book(b: &PriceBook) -> Self {
        let egress = b
            .egress
            .iter()
            .map(|(cloud, e)| {
                let rates = class_keys()
                    .into_iter()
                    .filter_map(|(class, key)| e.rate(class).map(|r| (key.to_string(), r)))
                    .collect();
                (cloud.label().to_string(), rates)
            })
            .collect();
        PricesDoc {
            description: None,
            dataset_ingress_price_per_gb_usd: b.dataset_ingress_usd_per_gb,
            egress_price_per_gb_usd: egress,
            vm: b
                .vm
                .iter()
                .map(|((cloud, gpu), p)| VmPriceDoc {
                    cloud: cloud.label().into(),
                    gpu: gpu.clone(),
                    vm_spot_usd_per_h: p.spot_usd_per_h,
                    vm_ondemand_usd_per_h: p.ondemand_usd_per_h,
                })
                .collect(),
        }
    }
}

impl ComputeDoc {
    pub fn to_profile(&self) -> Result<ComputeProfile, LoadError> {
        let mut profile = ComputeProfile { default_comm: self.default_comm.into(), ..Default::default() };
        for (name, g) in &self.gpus {
            profile.gpus.insert(
                name.clone(),
                GpuSpec { devices: g.devices, host_gbit: g.host_gbit, comm: g.comm.map(Into::into) },
            );
        }
        for (model, p) in &self.penalties {
            profile.penalties.insert(model.clone(), p.penalty);
        }
        for b in &self.baselines {
            let key = (b.gpu.clone(), b.model.clone());
            if profile.baseline_sps.insert(key, b.sps).is_some() {
                return Err(invalid(format!("compute.{}.{}", b.gpu, b.model), "duplicate baseline"));
            }
        }
        Ok(profile)
    }

    pub fn from_profile(c: &ComputeProfile) -> Self {
        ComputeDoc {
            description: None,
            gpus: c
                .gpus
                .iter()
                .map(|(n, g)| {
                    (n.clone(), GpuDoc { devices: g.devices, host_gbit: g.host_gbit, comm: g.comm.map(Into::into) })
                })
                .collect(),
            default_comm: c.default_comm.into(),
            penalties: c.penalties.iter().map(|(m, p)| (m.clone(), PenaltyDoc { penalty: *p, note: None })).collect(),
            baselines: c
                .baseline_sps
                .iter()
                .map(|((gpu, model), sps)| BaselineDoc { gpu: gpu.clone(), model: model.clone(), sps: *sps, note: None })
                .collect(),
        }
    }
}

/// Parses an objective name, taking the budget for the budgeted variant.
pub fn parse_objective(name: &str, budget: Option<f64>) -> Result<Objective, LoadError> {
    match name.to_ascii_lowercase().replace('_', "-").as_str() {
        "max-sps" => Ok(Objective::MaxSps),
        "min-usd-per-million" => Ok(Objective::MinUsdPerMillion),
        "max-sps-under-budget" => budget
            .map(Objective::MaxSpsUnderBudget)
            .ok_or_else(|| invalid("search.budget_usd_per_h", "required by max-sps-under-budget")),
        _ => Err(invalid("search.objective", format!("unknown objective `{name}`"))),
    }
}

impl SearchDoc {
    pub fn to_spec(&self, sites: &[Site], compute: &ComputeProfile, run_mode: PricingMode) -> Result<SearchSpec, LoadError> {
        let mut catalog = Vec::with_capacity(self.catalog.len());
        for e in &self.catalog {
            let site = sites
                .iter()
                .find(|s| s.id == e.site)
                .ok_or_else(|| invalid(format!("search.catalog.{}", e.site), "unknown site"))?;
            let gpu = compute.gpu(&site.gpu).map_err(LoadError::from)?;
            catalog.push(CatalogEntry { site: site.clone(), max_count: e.max_count, gpus_per_vm: gpu.devices });
        }
        let mode = match &self.pricing_mode {
            Some(m) => parse_token("search.pricing_mode".into(), "pricing mode", m)?,
            None => run_mode,
        };
        Ok(SearchSpec {
            catalog,
            objective: parse_objective(&self.objective, self.budget_usd_per_h)?,
            vm_bounds: (self.total_vm_bounds[0], self.total_vm_bounds[1]),
            gpu_bounds: self.total_gpu_bounds.map(|b| (b[0], b[1])),
            mode,
            top_k: self.top_k,
        })
    }

    pub fn from_spec(s: &SearchSpec) -> Self {
        let budget = match s.objective {
            Objective::MaxSpsUnderBudget(b) => Some(b),
            _ => None,
        };
        SearchDoc {
            catalog: s.catalog.iter().map(|e| CatalogEntryDoc { site: e.site.id.clone(), max_count: e.max_count }).collect(),
            objective: s.objective.label().into(),
            budget_usd_per_h: budget,
            total_vm_bounds: [s.vm_bounds.0, s.vm_bounds.1],
            total_gpu_bounds: s.gpu_bounds.map(|(a, b)| [a, b]),
            pricing_mode: Some(s.mode.label().into()),
            top_k: s.top_k,
        }
    }
}

pub fn placement_docs(p: &[Placement]) -> Vec<PlacementDoc> {
    p.iter().map(|p| PlacementDoc { site: p.site.clone(), vm_count: p.vm_count }).collect()
}
