//! Static domain data: sites, models, compute speeds, prices and the
//! scenario bundle that ties them together.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use crate::netmodel::NetworkMatrix;
use crate::optimizer::SearchSpec;
use crate::protocol::{CommParams, Grouping};

/// Cloud provider owning a site.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Cloud {
    Gc,
    Aws,
    Azure,
    Lambda,
    OnPrem,
}

impl Cloud {
    pub const ALL: [Cloud; 5] = [Cloud::Gc, Cloud::Aws, Cloud::Azure, Cloud::Lambda, Cloud::OnPrem];

    pub fn label(self) -> &'static str {
        match self {
            Cloud::Gc => "GC",
            Cloud::Aws => "AWS",
            Cloud::Azure => "AZURE",
            Cloud::Lambda => "LAMBDA",
            Cloud::OnPrem => "ONPREM",
        }
    }
}

impl fmt::Display for Cloud {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Cloud {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Cloud::ALL
            .into_iter()
            .find(|c| c.label().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown cloud \"{s}\""))
    }
}

/// Continent used for egress classification. Australia and Oceania map to `Oce`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Continent {
    Us,
    Eu,
    Asia,
    Oce,
}

impl Continent {
    pub const ALL: [Continent; 4] = [Continent::Us, Continent::Eu, Continent::Asia, Continent::Oce];

    pub fn label(self) -> &'static str {
        match self {
            Continent::Us => "US",
            Continent::Eu => "EU",
            Continent::Asia => "ASIA",
            Continent::Oce => "OCE",
        }
    }
}

impl fmt::Display for Continent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Continent {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Continent::ALL
            .into_iter()
            .find(|c| c.label().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown continent \"{s}\""))
    }
}

/// A rentable VM location.
///
/// `net_group` names the row of the network matrix that describes links
/// from this site.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct Site {
    pub id: String,
    pub cloud: Cloud,
    pub continent: Continent,
    pub region: String,
    pub zone: String,
    pub gpu: String,
    pub net_group: String,
}

/// Billing class of traffic between two sites.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum TrafficClass {
    IntraZone,
    InterZoneSameRegion,
    InterRegionSameContinent(Continent),
    AnyToOce,
    BetweenContinents,
    Internal,
}

impl TrafficClass {
    /// Every class, in a fixed order.
    pub const ALL: [TrafficClass; 9] = [
        TrafficClass::IntraZone,
        TrafficClass::InterZoneSameRegion,
        TrafficClass::InterRegionSameContinent(Continent::Us),
        TrafficClass::InterRegionSameContinent(Continent::Eu),
        TrafficClass::InterRegionSameContinent(Continent::Asia),
        TrafficClass::InterRegionSameContinent(Continent::Oce),
        TrafficClass::AnyToOce,
        TrafficClass::BetweenContinents,
        TrafficClass::Internal,
    ];

    /// Stable snake_case key used in reports.
    pub fn key(self) -> &'static str {
        match self {
            TrafficClass::IntraZone => "intra_zone",
            TrafficClass::InterZoneSameRegion => "inter_zone_same_region",
            TrafficClass::InterRegionSameContinent(Continent::Us) => "inter_region_us",
            TrafficClass::InterRegionSameContinent(Continent::Eu) => "inter_region_eu",
            TrafficClass::InterRegionSameContinent(Continent::Asia) => "inter_region_asia",
            TrafficClass::InterRegionSameContinent(Continent::Oce) => "inter_region_oce",
            TrafficClass::AnyToOce => "any_to_oce",
            TrafficClass::BetweenContinents => "between_continents",
            TrafficClass::Internal => "internal",
        }
    }

    /// True for traffic that leaves the sender's zone.
    pub fn is_external(self) -> bool {
        !matches!(self, TrafficClass::IntraZone | TrafficClass::Internal)
    }
}

impl fmt::Display for TrafficClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.key())
    }
}

/// Classifies traffic from `a` to `b`.
///
/// Identical sites give `Internal`. Zone and region equality also require the
/// same cloud, since providers reuse zone names.
pub fn classify_traffic(a: &Site, b: &Site) -> TrafficClass {
    if a == b {
        return TrafficClass::Internal;
    }
    classify_distinct(a, b)
}

/// Classifies traffic between two distinct peers, which may share a site.
pub fn classify_peers(a: &Site, b: &Site) -> TrafficClass {
    classify_distinct(a, b)
}

fn classify_distinct(a: &Site, b: &Site) -> TrafficClass {
    let same_region = a.cloud == b.cloud && a.region == b.region;
    if same_region && a.zone == b.zone {
        TrafficClass::IntraZone
    } else if same_region {
        TrafficClass::InterZoneSameRegion
    } else if a.continent == b.continent {
        TrafficClass::InterRegionSameContinent(a.continent)
    } else if a.continent == Continent::Oce || b.continent == Continent::Oce {
        TrafficClass::AnyToOce
    } else {
        TrafficClass::BetweenContinents
    }
}

/// Dataset domain of a model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Domain {
    Cv,
    Nlp,
}

impl Domain {
    pub fn label(self) -> &'static str {
        match self {
            Domain::Cv => "CV",
            Domain::Nlp => "NLP",
        }
    }
}

impl FromStr for Domain {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_uppercase().as_str() {
            "CV" => Ok(Domain::Cv),
            "NLP" => Ok(Domain::Nlp),
            _ => Err(format!("unknown domain \"{s}\"")),
        }
    }
}

/// Size profile of a trainable model.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModelProfile {
    pub name: String,
    pub params: u64,
    pub bytes_per_param: u32,
    pub sample_bytes: u64,
    pub domain: Domain,
}

impl ModelProfile {
    /// Gradient bytes exchanged per averaging round.
    pub fn grad_payload(&self) -> u64 {
        self.params * u64::from(self.bytes_per_param)
    }

    pub fn validate(&self) -> Result<(), CatalogError> {
        if self.params == 0 {
            return Err(CatalogError::invalid(
                format!("model.{}.params", self.name),
                "must be positive",
            ));
        }
        if self.bytes_per_param == 0 {
            return Err(CatalogError::invalid(
                format!("model.{}.bytes_per_param", self.name),
                "must be positive",
            ));
        }
        if self.sample_bytes == 0 {
            return Err(CatalogError::invalid(
                format!("model.{}.sample_bytes", self.name),
                "must be positive",
            ));
        }
        Ok(())
    }
}

/// Hardware facts about one GPU type.
#[derive(Debug, Clone, PartialEq)]
pub struct GpuSpec {
    /// Physical GPUs in one VM of this type.
    pub devices: u32,
    /// Host network limit, if the VM cannot use the full zone bandwidth.
    pub host_gbit: Option<f64>,
    /// Averaging overheads measured on this hardware.
    pub comm: Option<CommParams>,
}

impl Default for GpuSpec {
    fn default() -> Self {
        GpuSpec { devices: 1, host_gbit: None, comm: None }
    }
}

/// Per-sample speed of each (gpu, model) pair.
///
/// Plain single-device throughput is stored as `baseline_sps`. When two or
/// more peers train together the middleware slows every device down by the
/// model's penalty factor.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ComputeProfile {
    pub gpus: BTreeMap<String, GpuSpec>,
    /// Keyed by (gpu, model).
    pub baseline_sps: BTreeMap<(String, String), f64>,
    /// Keyed by model name.
    pub penalties: BTreeMap<String, f64>,
    /// Overheads used for GPU types without their own measurements.
    pub default_comm: CommParams,
}

impl ComputeProfile {
    pub fn gpu(&self, gpu: &str) -> Result<&GpuSpec, CatalogError> {
        self.gpus
            .get(gpu)
            .ok_or_else(|| CatalogError::invalid(format!("gpu.{gpu}"), "unknown gpu type"))
    }

    pub fn baseline(&self, gpu: &str, model: &str) -> Result<f64, CatalogError> {
        self.baseline_sps
            .get(&(gpu.to_string(), model.to_string()))
            .copied()
            .ok_or_else(|| {
                CatalogError::invalid(format!("compute.{gpu}.{model}"), "no baseline throughput")
            })
    }

    pub fn penalty(&self, model: &str) -> Result<f64, CatalogError> {
        self.penalties.get(model).copied().ok_or_else(|| {
            CatalogError::invalid(format!("compute.penalties.{model}"), "no penalty factor")
        })
    }

    /// Seconds per sample on one device. `shared` selects the rate seen when
    /// the device trains together with other peers.
    pub fn per_sample_time(&self, gpu: &str, model: &str, shared: bool) -> Result<f64, CatalogError> {
        let base = self.baseline(gpu, model)?;
        let penalty = if shared { self.penalty(model)? } else { 1.0 };
        derive_compute_profile(base, penalty)
    }

    /// Samples per second on one device.
    pub fn rate(&self, gpu: &str, model: &str, shared: bool) -> Result<f64, CatalogError> {
        Ok(1.0 / self.per_sample_time(gpu, model, shared)?)
    }

    /// Overheads for a set of GPU types: the element-wise maximum over the
    /// types that carry their own measurements, else the default.
    pub fn comm_params<'a>(&self, gpus: impl IntoIterator<Item = &'a str>) -> CommParams {
        let mut acc: Option<CommParams> = None;
        for gpu in gpus {
            if let Some(p) = self.gpus.get(gpu).and_then(|g| g.comm) {
                acc = Some(match acc {
                    None => p,
                    Some(a) => CommParams {
                        beta_s: a.beta_s.max(p.beta_s),
                        gamma_s: a.gamma_s.max(p.gamma_s),
                        payload_scale: a.payload_scale.max(p.payload_scale),
                    },
                });
            }
        }
        acc.unwrap_or(self.default_comm)
    }

    pub fn validate(&self) -> Result<(), CatalogError> {
        for ((gpu, model), sps) in &self.baseline_sps {
            if !(*sps > 0.0) || !sps.is_finite() {
                return Err(CatalogError::invalid(
                    format!("compute.{gpu}.{model}"),
                    "baseline throughput must be positive",
                ));
            }
        }
        for (model, p) in &self.penalties {
            if !(*p > 0.0 && *p <= 1.0) {
                return Err(CatalogError::invalid(
                    format!("compute.penalties.{model}"),
                    "penalty must lie in (0, 1]",
                ));
            }
        }
        for (name, g) in &self.gpus {
            if g.devices == 0 {
                return Err(CatalogError::invalid(format!("gpu.{name}.devices"), "must be positive"));
            }
            if let Some(h) = g.host_gbit {
                if !(h > 0.0) {
                    return Err(CatalogError::invalid(
                        format!("gpu.{name}.host_gbit"),
                        "must be positive",
                    ));
                }
            }
            if let Some(c) = g.comm {
                c.validate().map_err(|m| CatalogError::invalid(format!("gpu.{name}.comm"), m))?;
            }
        }
        self.default_comm
            .validate()
            .map_err(|m| CatalogError::invalid("compute.default_comm", m))
    }
}

/// Seconds per sample for a device with the given plain throughput and
/// middleware penalty.
pub fn derive_compute_profile(baseline_sps: f64, penalty: f64) -> Result<f64, CatalogError> {
    if !(baseline_sps > 0.0) || !baseline_sps.is_finite() {
        return Err(CatalogError::Domain("baseline throughput must be positive".into()));
    }
    if !(penalty > 0.0 && penalty <= 1.0) {
        return Err(CatalogError::Domain("penalty must lie in (0, 1]".into()));
    }
    Ok(1.0 / (baseline_sps * penalty))
}

/// VM rental rates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VmPrice {
    pub spot_usd_per_h: f64,
    pub ondemand_usd_per_h: f64,
}

/// Egress price list of one cloud, in USD per GB.
#[derive(Debug, Clone, PartialEq)]
pub struct EgressPrices {
    pub intra_zone: f64,
    pub inter_zone_same_region: f64,
    pub inter_region: BTreeMap<Continent, f64>,
    pub any_to_oce: f64,
    pub between_continents: f64,
}

impl EgressPrices {
    pub fn rate(&self, class: TrafficClass) -> Option<f64> {
        match class {
            TrafficClass::Internal => Some(0.0),
            TrafficClass::IntraZone => Some(self.intra_zone),
            TrafficClass::InterZoneSameRegion => Some(self.inter_zone_same_region),
            TrafficClass::InterRegionSameContinent(c) => self.inter_region.get(&c).copied(),
            TrafficClass::AnyToOce => Some(self.any_to_oce),
            TrafficClass::BetweenContinents => Some(self.between_continents),
        }
    }

    /// Same price for every class.
    pub fn flat(rate: f64) -> Self {
        EgressPrices {
            intra_zone: rate,
            inter_zone_same_region: rate,
            inter_region: Continent::ALL.into_iter().map(|c| (c, rate)).collect(),
            any_to_oce: rate,
            between_continents: rate,
        }
    }
}

/// Prices for VMs, inter-peer egress and dataset ingress.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PriceBook {
    pub egress: BTreeMap<Cloud, EgressPrices>,
    /// Keyed by (cloud, gpu).
    pub vm: BTreeMap<(Cloud, String), VmPrice>,
    pub dataset_ingress_usd_per_gb: f64,
}

impl PriceBook {
    pub fn vm_rate(&self, cloud: Cloud, gpu: &str, mode: PricingMode) -> Option<f64> {
        self.vm.get(&(cloud, gpu.to_string())).map(|p| match mode {
            PricingMode::Spot => p.spot_usd_per_h,
            PricingMode::OnDemand => p.ondemand_usd_per_h,
        })
    }

    pub fn validate(&self) -> Result<(), CatalogError> {
        let bad = |v: f64| !(v >= 0.0) || !v.is_finite();
        if bad(self.dataset_ingress_usd_per_gb) {
            return Err(CatalogError::invalid("prices.dataset_ingress_price_per_gb_usd", "must be >= 0"));
        }
        for ((cloud, gpu), p) in &self.vm {
            if bad(p.spot_usd_per_h) {
                return Err(CatalogError::invalid(format!("prices.vm.{cloud}.{gpu}.vm_spot_usd_per_h"), "must be >= 0"));
            }
            if bad(p.ondemand_usd_per_h) {
                return Err(CatalogError::invalid(
                    format!("prices.vm.{cloud}.{gpu}.vm_ondemand_usd_per_h"),
                    "must be >= 0",
                ));
            }
        }
        for (cloud, e) in &self.egress {
            for class in TrafficClass::ALL {
                match e.rate(class) {
                    None => {
                        return Err(CatalogError::invalid(
                            format!("prices.egress.{cloud}.{class}"),
                            "missing egress rate",
                        ))
                    }
                    Some(v) if bad(v) => {
                        return Err(CatalogError::invalid(
                            format!("prices.egress.{cloud}.{class}"),
                            "must be >= 0",
                        ))
                    }
                    _ => {}
                }
            }
        }
        Ok(())
    }
}

/// Billed egress rate in USD per GB for traffic sent by `sender`.
pub fn egress_rate(prices: &PriceBook, sender: &Site, class: TrafficClass) -> Result<f64, CatalogError> {
    if class == TrafficClass::Internal || sender.cloud == Cloud::Lambda {
        return Ok(0.0);
    }
    prices
        .egress
        .get(&sender.cloud)
        .and_then(|e| e.rate(class))
        .ok_or_else(|| CatalogError::MissingRate(format!("egress {} {}", sender.cloud, class)))
}

/// Spot or on-demand rental.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Default)]
pub enum PricingMode {
    #[default]
    Spot,
    OnDemand,
}

impl PricingMode {
    pub fn label(self) -> &'static str {
        match self {
            PricingMode::Spot => "spot",
            PricingMode::OnDemand => "ondemand",
        }
    }
}

impl FromStr for PricingMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().replace(['-', '_'], "").as_str() {
            "spot" => Ok(PricingMode::Spot),
            "ondemand" => Ok(PricingMode::OnDemand),
            _ => Err(format!("unknown pricing mode \"{s}\"")),
        }
    }
}

/// Knobs of one training run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    /// Samples accumulated by all peers before each averaging round.
    pub tbs: u64,
    pub matchmaking_floor_s: f64,
    pub pricing_mode: PricingMode,
    pub tcp_window_bytes: f64,
    /// Fraction of averaging time hidden behind the next accumulation.
    pub comm_overlap: f64,
    pub grouping: Grouping,
}

impl RunConfig {
    pub const DEFAULT_FLOOR_S: f64 = 5.0;
    pub const DEFAULT_WINDOW_BYTES: f64 = 2.5e6;

    pub fn new(tbs: u64) -> Self {
        RunConfig {
            tbs,
            matchmaking_floor_s: Self::DEFAULT_FLOOR_S,
            pricing_mode: PricingMode::Spot,
            tcp_window_bytes: Self::DEFAULT_WINDOW_BYTES,
            comm_overlap: 0.0,
            grouping: Grouping::Continent,
        }
    }

    pub fn validate(&self) -> Result<(), CatalogError> {
        if self.tbs == 0 {
            return Err(CatalogError::invalid("run.tbs", "must be positive"));
        }
        if !(self.matchmaking_floor_s >= 0.0) || !self.matchmaking_floor_s.is_finite() {
            return Err(CatalogError::invalid("run.matchmaking_floor_s", "must be >= 0"));
        }
        if !(self.tcp_window_bytes > 0.0) {
            return Err(CatalogError::invalid("run.tcp_window_bytes", "must be positive"));
        }
        if !(0.0..=1.0).contains(&self.comm_overlap) {
            return Err(CatalogError::invalid("run.comm_overlap", "must lie in [0, 1]"));
        }
        Ok(())
    }
}

/// Number of VMs rented at one site.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct Placement {
    pub site: String,
    pub vm_count: u32,
}

/// Everything needed to simulate one experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub id: String,
    pub sites: Vec<Site>,
    pub placement: Vec<Placement>,
    pub model: ModelProfile,
    pub run: RunConfig,
    pub network: NetworkMatrix,
    pub prices: PriceBook,
    pub compute: ComputeProfile,
    pub search: Option<SearchSpec>,
}

impl Scenario {
    pub fn site(&self, id: &str) -> Option<&Site> {
        self.sites.iter().find(|s| s.id == id)
    }

    pub fn total_vms(&self) -> u32 {
        self.placement.iter().map(|p| p.vm_count).sum()
    }

    /// Total GPUs in the placement.
    pub fn total_gpus(&self) -> u32 {
        self.placement
            .iter()
            .map(|p| {
                let devices = self
                    .site(&p.site)
                    .and_then(|s| self.compute.gpus.get(&s.gpu))
                    .map_or(1, |g| g.devices);
                p.vm_count * devices
            })
            .sum()
    }

    /// Sites of every VM in placement order, one entry per VM.
    pub fn peer_sites(&self) -> Result<Vec<&Site>, CatalogError> {
        let mut out = Vec::new();
        for p in &self.placement {
            let site = self.site(&p.site).ok_or_else(|| {
                CatalogError::invalid(format!("placement.{}", p.site), "unknown site")
            })?;
            for _ in 0..p.vm_count {
                out.push(site);
            }
        }
        Ok(out)
    }

    /// Copy with every site moved to another cloud, keeping the network.
    pub fn with_cloud(&self, cloud: Cloud) -> Scenario {
        let mut s = self.clone();
        for site in &mut s.sites {
            site.cloud = cloud;
        }
        s
    }

    /// Checks every cross-reference and value range.
    pub fn validate(&self) -> Result<(), CatalogError> {
        self.model.validate()?;
        self.run.validate()?;
        self.prices.validate()?;
        self.compute.validate()?;
        self.network.validate().map_err(|e| CatalogError::invalid("network", e.to_string()))?;
        validate_sites(&self.sites)?;
        for site in &self.sites {
            self.compute.gpu(&site.gpu)?;
        }

        if self.placement.iter().all(|p| p.vm_count == 0) {
            return Err(CatalogError::invalid("placement", "empty placement"));
        }
        let mut groups = BTreeSet::new();
        for p in &self.placement {
            let site = self.site(&p.site).ok_or_else(|| {
                CatalogError::invalid(format!("placement.{}", p.site), "unknown site")
            })?;
            if p.vm_count == 0 {
                continue;
            }
            self.compute.gpu(&site.gpu)?;
            self.compute.baseline(&site.gpu, &self.model.name)?;
            groups.insert(site.net_group.as_str());
        }
        if self.total_vms() > 1 {
            self.compute.penalty(&self.model.name)?;
        }
        let groups: Vec<&str> = groups.into_iter().collect();
        for (i, a) in groups.iter().enumerate() {
            for b in &groups[i..] {
                if self.network.link(a, b).is_none() {
                    return Err(CatalogError::invalid(
                        format!("network.{a}-{b}"),
                        "missing network entry",
                    ));
                }
            }
        }
        if let Some(search) = &self.search {
            search.validate()?;
        }
        Ok(())
    }
}

/// Checks id uniqueness and that zone, region and continent nest consistently.
pub fn validate_sites(sites: &[Site]) -> Result<(), CatalogError> {
    let mut ids = BTreeSet::new();
    let mut zone_region: BTreeMap<(Cloud, &str), &str> = BTreeMap::new();
    let mut region_continent: BTreeMap<(Cloud, &str), Continent> = BTreeMap::new();
    for s in sites {
        if s.id.is_empty() {
            return Err(CatalogError::invalid("sites.id", "must not be empty"));
        }
        if !ids.insert(s.id.as_str()) {
            return Err(CatalogError::invalid(format!("sites.{}", s.id), "duplicate site id"));
        }
        if let Some(r) = zone_region.insert((s.cloud, s.zone.as_str()), s.region.as_str()) {
            if r != s.region {
                return Err(CatalogError::invalid(
                    format!("sites.{}.zone", s.id),
                    format!("zone {} already belongs to region {r}", s.zone),
                ));
            }
        }
        if let Some(c) = region_continent.insert((s.cloud, s.region.as_str()), s.continent) {
            if c != s.continent {
                return Err(CatalogError::invalid(
                    format!("sites.{}.region", s.id),
                    format!("region {} already belongs to continent {c}", s.region),
                ));
            }
        }
    }
    Ok(())
}

/// Errors raised by catalog lookups and validation.
#[derive(Debug, Clone, PartialEq)]
pub enum CatalogError {
    /// A value or reference is invalid. `key` names the offending field.
    Validation { key: String, message: String },
    /// The price book lacks a needed entry.
    MissingRate(String),
    /// A numeric argument is out of range.
    Domain(String),
}

impl CatalogError {
    pub fn invalid(key: impl Into<String>, message: impl Into<String>) -> Self {
        CatalogError::Validation { key: key.into(), message: message.into() }
    }
}

impl fmt::Display for CatalogError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CatalogError::Validation { key, message } => write!(f, "{key}: {message}"),
            CatalogError::MissingRate(what) => write!(f, "missing rate: {what}"),
            CatalogError::Domain(m) => write!(f, "domain error: {m}"),
        }
    }
}

impl core::error::Error for CatalogError {}
