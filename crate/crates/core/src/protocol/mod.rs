//! One accumulate-then-average round of decentralized data-parallel training.
//!
//! Peers first accumulate the target batch, each at its own rate. They then
//! average gradients in two stages:
//!
//! 1. Within each locality group every member exchanges an equal share of the
//!    payload with every other member (reduce-scatter plus all-gather).
//! 2. Groups are cut into lanes: the j-th member of each group forms lane j,
//!    with as many lanes as the smallest group has members. Every lane member
//!    exchanges its share of the payload with its counterparts in the other
//!    groups.
//!
//! Each member's send time is bounded by its slowest stream and by its uplink.

mod calibrate;

pub use calibrate::{
    calibrate, fit_linear_overhead, fit_penalties, Calibration, CalibrationError, FitSpec,
    Measured, Observation, ThroughputPair,
};

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::catalog::{classify_peers, CatalogError, Cloud, Continent, Scenario, Site, TrafficClass};
use crate::netmodel::{NetError, NetworkMatrix};

/// A VM taking part in training.
#[derive(Debug, Clone, PartialEq)]
pub struct Peer {
    pub site: Site,
    /// Samples per second while training with other peers.
    pub rate: f64,
    /// Host network limit in Gbit/s, if any.
    pub host_gbit: Option<f64>,
}

/// Fixed costs of one averaging round that the transfer model does not see.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CommParams {
    /// Seconds spent per round regardless of peer count.
    pub beta_s: f64,
    /// Seconds added per participating peer.
    pub gamma_s: f64,
    /// Multiplier on raw transfer time.
    pub payload_scale: f64,
}

impl Default for CommParams {
    fn default() -> Self {
        CommParams { beta_s: 0.0, gamma_s: 0.0, payload_scale: 1.0 }
    }
}

impl CommParams {
    pub fn validate(&self) -> Result<(), &'static str> {
        if !(self.beta_s >= 0.0) || !self.beta_s.is_finite() {
            return Err("beta_s must be >= 0");
        }
        if !(self.gamma_s >= 0.0) || !self.gamma_s.is_finite() {
            return Err("gamma_s must be >= 0");
        }
        if !(self.payload_scale >= 1.0) || !self.payload_scale.is_finite() {
            return Err("payload_scale must be >= 1");
        }
        Ok(())
    }
}

/// How peers are split into locality groups for the first averaging stage.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Default)]
pub enum Grouping {
    /// One group per continent.
    #[default]
    Continent,
    /// One group per (cloud, region).
    CloudRegion,
}

impl Grouping {
    pub fn label(self) -> &'static str {
        match self {
            Grouping::Continent => "continent",
            Grouping::CloudRegion => "cloud_region",
        }
    }
}

impl core::str::FromStr for Grouping {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "continent" => Ok(Grouping::Continent),
            "cloud_region" => Ok(Grouping::CloudRegion),
            _ => Err(alloc::format!("unknown grouping \"{s}\"")),
        }
    }
}

/// Averaging stage of a transfer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Stage {
    Local,
    Global,
}

/// Bytes sent from one peer to another during averaging.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transfer {
    pub from: usize,
    pub to: usize,
    pub bytes: f64,
    pub stage: Stage,
}

/// One billed connection. Within a group every ordered member pair is a
/// call; between groups every ordered group pair is one call that carries
/// all lanes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct EgressCall {
    pub from: usize,
    pub to: usize,
    pub class: TrafficClass,
    pub stage: Stage,
}

/// Result of the averaging stage.
#[derive(Debug, Clone, PartialEq)]
pub struct CommOutcome {
    pub t_comm_s: f64,
    pub stage1_s: f64,
    pub stage2_s: f64,
    pub groups: Vec<Vec<usize>>,
    pub transfers: Vec<Transfer>,
    pub calls: Vec<EgressCall>,
    /// Bytes sent by each peer, by class.
    pub egress_bytes: Vec<BTreeMap<TrafficClass, f64>>,
}

impl CommOutcome {
    fn idle(n: usize) -> Self {
        CommOutcome {
            t_comm_s: 0.0,
            stage1_s: 0.0,
            stage2_s: 0.0,
            groups: if n == 1 { vec![vec![0]] } else { Vec::new() },
            transfers: Vec::new(),
            calls: Vec::new(),
            egress_bytes: vec![BTreeMap::new(); n],
        }
    }
}

/// Timing and traffic of one simulated round.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochReport {
    pub scenario_id: String,
    pub tbs: f64,
    pub peer_sites: Vec<String>,
    pub peer_rates: Vec<f64>,
    pub t_calc_s: f64,
    pub t_wait_s: f64,
    pub t_comm_s: f64,
    pub stage1_s: f64,
    pub stage2_s: f64,
    pub comm_overlap: f64,
    pub epoch_time_s: f64,
    pub sps_global: f64,
    pub samples_per_peer: Vec<f64>,
    pub egress_bytes: Vec<BTreeMap<TrafficClass, f64>>,
    pub calls: Vec<EgressCall>,
    pub groups: Vec<Vec<usize>>,
    pub comm_params: CommParams,
    /// True when the matchmaking floor lengthened the round.
    pub matchmaking_bound: bool,
}

impl EpochReport {
    pub fn n_peers(&self) -> usize {
        self.peer_sites.len()
    }

    /// Total bytes sent by all peers.
    pub fn total_egress_bytes(&self) -> f64 {
        self.egress_bytes.iter().flat_map(|m| m.values()).sum()
    }

    /// Bytes sent by all peers, by class.
    pub fn egress_by_class(&self) -> BTreeMap<TrafficClass, f64> {
        let mut out = BTreeMap::new();
        for m in &self.egress_bytes {
            for (c, b) in m {
                *out.entry(*c).or_insert(0.0) += *b;
            }
        }
        out
    }

    /// Number of calls per class.
    pub fn call_counts(&self) -> BTreeMap<TrafficClass, usize> {
        let mut out = BTreeMap::new();
        for c in &self.calls {
            *out.entry(c.class).or_insert(0) += 1;
        }
        out
    }
}

/// Splits the target batch across peers in proportion to their rates.
///
/// Returns the accumulation time and the samples of each peer. The last
/// peer takes the rounding remainder so that summing the shares in order
/// gives back `tbs`.
pub fn accumulate_phase(rates: &[f64], tbs: f64) -> (f64, Vec<f64>) {
    let total: f64 = rates.iter().sum();
    if rates.is_empty() || !(total > 0.0) {
        return (0.0, Vec::new());
    }
    let t_calc = tbs / total;
    let mut samples: Vec<f64> = rates.iter().map(|r| r * t_calc).collect();
    let last = samples.len() - 1;
    let head: f64 = samples[..last].iter().sum();
    samples[last] = tbs - head;
    // A half-ulp tie can leave the ordered sum one ulp off; nudge it back.
    for _ in 0..4 {
        let sum: f64 = samples.iter().sum();
        if sum == tbs {
            break;
        }
        samples[last] += tbs - sum;
    }
    (t_calc, samples)
}

/// Locality groups in order of first appearance.
pub fn locality_groups(peers: &[Peer], grouping: Grouping) -> Vec<Vec<usize>> {
    let mut keys: Vec<(Continent, Option<(Cloud, &str)>)> = Vec::new();
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for (i, p) in peers.iter().enumerate() {
        let key = match grouping {
            Grouping::Continent => (p.site.continent, None),
            Grouping::CloudRegion => (p.site.continent, Some((p.site.cloud, p.site.region.as_str()))),
        };
        match keys.iter().position(|k| *k == key) {
            Some(g) => groups[g].push(i),
            None => {
                keys.push(key);
                groups.push(vec![i]);
            }
        }
    }
    groups
}

/// Every transfer of one round, grouped by sender, plus the billed calls.
pub fn plan_transfers(peers: &[Peer], payload_bytes: f64, grouping: Grouping) -> (Vec<Vec<usize>>, Vec<Transfer>, Vec<EgressCall>) {
    let groups = locality_groups(peers, grouping);
    let mut transfers = Vec::new();
    let mut calls = Vec::new();
    if peers.len() < 2 {
        return (groups, transfers, calls);
    }
    for g in &groups {
        let share = 2.0 * payload_bytes / g.len() as f64;
        for &i in g {
            for &j in g {
                if i != j {
                    transfers.push(Transfer { from: i, to: j, bytes: share, stage: Stage::Local });
                    calls.push(EgressCall {
                        from: i,
                        to: j,
                        class: classify_peers(&peers[i].site, &peers[j].site),
                        stage: Stage::Local,
                    });
                }
            }
        }
    }
    let k = groups.len();
    if k > 1 {
        let lanes = groups.iter().map(Vec::len).min().unwrap_or(0);
        let share = 2.0 * payload_bytes / lanes as f64 / k as f64;
        for (a, ga) in groups.iter().enumerate() {
            for lane in 0..lanes {
                for (b, gb) in groups.iter().enumerate() {
                    if a != b {
                        transfers.push(Transfer { from: ga[lane], to: gb[lane], bytes: share, stage: Stage::Global });
                    }
                }
            }
            for (b, gb) in groups.iter().enumerate() {
                if a != b {
                    calls.push(EgressCall {
                        from: ga[0],
                        to: gb[0],
                        class: classify_peers(&peers[ga[0]].site, &peers[gb[0]].site),
                        stage: Stage::Global,
                    });
                }
            }
        }
    }
    (groups, transfers, calls)
}

/// Uplink limit of a peer sending over `streams` connections, in Gbit/s.
pub fn uplink_gbit(peer: &Peer, net: &NetworkMatrix, streams: u32, window: f64) -> Result<f64, NetError> {
    let g = peer.site.net_group.as_str();
    let local = net.pairwise_channel(g, g, window)?.aggregate_gbit(streams);
    Ok(match peer.host_gbit {
        Some(h) => local.min(h),
        None => local,
    })
}

/// Time for one peer to push its transfers of one stage.
pub fn member_send_time(sender: usize, sends: &[Transfer], peers: &[Peer], net: &NetworkMatrix, window: f64) -> Result<f64, NetError> {
    if sends.is_empty() {
        return Ok(0.0);
    }
    let me = &peers[sender];
    let cap = uplink_gbit(me, net, sends.len() as u32, window)?;
    let mut slowest = 0.0f64;
    let mut total = 0.0;
    let mut rtt = 0.0f64;
    for t in sends {
        let ch = net.pairwise_channel(&me.site.net_group, &peers[t.to].site.net_group, window)?;
        let rate = ch.single_stream_gbit.min(cap);
        slowest = slowest.max(t.bytes * 8.0 / 1e9 / rate);
        total += t.bytes;
        rtt = rtt.max(ch.rtt_s());
    }
    Ok(slowest.max(total * 8.0 / 1e9 / cap) + rtt)
}

/// Wall time of one stage: the slowest sender.
fn stage_time(stage: Stage, transfers: &[Transfer], peers: &[Peer], net: &NetworkMatrix, window: f64) -> Result<f64, NetError> {
    let mut worst = 0.0f64;
    let mut sends = Vec::new();
    for i in 0..peers.len() {
        sends.clear();
        sends.extend(transfers.iter().filter(|t| t.from == i && t.stage == stage).copied());
        worst = worst.max(member_send_time(i, &sends, peers, net, window)?);
    }
    Ok(worst)
}

/// Simulates the averaging stage.
pub fn allreduce_phase(
    peers: &[Peer],
    payload_bytes: f64,
    net: &NetworkMatrix,
    params: &CommParams,
    window: f64,
    grouping: Grouping,
) -> Result<CommOutcome, NetError> {
    if peers.len() < 2 {
        return Ok(CommOutcome::idle(peers.len()));
    }
    let (groups, transfers, calls) = plan_transfers(peers, payload_bytes, grouping);
    let stage1_s = stage_time(Stage::Local, &transfers, peers, net, window)?;
    let stage2_s = stage_time(Stage::Global, &transfers, peers, net, window)?;
    let mut egress_bytes = vec![BTreeMap::new(); peers.len()];
    for t in &transfers {
        let class = classify_peers(&peers[t.from].site, &peers[t.to].site);
        *egress_bytes[t.from].entry(class).or_insert(0.0) += t.bytes;
    }
    let t_comm_s = params.payload_scale * (stage1_s + stage2_s) + params.beta_s + params.gamma_s * peers.len() as f64;
    Ok(CommOutcome { t_comm_s, stage1_s, stage2_s, groups, transfers, calls, egress_bytes })
}

/// Builds the peer list of a scenario. `shared` rates apply with two or more peers.
pub fn scenario_peers(scenario: &Scenario) -> Result<Vec<Peer>, SimError> {
    let sites = scenario.peer_sites()?;
    let shared = sites.len() > 1;
    let mut peers = Vec::with_capacity(sites.len());
    for site in sites {
        let gpu = scenario.compute.gpu(&site.gpu)?;
        let rate = scenario.compute.rate(&site.gpu, &scenario.model.name, shared)?;
        peers.push(Peer { site: site.clone(), rate, host_gbit: gpu.host_gbit });
    }
    Ok(peers)
}

/// Simulates one round of a scenario.
pub fn simulate_epoch(scenario: &Scenario) -> Result<EpochReport, SimError> {
    let peers = scenario_peers(scenario)?;
    if peers.is_empty() {
        return Err(SimError::Catalog(CatalogError::invalid("placement", "empty placement")));
    }
    let params = scenario.compute.comm_params(peers.iter().map(|p| p.site.gpu.as_str()));
    simulate_with(scenario, &peers, &params)
}

/// Simulates one round with explicit peers and overheads.
pub fn simulate_with(scenario: &Scenario, peers: &[Peer], params: &CommParams) -> Result<EpochReport, SimError> {
    let run = &scenario.run;
    let tbs = run.tbs as f64;
    let rates: Vec<f64> = peers.iter().map(|p| p.rate).collect();
    let (t_calc_s, samples_per_peer) = accumulate_phase(&rates, tbs);
    let t_wait_s = if peers.len() > 1 { (run.matchmaking_floor_s - t_calc_s).max(0.0) } else { 0.0 };
    let comm = allreduce_phase(
        peers,
        scenario.model.grad_payload() as f64,
        &scenario.network,
        params,
        run.tcp_window_bytes,
        run.grouping,
    )?;
    let epoch_time_s = t_calc_s + t_wait_s + (1.0 - run.comm_overlap) * comm.t_comm_s;
    Ok(EpochReport {
        scenario_id: scenario.id.clone(),
        tbs,
        peer_sites: peers.iter().map(|p| p.site.id.clone()).collect(),
        peer_rates: rates,
        t_calc_s,
        t_wait_s,
        t_comm_s: comm.t_comm_s,
        stage1_s: comm.stage1_s,
        stage2_s: comm.stage2_s,
        comm_overlap: run.comm_overlap,
        epoch_time_s,
        sps_global: tbs / epoch_time_s,
        samples_per_peer,
        egress_bytes: comm.egress_bytes,
        calls: comm.calls,
        groups: comm.groups,
        comm_params: *params,
        matchmaking_bound: t_wait_s > 0.0,
    })
}

/// Simulation failures.
#[derive(Debug, Clone, PartialEq)]
pub enum SimError {
    Catalog(CatalogError),
    Net(NetError),
}

impl From<CatalogError> for SimError {
    fn from(e: CatalogError) -> Self {
        SimError::Catalog(e)
    }
}

impl From<NetError> for SimError {
    fn from(e: NetError) -> Self {
        SimError::Net(e)
    }
}

impl fmt::Display for SimError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SimError::Catalog(e) => e.fmt(f),
            SimError::Net(e) => e.fmt(f),
        }
    }
}

impl core::error::Error for SimError {}
