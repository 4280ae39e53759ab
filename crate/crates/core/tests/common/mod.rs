#![allow(dead_code)]

use geospot_core::catalog::{EgressPrices, VmPrice};
use geospot_core::{
    Cloud, CommParams, ComputeProfile, Continent, Domain, GpuSpec, Link, ModelProfile, NetworkMatrix, Placement,
    PriceBook, RunConfig, Scenario, Site,
};
use proptest::prelude::*;

pub const GROUPS: [&str; 4] = ["US", "EU", "ASIA", "AUS"];

pub fn site(id: &str, cloud: Cloud, continent: Continent, region: &str, zone: &str, group: &str) -> Site {
    Site {
        id: id.into(),
        cloud,
        continent,
        region: region.into(),
        zone: zone.into(),
        gpu: "T4".into(),
        net_group: group.into(),
    }
}

/// One GC T4 site per continent.
pub fn world_sites() -> Vec<Site> {
    vec![
        site("us", Cloud::Gc, Continent::Us, "us-central1", "us-central1-a", "US"),
        site("eu", Cloud::Gc, Continent::Eu, "europe-west4", "europe-west4-a", "EU"),
        site("asia", Cloud::Gc, Continent::Asia, "asia-east1", "asia-east1-a", "ASIA"),
        site("aus", Cloud::Gc, Continent::Oce, "australia-southeast1", "australia-southeast1-a", "AUS"),
    ]
}

pub fn world_network() -> NetworkMatrix {
    let mut n = NetworkMatrix::new();
    for g in GROUPS {
        n.insert(g, g, Link::new(6.9, 0.66));
    }
    for (i, a) in GROUPS.iter().enumerate() {
        for b in &GROUPS[i + 1..] {
            n.insert(a, b, Link::new(0.2, 100.0 + 10.0 * i as f64));
        }
    }
    n
}

pub fn gc_prices() -> PriceBook {
    let mut egress = EgressPrices::flat(0.08);
    egress.intra_zone = 0.0;
    egress.inter_zone_same_region = 0.01;
    egress.any_to_oce = 0.15;
    let mut prices = PriceBook { dataset_ingress_usd_per_gb: 0.01, ..PriceBook::default() };
    prices.egress.insert(Cloud::Gc, egress);
    prices.vm.insert((Cloud::Gc, "T4".into()), VmPrice { spot_usd_per_h: 0.18, ondemand_usd_per_h: 0.54 });
    prices
}

pub fn compute(comm: CommParams) -> ComputeProfile {
    let mut c = ComputeProfile::default();
    c.gpus.insert("T4".into(), GpuSpec { devices: 1, host_gbit: None, comm: Some(comm) });
    c.baseline_sps.insert(("T4".into(), "M".into()), 80.0);
    c.penalties.insert("M".into(), 0.6);
    c.default_comm = comm;
    c
}

pub fn model(params: u64) -> ModelProfile {
    ModelProfile { name: "M".into(), params, bytes_per_param: 2, sample_bytes: 110_000, domain: Domain::Cv }
}

/// Scenario over the four world sites with `counts[i]` VMs at site `i`.
pub fn world_scenario(counts: &[u32], params: u64, tbs: u64, comm: CommParams) -> Scenario {
    let sites = world_sites();
    let placement = sites
        .iter()
        .zip(counts)
        .map(|(s, c)| Placement { site: s.id.clone(), vm_count: *c })
        .collect();
    let mut run = RunConfig::new(tbs);
    run.tcp_window_bytes = 5.5e6;
    Scenario {
        id: "prop".into(),
        sites,
        placement,
        model: model(params),
        run,
        network: world_network(),
        prices: gc_prices(),
        compute: compute(comm),
        search: None,
    }
}

pub fn arb_counts() -> impl Strategy<Value = Vec<u32>> {
    prop::collection::vec(0u32..4, 4).prop_filter("at least one VM", |c| c.iter().sum::<u32>() > 0)
}

pub fn arb_comm() -> impl Strategy<Value = CommParams> {
    (0.0f64..10.0, 0.0f64..1.0, 1.0f64..2.0).prop_map(|(b, g, s)| CommParams { beta_s: b, gamma_s: g, payload_scale: s })
}

pub fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1e-300)
}
