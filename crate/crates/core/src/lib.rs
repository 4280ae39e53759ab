//! Deterministic timing, egress and cost model for data-parallel training
//! spread over rented GPU VMs in several clouds and continents.
//!
//! The crate is `no_std` and only needs an allocator. File formats, the
//! bundled data set and the command line live in the `geospot` crate.

#![no_std]
#![forbid(unsafe_code)]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod analytics;
pub mod catalog;
pub mod costing;
pub mod netmodel;
pub mod optimizer;
pub mod protocol;

pub use catalog::{
    Cloud, ComputeProfile, Continent, Domain, GpuSpec, ModelProfile, Placement, PriceBook,
    PricingMode, RunConfig, Scenario, Site, TrafficClass,
};
pub use netmodel::{EffectiveChannel, Link, NetworkMatrix};
pub use protocol::{CommParams, EpochReport, Grouping, Peer};

/// Bytes in one gigabyte as billed by cloud providers.
pub const BYTES_PER_GB: f64 = 1e9;
