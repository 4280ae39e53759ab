//! Link measurements and the TCP stream model.
//!
//! Tabled bandwidths are single-stream measurements. A single stream is also
//! limited by its window: at most `window * 8 / rtt` bits per second. Several
//! streams add up linearly until they hit the measured multi-stream ceiling
//! of the path, or the tabled bandwidth when no ceiling is known.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use core::fmt;

/// One directional measurement between two site groups.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Link {
    pub bandwidth_gbit: f64,
    /// One-way latency as measured by ping.
    pub latency_ms: f64,
    /// Aggregate rate reached with many parallel streams, if measured.
    pub ceiling_gbit: Option<f64>,
}

impl Link {
    pub fn new(bandwidth_gbit: f64, latency_ms: f64) -> Self {
        Link { bandwidth_gbit, latency_ms, ceiling_gbit: None }
    }

    pub fn with_ceiling(mut self, ceiling_gbit: f64) -> Self {
        self.ceiling_gbit = Some(ceiling_gbit);
        self
    }

    /// Round-trip time in seconds.
    pub fn rtt_s(&self) -> f64 {
        2.0 * self.latency_ms / 1e3
    }
}

/// Window-limited rate of one TCP stream, in Gbit/s.
pub fn single_stream_bandwidth(link: &Link, tcp_window_bytes: f64) -> f64 {
    let rtt = link.rtt_s();
    if rtt <= 0.0 {
        return link.bandwidth_gbit;
    }
    let window_cap = tcp_window_bytes * 8.0 / rtt / 1e9;
    link.bandwidth_gbit.min(window_cap)
}

/// Rate of `n_streams` parallel streams, in Gbit/s.
///
/// Grows linearly with the stream count up to the measured ceiling. Without
/// a ceiling the tabled bandwidth is the limit.
pub fn aggregate_bandwidth(link: &Link, n_streams: u32, tcp_window_bytes: f64, ceiling_gbit: Option<f64>) -> f64 {
    let n = n_streams.max(1) as f64;
    let limit = ceiling_gbit.or(link.ceiling_gbit).unwrap_or(link.bandwidth_gbit);
    limit.min(n * single_stream_bandwidth(link, tcp_window_bytes))
}

/// Resolved path between two sites.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EffectiveChannel {
    pub link: Link,
    pub single_stream_gbit: f64,
    pub rtt_ms: f64,
    pub tcp_window_bytes: f64,
}

impl EffectiveChannel {
    pub fn from_link(link: Link, tcp_window_bytes: f64) -> Self {
        EffectiveChannel {
            link,
            single_stream_gbit: single_stream_bandwidth(&link, tcp_window_bytes),
            rtt_ms: 2.0 * link.latency_ms,
            tcp_window_bytes,
        }
    }

    pub fn aggregate_gbit(&self, n_streams: u32) -> f64 {
        aggregate_bandwidth(&self.link, n_streams, self.tcp_window_bytes, None)
    }

    pub fn rtt_s(&self) -> f64 {
        self.rtt_ms / 1e3
    }
}

/// Directional link table between site groups.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct NetworkMatrix {
    links: BTreeMap<(String, String), Link>,
}

impl NetworkMatrix {
    pub fn new() -> Self {
        Self::default()
    }

    /// Inserts a measurement from `a` to `b`. The reverse direction is filled
    /// in as well unless it has its own measurement.
    pub fn insert(&mut self, a: &str, b: &str, link: Link) {
        self.links.insert((a.into(), b.into()), link);
        self.links.entry((b.into(), a.into())).or_insert(link);
    }

    /// Inserts a measurement without touching the reverse direction.
    pub fn insert_directed(&mut self, a: &str, b: &str, link: Link) {
        self.links.insert((a.into(), b.into()), link);
    }

    /// Adds every link of `other`, replacing entries with the same key.
    pub fn merge(&mut self, other: &NetworkMatrix) {
        for (k, v) in &other.links {
            self.links.insert(k.clone(), *v);
        }
    }

    pub fn link(&self, a: &str, b: &str) -> Option<&Link> {
        self.links.get(&(a.into(), b.into()))
    }

    pub fn links(&self) -> impl Iterator<Item = (&str, &str, &Link)> {
        self.links.iter().map(|((a, b), l)| (a.as_str(), b.as_str(), l))
    }

    pub fn groups(&self) -> BTreeSet<&str> {
        self.links.keys().flat_map(|(a, b)| [a.as_str(), b.as_str()]).collect()
    }

    pub fn is_empty(&self) -> bool {
        self.links.is_empty()
    }

    /// Checks value ranges and that each group has a local entry.
    pub fn validate(&self) -> Result<(), NetError> {
        for ((a, b), l) in &self.links {
            if !(l.bandwidth_gbit > 0.0) || !l.bandwidth_gbit.is_finite() {
                return Err(NetError::InvalidLink { from: a.clone(), to: b.clone(), what: "bandwidth_gbit must be positive" });
            }
            if !(l.latency_ms >= 0.0) || !l.latency_ms.is_finite() {
                return Err(NetError::InvalidLink { from: a.clone(), to: b.clone(), what: "latency_ms must be >= 0" });
            }
            if let Some(c) = l.ceiling_gbit {
                if !(c > 0.0) {
                    return Err(NetError::InvalidLink { from: a.clone(), to: b.clone(), what: "ceiling_gbit must be positive" });
                }
            }
        }
        for g in self.groups() {
            if self.link(g, g).is_none() {
                return Err(NetError::MissingLink { from: g.into(), to: g.into() });
            }
        }
        Ok(())
    }

    /// Path between two groups: the smaller of the two directional
    /// bandwidths, their mean latency and the smaller known ceiling.
    pub fn pairwise_channel(&self, a: &str, b: &str, tcp_window_bytes: f64) -> Result<EffectiveChannel, NetError> {
        let missing = || NetError::MissingLink { from: a.into(), to: b.into() };
        let ab = self.link(a, b).ok_or_else(missing)?;
        let ba = self.link(b, a).ok_or_else(missing)?;
        let ceiling = match (ab.ceiling_gbit, ba.ceiling_gbit) {
            (Some(x), Some(y)) => Some(x.min(y)),
            (x, y) => x.or(y),
        };
        let link = Link {
            bandwidth_gbit: ab.bandwidth_gbit.min(ba.bandwidth_gbit),
            latency_ms: (ab.latency_ms + ba.latency_ms) / 2.0,
            ceiling_gbit: ceiling,
        };
        Ok(EffectiveChannel::from_link(link, tcp_window_bytes))
    }
}

/// Network lookup failures.
#[derive(Debug, Clone, PartialEq)]
pub enum NetError {
    MissingLink { from: String, to: String },
    InvalidLink { from: String, to: String, what: &'static str },
}

impl fmt::Display for NetError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NetError::MissingLink { from, to } => write!(f, "no link between {from} and {to}"),
            NetError::InvalidLink { from, to, what } => write!(f, "link {from}-{to}: {what}"),
        }
    }
}

impl core::error::Error for NetError {}

#[cfg(test)]
mod tests {
    use super::*;

    const WINDOW: f64 = 2.5e6;

    #[test]
    fn local_link_is_bandwidth_limited() {
        let l = Link::new(6.90, 0.66);
        assert_eq!(single_stream_bandwidth(&l, WINDOW), 6.90);
    }

    #[test]
    fn transatlantic_single_stream_cap() {
        let l = Link::new(10.0, 150.8);
        let mbit = single_stream_bandwidth(&l, WINDOW) * 1e3;
        assert!((mbit - 2.5e6 * 8.0 / 0.3016 / 1e6).abs() < 1e-9);
        assert!((mbit - 66.3).abs() < 0.05);
    }

    #[test]
    fn zero_latency_ignores_window() {
        let l = Link::new(3.3, 0.0);
        assert_eq!(single_stream_bandwidth(&l, 1.0), 3.3);
    }

    #[test]
    fn aggregate_hits_ceiling() {
        let l = Link::new(0.05, 159.05);
        assert_eq!(aggregate_bandwidth(&l, 80, WINDOW, Some(4.0)), 4.0);
        assert_eq!(aggregate_bandwidth(&l, 1, WINDOW, None), single_stream_bandwidth(&l, WINDOW));
        let seven = aggregate_bandwidth(&Link::new(10.0, 150.8), 7, WINDOW, None) * 1e3;
        assert!((seven - 7.0 * 66.31).abs() < 0.5);
    }

    #[test]
    fn channel_uses_min_bandwidth_and_mean_latency() {
        let mut m = NetworkMatrix::new();
        m.insert_directed("GC", "AZURE", Link::new(0.45, 51.22));
        m.insert_directed("AZURE", "GC", Link::new(0.47, 49.80));
        let ch = m.pairwise_channel("GC", "AZURE", WINDOW).unwrap();
        assert_eq!(ch.link.bandwidth_gbit, 0.45);
        assert!((ch.link.latency_ms - 50.51).abs() < 1e-9);
        assert_eq!(ch, m.pairwise_channel("AZURE", "GC", WINDOW).unwrap());
        assert!(matches!(m.pairwise_channel("GC", "AWS", WINDOW), Err(NetError::MissingLink { .. })));
    }

    #[test]
    fn insert_mirrors_missing_direction_only() {
        let mut m = NetworkMatrix::new();
        m.insert("US", "EU", Link::new(0.21, 103.11));
        assert_eq!(m.link("EU", "US").unwrap().latency_ms, 103.11);
        m.insert("EU", "US", Link::new(0.21, 103.14));
        assert_eq!(m.link("US", "EU").unwrap().latency_ms, 103.11);
        assert_eq!(m.link("EU", "US").unwrap().latency_ms, 103.14);
    }

    #[test]
    fn validation_requires_diagonal() {
        let mut m = NetworkMatrix::new();
        m.insert("US", "EU", Link::new(0.21, 103.11));
        assert!(m.validate().is_err());
        m.insert("US", "US", Link::new(6.9, 0.66));
        m.insert("EU", "EU", Link::new(6.81, 0.65));
        assert!(m.validate().is_ok());
    }
}
