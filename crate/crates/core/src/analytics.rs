//! Headline metrics derived from epoch reports.

use core::fmt;

use crate::protocol::EpochReport;

/// Ratio of calculation to averaging time, if any averaging happened.
pub fn granularity(report: &EpochReport) -> Option<f64> {
    ratio(report.t_calc_s, report.t_comm_s)
}

/// Granularity with matchmaking wait counted as communication.
pub fn granularity_with_wait(report: &EpochReport) -> Option<f64> {
    ratio(report.t_calc_s, report.t_comm_s + report.t_wait_s)
}

fn ratio(num: f64, den: f64) -> Option<f64> {
    if den > 0.0 {
        Some(num / den)
    } else {
        None
    }
}

/// Speedup over single-device throughput and the share of it each GPU adds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Speedup {
    pub speedup: f64,
    pub per_gpu: f64,
}

pub fn speedup(report: &EpochReport, baseline_sps: f64, n_gpus: u32) -> Speedup {
    let s = report.sps_global / baseline_sps;
    Speedup { speedup: s, per_gpu: s / n_gpus.max(1) as f64 }
}

/// Throughput ceiling as calculation time goes to zero. `None` when the
/// round has neither averaging nor wait, so nothing bounds it.
pub fn asymptotic_throughput(report: &EpochReport) -> Option<f64> {
    let fixed = (1.0 - report.comm_overlap) * report.t_comm_s + report.t_wait_s;
    ratio(report.tbs, fixed)
}

/// Best-case speedup from dividing calculation time by `factor` while
/// averaging time stays the same.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalingProjection {
    pub granularity: f64,
    pub factor: f64,
    pub predicted_speedup_upper: f64,
}

pub fn project_scaling(g: f64, factor: f64) -> Result<ScalingProjection, DomainError> {
    if !(g > 0.0) || g.is_nan() {
        return Err(DomainError("granularity must be positive"));
    }
    if !(factor > 1.0) || !factor.is_finite() {
        return Err(DomainError("factor must exceed 1"));
    }
    let upper = if g.is_infinite() { factor } else { (g + 1.0) / (g / factor + 1.0) };
    Ok(ScalingProjection { granularity: g, factor, predicted_speedup_upper: upper })
}

/// Argument outside the domain of a metric.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DomainError(pub &'static str);

impl fmt::Display for DomainError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "domain error: {}", self.0)
    }
}

impl core::error::Error for DomainError {}
