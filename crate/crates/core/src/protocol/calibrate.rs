//! Fitting the averaging overheads and middleware penalties to measurements.
//!
//! Simulated averaging time is `scale * transfer + beta + gamma * n`, linear
//! in the three parameters. Each measured run gives one equation; the fit is
//! bounded least squares with `beta >= 0`, `gamma >= 0` and `scale >= 1`.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use super::{scenario_peers, simulate_with, CommParams, SimError};
use crate::catalog::Scenario;

/// What was measured for one run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Measured {
    /// Wall-clock averaging time per round, in seconds.
    CommSeconds(f64),
    /// Global throughput in samples per second.
    Sps(f64),
}

/// One measured run.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub scenario: Scenario,
    pub measured: Measured,
}

/// Plain single-device throughput next to the throughput of the same device
/// running under the training middleware.
#[derive(Debug, Clone, PartialEq)]
pub struct ThroughputPair {
    pub model: String,
    pub baseline_sps: f64,
    pub local_sps: f64,
}

/// Which overheads are fitted. Pinned ones keep their value from `fixed`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitSpec {
    pub free_beta: bool,
    pub free_gamma: bool,
    pub free_payload_scale: bool,
    pub fixed: CommParams,
}

impl Default for FitSpec {
    fn default() -> Self {
        FitSpec { free_beta: true, free_gamma: true, free_payload_scale: false, fixed: CommParams::default() }
    }
}

/// Fitted overheads and penalties.
#[derive(Debug, Clone, PartialEq)]
pub struct Calibration {
    pub comm: CommParams,
    /// Measured minus fitted averaging time per observation, in seconds.
    pub residuals_s: Vec<f64>,
    pub penalties: BTreeMap<String, f64>,
    /// Pair penalty minus fitted penalty, per model.
    pub penalty_residuals: BTreeMap<String, Vec<f64>>,
}

/// Calibration failures.
#[derive(Debug, Clone, PartialEq)]
pub enum CalibrationError {
    /// Too few or too similar observations. Names the parameter left open.
    UnderdeterminedFit { observations: usize, free: usize, unconstrained: &'static str },
    Domain(String),
    Sim(SimError),
}

impl From<SimError> for CalibrationError {
    fn from(e: SimError) -> Self {
        CalibrationError::Sim(e)
    }
}

impl fmt::Display for CalibrationError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CalibrationError::UnderdeterminedFit { observations, free, unconstrained } => write!(
                f,
                "underdetermined fit: {observations} observation(s) for {free} free parameter(s); {unconstrained} is unconstrained"
            ),
            CalibrationError::Domain(m) => write!(f, "domain error: {m}"),
            CalibrationError::Sim(e) => write!(f, "simulation failed: {e}"),
        }
    }
}

impl core::error::Error for CalibrationError {}

const NAMES: [&str; 3] = ["beta", "gamma", "payload_scale"];
const LOWER: [f64; 3] = [0.0, 0.0, 1.0];

/// One linear equation: `measured = scale * transfer + beta + gamma * n`.
#[derive(Debug, Clone, Copy)]
struct Row {
    transfer_s: f64,
    peers: f64,
    measured_s: f64,
}

impl Row {
    fn coeffs(&self) -> [f64; 3] {
        [1.0, self.peers, self.transfer_s]
    }
}

fn observation_row(obs: &Observation) -> Result<Row, CalibrationError> {
    let peers = scenario_peers(&obs.scenario)?;
    if peers.len() < 2 {
        return Err(CalibrationError::Domain(format!(
            "observation {} has a single peer and no averaging",
            obs.scenario.id
        )));
    }
    let zero = CommParams::default();
    let report = simulate_with(&obs.scenario, &peers, &zero)?;
    let transfer_s = report.stage1_s + report.stage2_s;
    let measured_s = match obs.measured {
        Measured::CommSeconds(t) => t,
        Measured::Sps(sps) => {
            if !(sps > 0.0) {
                return Err(CalibrationError::Domain(format!("observation {}: throughput must be positive", obs.scenario.id)));
            }
            let visible = report.tbs / sps - report.t_calc_s - report.t_wait_s;
            let hidden = 1.0 - report.comm_overlap;
            if !(hidden > 0.0) {
                return Err(CalibrationError::Domain(format!(
                    "observation {}: averaging fully overlapped, time not observable",
                    obs.scenario.id
                )));
            }
            visible / hidden
        }
    };
    if !measured_s.is_finite() {
        return Err(CalibrationError::Domain(format!("observation {}: non-finite averaging time", obs.scenario.id)));
    }
    Ok(Row { transfer_s, peers: peers.len() as f64, measured_s })
}

/// Fits averaging overheads to observations and penalties to throughput pairs.
pub fn calibrate(observations: &[Observation], pairs: &[ThroughputPair], spec: FitSpec) -> Result<Calibration, CalibrationError> {
    let rows = observations.iter().map(observation_row).collect::<Result<Vec<_>, _>>()?;
    let (comm, residuals_s) = fit_rows(&rows, spec)?;
    let (penalties, penalty_residuals) = fit_penalties(pairs)?;
    Ok(Calibration { comm, residuals_s, penalties, penalty_residuals })
}

/// Mean ratio of middleware to plain throughput, per model.
#[allow(clippy::type_complexity)]
pub fn fit_penalties(pairs: &[ThroughputPair]) -> Result<(BTreeMap<String, f64>, BTreeMap<String, Vec<f64>>), CalibrationError> {
    let mut ratios: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for p in pairs {
        if !(p.baseline_sps > 0.0) || !(p.local_sps > 0.0) {
            return Err(CalibrationError::Domain(format!("{}: throughputs must be positive", p.model)));
        }
        let r = p.local_sps / p.baseline_sps;
        if r > 1.0 {
            return Err(CalibrationError::Domain(format!("{}: middleware throughput exceeds baseline", p.model)));
        }
        ratios.entry(p.model.clone()).or_default().push(r);
    }
    let mut fitted = BTreeMap::new();
    let mut residuals = BTreeMap::new();
    for (model, rs) in ratios {
        let mean = rs.iter().sum::<f64>() / rs.len() as f64;
        residuals.insert(model.clone(), rs.iter().map(|r| r - mean).collect());
        fitted.insert(model, mean);
    }
    Ok((fitted, residuals))
}

/// Fits `total = beta + gamma * n` through (peer count, total seconds) points
/// with no transfer term.
pub fn fit_linear_overhead(points: &[(u32, f64)]) -> Result<(f64, f64), CalibrationError> {
    let rows: Vec<Row> = points.iter().map(|&(n, t)| Row { transfer_s: 0.0, peers: n as f64, measured_s: t }).collect();
    let free = [true, true, false];
    check_rank(&rows, free)?;
    let x = solve_subset(&rows, free, [0.0, 0.0, 0.0]).ok_or(CalibrationError::UnderdeterminedFit {
        observations: rows.len(),
        free: 2,
        unconstrained: "gamma",
    })?;
    Ok((x[0], x[1]))
}

fn fit_rows(rows: &[Row], spec: FitSpec) -> Result<(CommParams, Vec<f64>), CalibrationError> {
    let free = [spec.free_beta, spec.free_gamma, spec.free_payload_scale];
    let fixed = [spec.fixed.beta_s, spec.fixed.gamma_s, spec.fixed.payload_scale];
    check_rank(rows, free)?;

    // Try every way of pinning free parameters at their bounds and keep the
    // feasible solution with the smallest squared error.
    let mut best: Option<([f64; 3], f64)> = None;
    for mask in 0u8..8 {
        let mut sub = free;
        let mut base = fixed;
        let mut skip = false;
        for k in 0..3 {
            if mask & (1 << k) != 0 {
                if !free[k] {
                    skip = true;
                }
                sub[k] = false;
                base[k] = LOWER[k];
            }
        }
        if skip {
            continue;
        }
        let Some(x) = solve_subset(rows, sub, base) else { continue };
        if (0..3).any(|k| free[k] && x[k] < LOWER[k] - 1e-12) {
            continue;
        }
        let mut x = x;
        for k in 0..3 {
            if free[k] && x[k] < LOWER[k] {
                x[k] = LOWER[k];
            }
        }
        let sse: f64 = rows.iter().map(|r| residual(r, &x)).map(|e| e * e).sum();
        if best.is_none_or(|(_, b)| sse < b) {
            best = Some((x, sse));
        }
    }
    let (x, _) = best.ok_or(CalibrationError::Domain("no feasible fit within parameter bounds".into()))?;
    let params = CommParams { beta_s: x[0], gamma_s: x[1], payload_scale: x[2] };
    Ok((params, rows.iter().map(|r| residual(r, &x)).collect()))
}

fn residual(r: &Row, x: &[f64; 3]) -> f64 {
    let c = r.coeffs();
    r.measured_s - (c[0] * x[0] + c[1] * x[1] + c[2] * x[2])
}

/// Rejects fits with fewer equations than unknowns or collinear columns.
fn check_rank(rows: &[Row], free: [bool; 3]) -> Result<(), CalibrationError> {
    let idx: Vec<usize> = (0..3).filter(|&k| free[k]).collect();
    if idx.is_empty() {
        return Ok(());
    }
    if rows.len() < idx.len() {
        // The first parameter beyond the number of equations is left open.
        let unconstrained = NAMES[idx[rows.len()]];
        return Err(CalibrationError::UnderdeterminedFit { observations: rows.len(), free: idx.len(), unconstrained });
    }
    // Gram-Schmidt in parameter order: a column that adds nothing new is
    // unconstrained by the data.
    let mut basis: Vec<Vec<f64>> = Vec::new();
    for &k in &idx {
        let mut v: Vec<f64> = rows.iter().map(|r| r.coeffs()[k]).collect();
        let norm0 = dot(&v, &v);
        for b in &basis {
            let p = dot(&v, b);
            for (vi, bi) in v.iter_mut().zip(b) {
                *vi -= p * bi;
            }
        }
        let norm = dot(&v, &v);
        if !(norm > 1e-18 * norm0.max(1e-300)) || norm0 == 0.0 {
            return Err(CalibrationError::UnderdeterminedFit { observations: rows.len(), free: idx.len(), unconstrained: NAMES[k] });
        }
        let inv = 1.0 / sqrt(norm);
        basis.push(v.iter().map(|x| x * inv).collect());
    }
    Ok(())
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Newton iteration; the crate has no libm.
fn sqrt(x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    let mut g = if x > 1.0 { x / 2.0 } else { 1.0 };
    for _ in 0..200 {
        let next = 0.5 * (g + x / g);
        if next == g {
            break;
        }
        g = next;
    }
    g
}

/// Least squares over the parameters flagged in `sub`, others held at `base`.
fn solve_subset(rows: &[Row], sub: [bool; 3], base: [f64; 3]) -> Option<[f64; 3]> {
    let idx: Vec<usize> = (0..3).filter(|&k| sub[k]).collect();
    let mut x = base;
    if idx.is_empty() {
        return Some(x);
    }
    let m = idx.len();
    let mut a = vec![vec![0.0; m + 1]; m];
    for r in rows {
        let c = r.coeffs();
        let mut y = r.measured_s;
        for k in 0..3 {
            if !sub[k] {
                y -= c[k] * base[k];
            }
        }
        for (i, &ki) in idx.iter().enumerate() {
            for (j, &kj) in idx.iter().enumerate() {
                a[i][j] += c[ki] * c[kj];
            }
            a[i][m] += c[ki] * y;
        }
    }
    let sol = gauss(a)?;
    for (i, &k) in idx.iter().enumerate() {
        x[k] = sol[i];
    }
    Some(x)
}

/// Gaussian elimination with partial pivoting on an augmented matrix.
fn gauss(mut a: Vec<Vec<f64>>) -> Option<Vec<f64>> {
    let m = a.len();
    for col in 0..m {
        let scale = a.iter().map(|r| r[col].abs()).fold(0.0, f64::max);
        let piv = (col..m).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if !(a[piv][col].abs() > 1e-12 * scale.max(1e-300)) {
            return None;
        }
        a.swap(col, piv);
        for r in col + 1..m {
            let f = a[r][col] / a[col][col];
            for c in col..=m {
                a[r][c] -= f * a[col][c];
            }
        }
    }
    let mut x = vec![0.0; m];
    for i in (0..m).rev() {
        let mut s = a[i][m];
        for j in i + 1..m {
            s -= a[i][j] * x[j];
        }
        x[i] = s / a[i][i];
    }
    Some(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_overhead_through_two_totals() {
        let (beta, gamma) = fit_linear_overhead(&[(2, 10.0), (8, 14.4)]).unwrap();
        assert!((gamma - 4.4 / 6.0).abs() < 1e-12);
        assert!((beta - (10.0 - 2.0 * 4.4 / 6.0)).abs() < 1e-12);
        assert!((gamma - 0.733).abs() < 5e-4 && (beta - 8.53).abs() < 5e-3);
    }

    #[test]
    fn one_point_is_underdetermined() {
        let e = fit_linear_overhead(&[(2, 10.0)]).unwrap_err();
        assert!(matches!(e, CalibrationError::UnderdeterminedFit { unconstrained: "gamma", .. }));
    }

    #[test]
    fn equal_peer_counts_leave_gamma_open() {
        let e = fit_linear_overhead(&[(4, 10.0), (4, 11.0)]).unwrap_err();
        assert!(matches!(e, CalibrationError::UnderdeterminedFit { unconstrained: "gamma", .. }));
    }

    #[test]
    fn bounded_fit_pins_negative_gamma() {
        let rows = [
            Row { transfer_s: 0.0, peers: 2.0, measured_s: 10.0 },
            Row { transfer_s: 0.0, peers: 8.0, measured_s: 9.0 },
        ];
        let (p, _) = fit_rows(&rows, FitSpec::default()).unwrap();
        assert_eq!(p.gamma_s, 0.0);
        assert!((p.beta_s - 9.5).abs() < 1e-12);
    }

    #[test]
    fn scale_needs_independent_transfer_column() {
        let rows = [
            Row { transfer_s: 1.0, peers: 2.0, measured_s: 10.0 },
            Row { transfer_s: 2.0, peers: 4.0, measured_s: 12.0 },
            Row { transfer_s: 3.0, peers: 6.0, measured_s: 14.0 },
        ];
        let spec = FitSpec { free_payload_scale: true, ..FitSpec::default() };
        let e = fit_rows(&rows, spec).unwrap_err();
        assert!(matches!(e, CalibrationError::UnderdeterminedFit { unconstrained: "payload_scale", .. }));
    }

    #[test]
    fn recovers_exact_parameters() {
        let truth = [3.0, 0.5, 1.7];
        let rows: Vec<Row> = [(2.0, 1.0), (4.0, 3.5), (8.0, 2.0), (6.0, 7.0)]
            .iter()
            .map(|&(n, t)| Row { transfer_s: t, peers: n, measured_s: truth[0] + truth[1] * n + truth[2] * t })
            .collect();
        let spec = FitSpec { free_payload_scale: true, ..FitSpec::default() };
        let (p, res) = fit_rows(&rows, spec).unwrap();
        assert!((p.beta_s - 3.0).abs() < 1e-9 && (p.gamma_s - 0.5).abs() < 1e-9 && (p.payload_scale - 1.7).abs() < 1e-9);
        assert!(res.iter().all(|r| r.abs() < 1e-9));
    }

    #[test]
    fn penalty_from_pair() {
        let pairs = [ThroughputPair { model: "CONV".into(), baseline_sps: 185.0, local_sps: 185.0 * 0.48 }];
        let (p, _) = fit_penalties(&pairs).unwrap();
        assert!((p["CONV"] - 0.48).abs() < 1e-12);
        let bad = [ThroughputPair { model: "X".into(), baseline_sps: 1.0, local_sps: 2.0 }];
        assert!(fit_penalties(&bad).is_err());
    }

    #[test]
    fn newton_sqrt() {
        assert!((sqrt(2.0) - core::f64::consts::SQRT_2).abs() < 1e-15);
        assert_eq!(sqrt(0.0), 0.0);
    }
}
