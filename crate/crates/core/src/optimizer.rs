//! Placement search over a catalog of sites.
//!
//! Small spaces are enumerated exhaustively. Larger ones use a local search
//! that starts from the best single-site placement and moves one VM at a
//! time.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;
use core::fmt;

use crate::analytics::project_scaling;
use crate::catalog::{CatalogError, Placement, PricingMode, Scenario, Site};
use crate::costing::{cost_report, usd_per_million, vm_cost, CostReport};
use crate::netmodel::NetError;
use crate::protocol::{simulate_epoch, EpochReport, SimError};

/// What the search optimizes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Objective {
    MaxSps,
    MinUsdPerMillion,
    /// Highest throughput whose total hourly cost stays within the budget.
    MaxSpsUnderBudget(f64),
}

impl Objective {
    pub fn label(&self) -> &'static str {
        match self {
            Objective::MaxSps => "max-sps",
            Objective::MinUsdPerMillion => "min-usd-per-million",
            Objective::MaxSpsUnderBudget(_) => "max-sps-under-budget",
        }
    }

    fn value(&self, report: &EpochReport, cost: &CostReport) -> f64 {
        match self {
            Objective::MinUsdPerMillion => cost.usd_per_million,
            _ => report.sps_global,
        }
    }

    /// Larger is better.
    fn score(&self, value: f64) -> f64 {
        match self {
            Objective::MinUsdPerMillion => -value,
            _ => value,
        }
    }
}

/// A rentable site and how many VMs it can supply.
#[derive(Debug, Clone, PartialEq)]
pub struct CatalogEntry {
    pub site: Site,
    pub max_count: u32,
    pub gpus_per_vm: u32,
}

/// Search space and goal.
#[derive(Debug, Clone, PartialEq)]
pub struct SearchSpec {
    pub catalog: Vec<CatalogEntry>,
    pub objective: Objective,
    /// Inclusive bounds on the number of VMs.
    pub vm_bounds: (u32, u32),
    /// Inclusive bounds on the number of GPUs, counting every device of a VM.
    pub gpu_bounds: Option<(u32, u32)>,
    pub mode: PricingMode,
    pub top_k: usize,
}

impl SearchSpec {
    pub fn validate(&self) -> Result<(), CatalogError> {
        if self.catalog.is_empty() {
            return Err(CatalogError::invalid("search.catalog", "must not be empty"));
        }
        let (lo, hi) = self.vm_bounds;
        if lo > hi || hi == 0 {
            return Err(CatalogError::invalid("search.total_vm_bounds", "inconsistent bounds"));
        }
        if let Some((lo, hi)) = self.gpu_bounds {
            if lo > hi || hi == 0 {
                return Err(CatalogError::invalid("search.total_gpu_bounds", "inconsistent bounds"));
            }
        }
        if let Objective::MaxSpsUnderBudget(b) = self.objective {
            if !(b > 0.0) {
                return Err(CatalogError::invalid("search.budget_usd_per_h", "must be positive"));
            }
        }
        for e in &self.catalog {
            if e.gpus_per_vm == 0 {
                return Err(CatalogError::invalid(format!("search.catalog.{}.gpus_per_vm", e.site.id), "must be positive"));
            }
        }
        Ok(())
    }

    /// Number of count vectors before bounds are applied.
    pub fn cardinality(&self) -> u128 {
        self.catalog
            .iter()
            .fold(1u128, |acc, e| acc.saturating_mul(u128::from(e.max_count) + 1))
    }

    fn in_bounds(&self, counts: &[u32]) -> bool {
        let vms: u32 = counts.iter().sum();
        if vms == 0 || vms < self.vm_bounds.0 || vms > self.vm_bounds.1 {
            return false;
        }
        if counts.iter().zip(&self.catalog).any(|(c, e)| *c > e.max_count) {
            return false;
        }
        if let Some((lo, hi)) = self.gpu_bounds {
            let gpus: u32 = counts.iter().zip(&self.catalog).map(|(c, e)| c * e.gpus_per_vm).sum();
            if gpus < lo || gpus > hi {
                return false;
            }
        }
        true
    }

    /// Placement list for a count vector, skipping unused sites.
    pub fn placement(&self, counts: &[u32]) -> Vec<Placement> {
        counts
            .iter()
            .zip(&self.catalog)
            .filter(|(c, _)| **c > 0)
            .map(|(c, e)| Placement { site: e.site.id.clone(), vm_count: *c })
            .collect()
    }

    /// Short text form, e.g. `gc-us-t4x8+lambda-a10x2`.
    pub fn encode(&self, counts: &[u32]) -> String {
        let parts: Vec<String> = self
            .placement(counts)
            .iter()
            .map(|p| format!("{}x{}", p.site, p.vm_count))
            .collect();
        parts.join("+")
    }
}

/// Knobs of the search driver.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchOptions {
    /// Largest space enumerated exhaustively.
    pub enumeration_cap: u128,
    /// Skip local-search moves whose optimistic bound cannot win.
    pub prune: bool,
}

impl Default for SearchOptions {
    fn default() -> Self {
        SearchOptions { enumeration_cap: 1_000_000, prune: true }
    }
}

/// Every count vector within bounds, in lexicographic order of the counts.
pub fn enumerate_placements(spec: &SearchSpec, cap: u128) -> Result<Vec<Vec<u32>>, OptError> {
    let cardinality = spec.cardinality();
    if cardinality > cap {
        return Err(OptError::SpaceTooLarge { cardinality, cap });
    }
    let n = spec.catalog.len();
    let mut out = Vec::new();
    let mut counts = vec![0u32; n];
    loop {
        if spec.in_bounds(&counts) {
            out.push(counts.clone());
        }
        // Odometer with the first site as the most significant digit.
        let mut i = n;
        loop {
            if i == 0 {
                return Ok(out);
            }
            i -= 1;
            if counts[i] < spec.catalog[i].max_count {
                counts[i] += 1;
                for c in &mut counts[i + 1..] {
                    *c = 0;
                }
                break;
            }
        }
    }
}

/// A simulated candidate.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub counts: Vec<u32>,
    pub report: EpochReport,
    pub cost: CostReport,
    pub objective_value: f64,
}

/// Candidate in the final ranking. Rank 1 is best.
#[derive(Debug, Clone, PartialEq)]
pub struct RankedPlacement {
    pub rank: usize,
    pub placement: Vec<Placement>,
    pub encoding: String,
    pub counts: Vec<u32>,
    pub report: EpochReport,
    pub cost: CostReport,
    pub objective_value: f64,
}

/// Search result with notes on skipped candidates.
#[derive(Debug, Clone, PartialEq)]
pub struct SearchOutcome {
    pub ranked: Vec<RankedPlacement>,
    pub diagnostics: Vec<String>,
    pub evaluated: usize,
    pub exhaustive: bool,
}

/// Builds the scenario of one candidate from the template.
pub fn candidate_scenario(spec: &SearchSpec, template: &Scenario, counts: &[u32]) -> Scenario {
    let mut s = template.clone();
    s.sites = spec.catalog.iter().map(|e| e.site.clone()).collect();
    s.placement = spec.placement(counts);
    s.run.pricing_mode = spec.mode;
    s.search = None;
    s.id = format!("{}:{}", template.id, spec.encode(counts));
    s
}

/// Simulates one candidate. `Ok(Err(reason))` marks it infeasible.
pub fn evaluate(spec: &SearchSpec, template: &Scenario, counts: &[u32]) -> Result<Result<Evaluation, String>, OptError> {
    let scenario = candidate_scenario(spec, template, counts);
    let report = match simulate_epoch(&scenario) {
        Ok(r) => r,
        Err(SimError::Net(e @ NetError::MissingLink { .. })) => {
            return Ok(Err(format!("{}: {e}", spec.encode(counts))));
        }
        Err(e) => return Err(e.into()),
    };
    let cost = cost_report(&scenario, &report)?;
    if let Objective::MaxSpsUnderBudget(budget) = spec.objective {
        if cost.usd_per_h > budget {
            return Ok(Err(format!(
                "{}: {:.4} USD/h exceeds budget {budget}",
                spec.encode(counts),
                cost.usd_per_h
            )));
        }
    }
    let objective_value = spec.objective.value(&report, &cost);
    Ok(Ok(Evaluation { counts: counts.to_vec(), report, cost, objective_value }))
}

/// Finds the best placements for `spec` using `template` for everything but
/// the placement itself.
pub fn search(spec: &SearchSpec, template: &Scenario, opts: SearchOptions) -> Result<SearchOutcome, OptError> {
    spec.validate()?;
    let mut diagnostics = Vec::new();
    let mut evals: BTreeMap<Vec<u32>, Option<Evaluation>> = BTreeMap::new();
    let exhaustive = spec.cardinality() <= opts.enumeration_cap;
    if exhaustive {
        for counts in enumerate_placements(spec, opts.enumeration_cap)? {
            let e = evaluate(spec, template, &counts)?;
            record(&mut evals, &mut diagnostics, counts, e);
        }
    } else {
        local_search(spec, template, opts, &mut evals, &mut diagnostics)?;
    }
    let evaluated = evals.len();
    let feasible: Vec<Evaluation> = evals.into_values().flatten().collect();
    if feasible.is_empty() {
        diagnostics.push(String::from("no feasible placement"));
    }
    let ranked = rank(spec, feasible);
    Ok(SearchOutcome { ranked, diagnostics, evaluated, exhaustive })
}

fn record(
    evals: &mut BTreeMap<Vec<u32>, Option<Evaluation>>,
    diagnostics: &mut Vec<String>,
    counts: Vec<u32>,
    e: Result<Evaluation, String>,
) {
    match e {
        Ok(ev) => {
            evals.insert(counts, Some(ev));
        }
        Err(why) => {
            diagnostics.push(format!("infeasible {why}"));
            evals.insert(counts, None);
        }
    }
}

/// Orders evaluations: objective first, values within 1e-9 relative count as
/// ties, which go to fewer VMs and then to earlier catalog sites.
pub fn rank(spec: &SearchSpec, mut feasible: Vec<Evaluation>) -> Vec<RankedPlacement> {
    let score = |e: &Evaluation| spec.objective.score(e.objective_value);
    feasible.sort_by(|a, b| score(b).total_cmp(&score(a)).then_with(|| encoding_key(&a.counts).cmp(&encoding_key(&b.counts))));
    let mut tiers = Vec::with_capacity(feasible.len());
    let mut tier = 0usize;
    let mut head = f64::NAN;
    for e in &feasible {
        let s = score(e);
        if head.is_nan() || (head - s).abs() > 1e-9 * head.abs().max(1.0) {
            if !head.is_nan() {
                tier += 1;
            }
            head = s;
        }
        tiers.push(tier);
    }
    let mut keyed: Vec<(usize, Evaluation)> = tiers.into_iter().zip(feasible).collect();
    keyed.sort_by(|(ta, a), (tb, b)| {
        ta.cmp(tb)
            .then_with(|| a.counts.iter().sum::<u32>().cmp(&b.counts.iter().sum::<u32>()))
            .then_with(|| encoding_key(&a.counts).cmp(&encoding_key(&b.counts)))
    });
    keyed
        .into_iter()
        .take(spec.top_k.max(1))
        .enumerate()
        .map(|(i, (_, e))| RankedPlacement {
            rank: i + 1,
            placement: spec.placement(&e.counts),
            encoding: spec.encode(&e.counts),
            counts: e.counts,
            report: e.report,
            cost: e.cost,
            objective_value: e.objective_value,
        })
        .collect()
}

/// Nonzero (site index, count) pairs; earlier sites sort first.
fn encoding_key(counts: &[u32]) -> Vec<(usize, u32)> {
    counts.iter().enumerate().filter(|(_, c)| **c > 0).map(|(i, c)| (i, *c)).collect()
}

fn better(spec: &SearchSpec, a: &Evaluation, b: &Evaluation) -> bool {
    let (sa, sb) = (spec.objective.score(a.objective_value), spec.objective.score(b.objective_value));
    if (sa - sb).abs() > 1e-9 * sa.abs().max(1.0) {
        return sa > sb;
    }
    let (va, vb) = (a.counts.iter().sum::<u32>(), b.counts.iter().sum::<u32>());
    if va != vb {
        return va < vb;
    }
    encoding_key(&a.counts).cmp(&encoding_key(&b.counts)) == Ordering::Less
}

fn local_search(
    spec: &SearchSpec,
    template: &Scenario,
    opts: SearchOptions,
    evals: &mut BTreeMap<Vec<u32>, Option<Evaluation>>,
    diagnostics: &mut Vec<String>,
) -> Result<(), OptError> {
    let n = spec.catalog.len();
    let mut incumbent: Option<Evaluation> = None;
    for i in 0..n {
        let mut counts = vec![0u32; n];
        let start = (1..=spec.catalog[i].max_count).find(|&c| {
            counts[i] = c;
            spec.in_bounds(&counts)
        });
        let Some(c) = start else { continue };
        counts[i] = c;
        let e = evaluate(spec, template, &counts)?;
        record(evals, diagnostics, counts.clone(), e);
        if let Some(Some(ev)) = evals.get(&counts) {
            if incumbent.as_ref().is_none_or(|inc| better(spec, ev, inc)) {
                incumbent = Some(ev.clone());
            }
        }
    }
    let Some(mut inc) = incumbent else {
        diagnostics.push(String::from("no single-site starting point within bounds"));
        return Ok(());
    };
    loop {
        let mut best_move: Option<Evaluation> = None;
        for (cand, is_add) in neighbours(spec, &inc.counts) {
            if evals.contains_key(&cand) {
                if let Some(Some(ev)) = evals.get(&cand) {
                    if better(spec, ev, best_move.as_ref().unwrap_or(&inc)) {
                        best_move = Some(ev.clone());
                    }
                }
                continue;
            }
            if opts.prune && is_add && cannot_win(spec, template, &inc, &cand)? {
                continue;
            }
            let e = evaluate(spec, template, &cand)?;
            record(evals, diagnostics, cand.clone(), e);
            if let Some(Some(ev)) = evals.get(&cand) {
                if better(spec, ev, best_move.as_ref().unwrap_or(&inc)) {
                    best_move = Some(ev.clone());
                }
            }
        }
        match best_move {
            Some(m) => inc = m,
            None => return Ok(()),
        }
    }
}

/// Add, remove and swap moves within bounds. The flag marks adds.
fn neighbours(spec: &SearchSpec, counts: &[u32]) -> Vec<(Vec<u32>, bool)> {
    let n = counts.len();
    let mut out = Vec::new();
    for i in 0..n {
        if counts[i] < spec.catalog[i].max_count {
            let mut c = counts.to_vec();
            c[i] += 1;
            out.push((c, true));
        }
        if counts[i] > 0 {
            let mut c = counts.to_vec();
            c[i] -= 1;
            out.push((c.clone(), false));
            for j in 0..n {
                if j != i && c[j] < spec.catalog[j].max_count {
                    let mut s = c.clone();
                    s[j] += 1;
                    out.push((s, false));
                }
            }
        }
    }
    out.retain(|(c, _)| spec.in_bounds(c));
    out
}

/// Optimistic check for an add move, holding averaging time fixed.
fn cannot_win(spec: &SearchSpec, template: &Scenario, inc: &Evaluation, cand: &[u32]) -> Result<bool, OptError> {
    let scenario = candidate_scenario(spec, template, cand);
    let rate_sum = |s: &Scenario| -> Result<f64, OptError> {
        let peers = crate::protocol::scenario_peers(s)?;
        Ok(peers.iter().map(|p| p.rate).sum())
    };
    let inc_scenario = candidate_scenario(spec, template, &inc.counts);
    let factor = rate_sum(&scenario)? / rate_sum(&inc_scenario)?;
    let r = &inc.report;
    let upper_sps = match crate::analytics::granularity(r) {
        Some(g) if factor > 1.0 && r.t_wait_s == 0.0 && r.t_calc_s / factor >= scenario.run.matchmaking_floor_s => {
            r.sps_global * project_scaling(g, factor).map_err(|e| OptError::Invalid(format!("{e}")))?.predicted_speedup_upper
        }
        _ => {
            let t_calc = r.tbs / (rate_sum(&scenario)?);
            let wait = (scenario.run.matchmaking_floor_s - t_calc).max(0.0);
            r.tbs / (t_calc + wait + (1.0 - r.comm_overlap) * r.t_comm_s)
        }
    };
    let sites: Vec<(&Site, u32)> = cand.iter().zip(&spec.catalog).filter(|(c, _)| **c > 0).map(|(c, e)| (&e.site, *c)).collect();
    let rent = vm_cost(&sites, &template.prices, spec.mode)?.total_usd_per_h;
    Ok(match spec.objective {
        Objective::MaxSps => upper_sps <= inc.report.sps_global,
        Objective::MaxSpsUnderBudget(b) => rent > b || upper_sps <= inc.report.sps_global,
        Objective::MinUsdPerMillion => usd_per_million(rent, upper_sps) >= inc.objective_value,
    })
}

/// Search failures.
#[derive(Debug, Clone, PartialEq)]
pub enum OptError {
    SpaceTooLarge { cardinality: u128, cap: u128 },
    Invalid(String),
    Sim(SimError),
}

impl From<SimError> for OptError {
    fn from(e: SimError) -> Self {
        OptError::Sim(e)
    }
}

impl From<CatalogError> for OptError {
    fn from(e: CatalogError) -> Self {
        OptError::Sim(SimError::Catalog(e))
    }
}

impl fmt::Display for OptError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            OptError::SpaceTooLarge { cardinality, cap } => {
                write!(f, "search space of {cardinality} placements exceeds the enumeration cap {cap}")
            }
            OptError::Invalid(m) => f.write_str(m),
            OptError::Sim(e) => e.fmt(f),
        }
    }
}

impl core::error::Error for OptError {}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::{Cloud, Continent};

    fn entry(id: &str, max: u32) -> CatalogEntry {
        CatalogEntry {
            site: Site {
                id: id.into(),
                cloud: Cloud::Gc,
                continent: Continent::Us,
                region: "r".into(),
                zone: id.into(),
                gpu: "T4".into(),
                net_group: "US".into(),
            },
            max_count: max,
            gpus_per_vm: 1,
        }
    }

    fn spec(entries: Vec<CatalogEntry>, bounds: (u32, u32)) -> SearchSpec {
        SearchSpec {
            catalog: entries,
            objective: Objective::MaxSps,
            vm_bounds: bounds,
            gpu_bounds: None,
            mode: PricingMode::Spot,
            top_k: 5,
        }
    }

    #[test]
    fn two_sites_two_each() {
        let s = spec(vec![entry("a", 2), entry("b", 2)], (0, 2));
        let all = enumerate_placements(&s, 1_000_000).unwrap();
        assert_eq!(all, vec![vec![0, 1], vec![0, 2], vec![1, 0], vec![1, 1], vec![2, 0]]);
    }

    #[test]
    fn one_site_of_eight() {
        let s = spec(vec![entry("a", 8)], (1, 8));
        assert_eq!(enumerate_placements(&s, 1_000_000).unwrap().len(), 8);
    }

    #[test]
    fn too_large() {
        let s = spec((0..10).map(|i| entry(&format!("s{i}"), 8)).collect(), (1, 80));
        match enumerate_placements(&s, 1_000_000) {
            Err(OptError::SpaceTooLarge { cardinality, .. }) => assert_eq!(cardinality, 9u128.pow(10)),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn gpu_bounds_count_devices() {
        let mut big = entry("dgx", 1);
        big.gpus_per_vm = 8;
        let mut s = spec(vec![big, entry("t4", 8)], (1, 16));
        s.gpu_bounds = Some((8, 8));
        let all = enumerate_placements(&s, 1_000_000).unwrap();
        assert_eq!(all, vec![vec![0, 8], vec![1, 0]]);
    }

    #[test]
    fn encoding() {
        let s = spec(vec![entry("a", 2), entry("b", 2)], (0, 4));
        assert_eq!(s.encode(&[2, 1]), "ax2+bx1");
        assert_eq!(s.encode(&[0, 1]), "bx1");
    }
}
