//! Acceptance criteria, one PASS/FAIL line each. Runs without the libtest
//! harness so every line is printed, and exits nonzero if any criterion fails.

use std::collections::BTreeMap;
use std::process::ExitCode;

use geospot::report::{to_json, ReportDoc};
use geospot::run::{apply_calibration, evaluate, run_calibration, with_vm_count, RunError};
use geospot::Loader;
use geospot_core::analytics::{asymptotic_throughput, granularity, project_scaling};
use geospot_core::catalog::{classify_traffic, Cloud, Scenario, Site, TrafficClass};
use geospot_core::costing::{cost_report, usd_per_million};
use geospot_core::netmodel::{aggregate_bandwidth, single_stream_bandwidth};
use geospot_core::optimizer::{candidate_scenario, search, CatalogEntry, Objective, SearchOptions, SearchSpec};
use geospot_core::protocol::{simulate_epoch, SimError};
use geospot_core::RunConfig;
use proptest::prelude::*;
use proptest::strategy::ValueTree;
use proptest::test_runner::{Config, TestRunner};

type Outcome = Result<(bool, String), RunError>;

fn within(expected: f64, got: f64, rel: f64) -> bool {
    ((got - expected) / expected).abs() <= rel
}

fn load(loader: &Loader, name: &str) -> Result<Scenario, RunError> {
    Ok(loader.load_scenario(format!("scenarios/{name}"))?)
}

fn sps(loader: &Loader, name: &str) -> Result<f64, RunError> {
    Ok(evaluate(&load(loader, name)?)?.metrics.sps)
}

fn cost_goldens(_: &Loader) -> Outcome {
    let cells = [
        ("DGX-2", 6.30, 413.0, 4.24),
        ("1xT4", 0.18, 80.0, 0.62),
        ("1xA10", 0.60, 185.0, 0.90),
        ("8xA10", 4.80, 620.6, 2.15),
    ];
    let mut ok = true;
    let mut notes = Vec::new();
    for (name, usd, sps, want) in cells {
        let got = usd_per_million(usd, sps);
        ok &= within(want, got, 0.01);
        notes.push(format!("{name} {got:.3}/{want}"));
    }
    Ok((ok, notes.join(", ")))
}

fn scaling_goldens(_: &Loader) -> Outcome {
    let p = |g| project_scaling(g, 2.0).map(|p| p.predicted_speedup_upper).unwrap_or(f64::NAN);
    let (one, ten) = (p(1.0), p(10.0));
    let ok = (one - 1.333).abs() <= 0.005 && (ten - 1.833).abs() <= 0.005;
    Ok((ok, format!("G=1 -> {one:.4}, G=10 -> {ten:.4}")))
}

/// Published speedups over one A10 at 2, 3, 4 and 8 GPUs.
const TABLE: [(&str, [f64; 4]); 8] = [
    ("RN18", [1.31, 1.77, 2.07, 3.16]),
    ("RN50", [1.28, 1.86, 2.39, 3.72]),
    ("RN152", [1.46, 2.11, 2.69, 4.37]),
    ("WRN101", [0.95, 1.38, 1.79, 3.01]),
    ("CONV", [0.94, 1.39, 1.82, 3.34]),
    ("RBase", [1.07, 1.49, 1.79, 2.38]),
    ("RLrg", [0.95, 1.30, 1.59, 2.30]),
    ("RXLM", [0.93, 1.28, 1.56, 2.29]),
];

fn a10_speedups(loader: &Loader) -> Outcome {
    let input = loader.load_calibration("calibration_a10.json")?;
    let cal = run_calibration(&input)?;
    let mut base = load(loader, "a10_conv.json")?;
    apply_calibration(&mut base, "A10", &cal)?;
    let (mut inside, mut worst, mut monotone) = (0, 0.0f64, true);
    for (model, published) in TABLE {
        base.model = loader.model(Some(loader.data_dir()), "models.json", model)?;
        let mut last = f64::NEG_INFINITY;
        for (n, want) in [2, 3, 4, 8].into_iter().zip(published) {
            let got = evaluate(&with_vm_count(&base, n)?)?.metrics.speedup;
            let err = (got - want).abs() / want;
            worst = worst.max(err);
            inside += usize::from(err <= 0.20);
            monotone &= got >= last;
            last = got;
        }
    }
    let detail = format!(
        "beta {:.3} s, gamma {:.3} s; {inside}/32 cells within 20% (worst {:.1}%), monotone {monotone}",
        cal.comm.beta_s,
        cal.comm.gamma_s,
        worst * 100.0
    );
    Ok((inside == 32 && monotone, detail))
}

fn geo_deltas(loader: &Loader) -> Outcome {
    let b2_cv = sps(loader, "b2_cv.json")? / sps(loader, "a2_cv.json")? - 1.0;
    let b2_nlp = 1.0 - sps(loader, "b2_nlp.json")? / sps(loader, "a2_nlp.json")?;
    let c8_cv = 1.0 - sps(loader, "c8_cv.json")? / sps(loader, "a8_cv.json")?;
    let ok = b2_cv.abs() <= 0.10 && (0.10..=0.25).contains(&b2_nlp) && (0.0..=0.15).contains(&c8_cv);
    Ok((
        ok,
        format!(
            "B-2 CV change {:+.1}%, B-2 NLP slowdown {:.1}%, C-8 CV slowdown {:.1}%",
            b2_cv * 100.0,
            b2_nlp * 100.0,
            c8_cv * 100.0
        ),
    ))
}

fn egress_calls(loader: &Loader) -> Outcome {
    let r = simulate_epoch(&load(loader, "c8_nlp.json")?)?;
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for call in &r.calls {
        let key = match call.class {
            TrafficClass::AnyToOce => "oce",
            TrafficClass::BetweenContinents => "intercontinental",
            _ => "intra-group",
        };
        *counts.entry(key).or_default() += 1;
    }
    let want: BTreeMap<&str, usize> = [("intra-group", 8), ("intercontinental", 6), ("oce", 6)].into();
    Ok((counts == want, format!("{counts:?}")))
}

fn egress_costs(loader: &Loader) -> Outcome {
    let c8 = load(loader, "c8_nlp.json")?;
    let gc = evaluate(&c8)?;
    let n = gc.cost.per_vm.len() as f64;
    let gc_ext = gc.cost.per_vm.iter().map(|l| l.external_egress()).sum::<f64>() / n;
    let aws = evaluate(&c8.with_cloud(Cloud::Aws))?;
    let aws_total = aws.cost.usd_per_h / n;
    let d3 = evaluate(&load(loader, "d3_nlp.json")?)?;
    let azure: Vec<f64> = d3.cost.per_vm.iter().filter(|l| l.site == "azure").map(|l| l.external_egress()).collect();
    let azure_ext = azure.iter().sum::<f64>() / azure.len() as f64;
    let ok = within(4.329, gc_ext, 0.25) && within(1.376, aws_total, 0.25) && within(0.763, azure_ext, 0.25);
    Ok((ok, format!("GC ext {gc_ext:.3}/4.329, AWS total {aws_total:.3}/1.376, Azure ext {azure_ext:.3}/0.763 $/h")))
}

fn tcp_model(loader: &Loader) -> Outcome {
    let net = loader.network_table("net_hybrid.json")?;
    let window = RunConfig::DEFAULT_WINDOW_BYTES;
    let mut ok = true;
    let mut notes = Vec::new();
    for to in ["GC_US", "LAMBDA_US"] {
        let link = net.link("RTX8000", to).copied().expect("bundled link");
        let ms = link.latency_ms;
        let mbit = single_stream_bandwidth(&link, window) * 1e3;
        ok &= (150.8..=159.1).contains(&ms) && (50.0..=80.0).contains(&mbit);
        notes.push(format!("{to} {mbit:.1} Mbit at {ms:.2} ms"));
    }
    for (to, want) in [("GC_EU", 6.0), ("GC_US", 4.0)] {
        let link = net.link("RTX8000", to).copied().expect("bundled link");
        let got = aggregate_bandwidth(&link, 80, window, None);
        ok &= got == want;
        notes.push(format!("80 streams {to} {got} Gbit"));
    }
    Ok((ok, notes.join(", ")))
}

fn top(spec: &SearchSpec, template: &Scenario, objective: Objective) -> Result<String, RunError> {
    let mut spec = spec.clone();
    spec.objective = objective;
    let out = search(&spec, template, SearchOptions::default())?;
    Ok(out.ranked.first().map_or_else(|| "none".into(), |r| r.encoding.clone()))
}

/// Best larger-is-better score by plain enumeration; candidates without a
/// network path are skipped.
fn brute_force(spec: &SearchSpec, template: &Scenario) -> Option<f64> {
    let dims: Vec<u32> = spec.catalog.iter().map(|e| e.max_count + 1).collect();
    let total: u32 = dims.iter().product();
    let mut best: Option<f64> = None;
    for mut code in 0..total {
        let counts: Vec<u32> = dims
            .iter()
            .map(|d| {
                let c = code % d;
                code /= d;
                c
            })
            .collect();
        let vms: u32 = counts.iter().sum();
        if vms == 0 || vms < spec.vm_bounds.0 || vms > spec.vm_bounds.1 {
            continue;
        }
        let s = candidate_scenario(spec, template, &counts);
        let r = match simulate_epoch(&s) {
            Ok(r) => r,
            Err(SimError::Net(_)) => continue,
            Err(e) => panic!("unexpected simulation failure: {e}"),
        };
        let c = cost_report(&s, &r).expect("priced");
        let score = match spec.objective {
            Objective::MaxSps => r.sps_global,
            Objective::MinUsdPerMillion => -c.usd_per_million,
            Objective::MaxSpsUnderBudget(b) if c.usd_per_h <= b => r.sps_global,
            Objective::MaxSpsUnderBudget(_) => continue,
        };
        best = Some(best.map_or(score, |x: f64| x.max(score)));
    }
    best
}

fn random_catalogs(loader: &Loader) -> Result<(usize, usize), RunError> {
    let mut template = load(loader, "search_conv.json")?;
    let c8 = load(loader, "c8_cv.json")?;
    let mut pool: Vec<Site> = template.sites.clone();
    pool.extend(c8.sites.iter().filter(|s| s.id != "us").cloned());
    template.sites = pool.clone();
    let gpus = |s: &Site| template.compute.gpus[&s.gpu].devices;
    let strategy = (
        prop::sample::subsequence((0..pool.len()).collect::<Vec<_>>(), 1..=4),
        prop::collection::vec(1u32..=4, 4),
        prop_oneof![
            Just(Objective::MaxSps),
            Just(Objective::MinUsdPerMillion),
            (0.5f64..8.0).prop_map(Objective::MaxSpsUnderBudget)
        ],
        1u32..=3,
        0u32..=8,
    )
        .prop_filter("at most 200 placements", |(idx, max, ..)| {
            idx.iter().zip(max).map(|(_, m)| m + 1).product::<u32>() <= 200
        });
    let mut runner = TestRunner::new(Config { cases: 100, ..Config::default() });
    let mut checked = 0;
    let mut matched = 0;
    for _ in 0..100 {
        let (idx, max, objective, lo, span) = strategy.new_tree(&mut runner).expect("value").current();
        let spec = SearchSpec {
            catalog: idx
                .iter()
                .zip(&max)
                .map(|(i, m)| CatalogEntry { site: pool[*i].clone(), max_count: *m, gpus_per_vm: gpus(&pool[*i]) })
                .collect(),
            objective,
            vm_bounds: (lo, lo + span),
            gpu_bounds: None,
            mode: geospot_core::PricingMode::Spot,
            top_k: 1,
        };
        let out = search(&spec, &template, SearchOptions::default())?;
        let got = out.ranked.first().map(|r| match objective {
            Objective::MinUsdPerMillion => -r.objective_value,
            _ => r.objective_value,
        });
        let want = brute_force(&spec, &template);
        checked += 1;
        let same = match (got, want) {
            (Some(a), Some(b)) => (a - b).abs() <= 1e-9 * b.abs().max(1.0),
            (None, None) => true,
            _ => false,
        };
        matched += usize::from(same);
    }
    Ok((matched, checked))
}

fn optimizer_goldens(loader: &Loader) -> Outcome {
    let search_conv = load(loader, "search_conv.json")?;
    let search_rxlm = load(loader, "search_rxlm.json")?;
    let (s1, s12) = (search_conv.search.clone().expect("search"), search_rxlm.search.clone().expect("search"));
    let conv_cheap = top(&s1, &search_conv, Objective::MinUsdPerMillion)?;
    let conv_fast = top(&s1, &search_conv, Objective::MaxSps)?;
    let rxlm_cheap = top(&s12, &search_rxlm, Objective::MinUsdPerMillion)?;
    let (matched, checked) = random_catalogs(loader)?;
    let ok = conv_cheap == "usx8" && conv_fast == "lambdax8" && rxlm_cheap == "dgx2x1" && matched == checked;
    Ok((
        ok,
        format!(
            "CONV cheapest {conv_cheap} (want usx8), CONV fastest {conv_fast} (want lambdax8), \
             RXLM cheapest {rxlm_cheap} (want dgx2x1), brute-force agreement {matched}/{checked}"
        ),
    ))
}

fn property_suites(loader: &Loader) -> Outcome {
    let names: Vec<&str> = vec![
        "a2_cv.json", "a8_nlp.json", "b4_cv.json", "b8_nlp.json", "c3_cv.json", "c8_nlp.json", "d2_cv.json",
        "d3_nlp.json", "e_a8_cv.json", "e_b4_nlp.json", "f_c2_cv.json", "a10_rxlm.json",
    ];
    let scenarios: Vec<Scenario> = names.iter().map(|n| load(loader, n)).collect::<Result<_, _>>()?;
    let sites: Vec<Site> = scenarios.iter().flat_map(|s| s.sites.clone()).collect();
    let cfg = Config { cases: 128, failure_persistence: None, ..Config::default() };
    let pick = 0..scenarios.len();
    let mut failed = Vec::new();
    let mut run = |name: &str, passed: bool| {
        if !passed {
            failed.push(name.to_string());
        }
    };

    run("sample conservation", TestRunner::new(cfg.clone()).run(&(pick.clone(), 64u64..1_000_000), |(i, tbs)| {
        let mut s = scenarios[i].clone();
        s.run.tbs = tbs;
        let r = simulate_epoch(&s).unwrap();
        prop_assert_eq!(r.samples_per_peer.iter().sum::<f64>(), tbs as f64);
        Ok(())
    }).is_ok());

    run("batch doubling", TestRunner::new(cfg.clone()).run(&(pick.clone(), 64u64..500_000), |(i, tbs)| {
        let mut s = scenarios[i].clone();
        s.run.tbs = tbs;
        s.run.matchmaking_floor_s = 0.0;
        let a = simulate_epoch(&s).unwrap();
        s.run.tbs = 2 * tbs;
        let b = simulate_epoch(&s).unwrap();
        if let (Some(ga), Some(gb)) = (granularity(&a), granularity(&b)) {
            prop_assert!((gb - 2.0 * ga).abs() <= 1e-9 * gb);
        }
        Ok(())
    }).is_ok());

    run("asymptote", TestRunner::new(cfg.clone()).run(&(pick.clone(), 64u64..500_000), |(i, tbs)| {
        let mut s = scenarios[i].clone();
        s.run.tbs = tbs;
        s.run.matchmaking_floor_s = 0.0;
        let r = simulate_epoch(&s).unwrap();
        let Some(cap) = asymptotic_throughput(&r) else {
            prop_assert_eq!(r.n_peers(), 1);
            return Ok(());
        };
        prop_assert!(r.sps_global < cap);
        // Calculation time going to zero leaves the ceiling.
        for v in s.compute.baseline_sps.values_mut() {
            *v *= 1e12;
        }
        let fast = simulate_epoch(&s).unwrap();
        prop_assert!((fast.sps_global - cap).abs() <= 1e-6 * cap);
        Ok(())
    }).is_ok());

    let site_pick = 0..sites.len();
    run("classification", TestRunner::new(cfg.clone()).run(&(site_pick.clone(), site_pick), |(a, b)| {
        let (a, b) = (&sites[a], &sites[b]);
        prop_assert_eq!(classify_traffic(a, b), classify_traffic(b, a));
        prop_assert!(TrafficClass::ALL.contains(&classify_traffic(a, b)));
        prop_assert_eq!(classify_traffic(a, b) == TrafficClass::Internal, a == b);
        Ok(())
    }).is_ok());

    run("cost additivity", TestRunner::new(cfg.clone()).run(&(pick.clone(), 64u64..500_000), |(i, tbs)| {
        let mut s = scenarios[i].clone();
        s.run.tbs = tbs;
        let r = simulate_epoch(&s).unwrap();
        let c = cost_report(&s, &r).unwrap();
        let lines: f64 = c.per_vm.iter().map(|l| l.total()).sum();
        prop_assert!((lines - c.usd_per_h).abs() <= 1e-9 * c.usd_per_h);
        let back = c.usd_per_million * r.sps_global * 3600.0 / 1e6;
        prop_assert!((back - c.usd_per_h).abs() <= 1e-9 * c.usd_per_h);
        Ok(())
    }).is_ok());

    run("determinism", TestRunner::new(cfg).run(&(pick, 64u64..500_000), |(i, tbs)| {
        let mut s = scenarios[i].clone();
        s.run.tbs = tbs;
        let a = to_json(&ReportDoc::from_evaluated(&evaluate(&s).unwrap()));
        let b = to_json(&ReportDoc::from_evaluated(&evaluate(&s.clone()).unwrap()));
        prop_assert_eq!(a, b);
        Ok(())
    }).is_ok());

    let detail = if failed.is_empty() {
        "6 suites x 128 cases".to_string()
    } else {
        format!("failing suites: {}", failed.join(", "))
    };
    Ok((failed.is_empty(), detail))
}

fn main() -> ExitCode {
    let loader = Loader::default();
    let criteria: [(&str, fn(&Loader) -> Outcome); 9] = [
        ("cost arithmetic goldens", cost_goldens),
        ("scaling goldens", scaling_goldens),
        ("calibrated A10 speedups", a10_speedups),
        ("geo-distributed deltas", geo_deltas),
        ("egress call accounting", egress_calls),
        ("egress cost reproduction", egress_costs),
        ("tcp stream model", tcp_model),
        ("optimizer goldens and oracle", optimizer_goldens),
        ("property suites", property_suites),
    ];
    let mut failures = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let (ok, detail) = check(&loader).unwrap_or_else(|e| (false, format!("error: {e}")));
        failures += usize::from(!ok);
        println!("criterion {} {name}: {} ({detail})", i + 1, if ok { "PASS" } else { "FAIL" });
    }
    println!("{} of {} criteria pass", criteria.len() - failures, criteria.len());
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
