//! End-to-end acceptance checks. Each test prints one PASS/FAIL line with
//! the measured values before asserting.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::OnceLock;
use std::time::Instant;

use num_rational::Ratio;
use proptest::prelude::*;
use proptest::test_runner::{Config, TestCaseError, TestRunner};

use spanlayout::algos::{lmbr_traced, run_algorithm, Algorithm};
use spanlayout::harness::{self, run_experiment, CapacityRule, ExperimentConfig, ExperimentResult, SweepAxis};
use spanlayout::hgr::parse_benchmark_hypergraph;
use spanlayout::hypergraph::min_partitions_needed;
use spanlayout::span::{hitting_set, k_densest_nodes, Locator};
use spanlayout::workload::WorkloadSpec;
use spanlayout::{build_hypergraph, build_hypergraph_with_items, oracle, Hypergraph, Placement};

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

fn verdict(name: &str, ok: bool, detail: &str) {
    println!("{name}: {} ({detail})", if ok { "PASS" } else { "FAIL" });
}

fn harmonic(n: usize) -> f64 {
    (1..=n).map(|i| 1.0 / i as f64).sum()
}

#[test]
fn criterion_1_fixture_exactness() {
    let start = Instant::now();
    let h = harness::load_hypergraph(&fixture("example.hgr"), None).unwrap();
    assert_eq!((h.num_items(), h.num_edges()), (8, 6));
    let disjoint = harness::load_placement(&fixture("example_disjoint.json"), None).unwrap();
    let replicated = harness::load_placement(&fixture("example_replicated.json"), None).unwrap();
    let before = harness::evaluate_placement(&disjoint, &h).unwrap();
    let after = harness::evaluate_placement(&replicated, &h).unwrap();
    replicated.check_capacity(&h).unwrap();
    let elapsed = start.elapsed();

    let ok = before.average == Ratio::new(13, 6)
        && after.average == Ratio::new(8, 6)
        && before.spans[1].span == 3
        && after.spans[1].span == 2
        && elapsed.as_secs_f64() < 1.0;
    verdict(
        "criterion 1 fixture exactness",
        ok,
        &format!(
            "avg {} -> {}, second query span {} -> {}, {elapsed:?}",
            before.average, after.average, before.spans[1].span, after.spans[1].span
        ),
    );
    assert_eq!(before.average, Ratio::new(13, 6));
    assert_eq!(after.average, Ratio::new(8, 6));
    assert_eq!(before.spans[1].span, 3);
    assert_eq!(after.spans[1].span, 2);
    assert!(elapsed.as_secs_f64() < 1.0);
}

const DESK_ALGOS: [Algorithm; 6] = [
    Algorithm::Hpa,
    Algorithm::Random,
    Algorithm::Ihpa,
    Algorithm::Ds,
    Algorithm::Pra,
    Algorithm::Lmbr,
];
const DESK_N: [usize; 5] = [8, 10, 12, 14, 16];
const DESK_C: u64 = 25;

fn desk_config() -> ExperimentConfig {
    ExperimentConfig {
        workload: WorkloadSpec {
            item_count: 200,
            query_count: 800,
            min_query_size: 3,
            max_query_size: 11,
            density: 20.0,
            ..WorkloadSpec::default()
        },
        inputs: Vec::new(),
        algorithms: DESK_ALGOS.to_vec(),
        capacity: CapacityRule::Fixed(DESK_C),
        partitions: 0,
        sweep_axis: SweepAxis::Partitions,
        sweep_values: DESK_N.iter().map(|&n| n as f64).collect(),
        trials: 10,
        base_seed: 0,
        output_dir: None,
        parallel_cells: true,
    }
}

fn desk_run() -> &'static ExperimentResult {
    static RUN: OnceLock<ExperimentResult> = OnceLock::new();
    RUN.get_or_init(|| run_experiment(&desk_config()).expect("desk experiment"))
}

fn curve(r: &ExperimentResult, algo: Algorithm) -> Vec<f64> {
    DESK_N
        .iter()
        .map(|n| r.mean_span(algo, &n.to_string()).unwrap_or(f64::NAN))
        .collect()
}

#[test]
fn criterion_2_algorithm_ordering() {
    let r = desk_run();
    assert!(r.errors.is_empty(), "failed runs: {:?}", r.errors);
    let ne = 200u64.div_ceil(DESK_C) as usize;
    let mut violations = Vec::new();
    for (i, &n) in DESK_N.iter().enumerate() {
        if n <= ne {
            continue;
        }
        let [lmbr, ihpa, hpa, random] =
            [Algorithm::Lmbr, Algorithm::Ihpa, Algorithm::Hpa, Algorithm::Random].map(|a| curve(r, a)[i]);
        if !(lmbr <= ihpa && ihpa <= hpa && hpa <= random) {
            violations.push(format!("N={n}: lmbr {lmbr:.3} ihpa {ihpa:.3} hpa {hpa:.3} random {random:.3}"));
        }
    }
    let last = DESK_N.len() - 1;
    let (lmbr, hpa) = (curve(r, Algorithm::Lmbr)[last], curve(r, Algorithm::Hpa)[last]);
    let margin = 1.0 - lmbr / hpa;
    let best = DESK_ALGOS.iter().all(|&a| a == Algorithm::Lmbr || curve(r, a)[last] > lmbr);
    let ok = violations.is_empty() && margin >= 0.05 && best;
    let table: Vec<String> = DESK_ALGOS
        .iter()
        .map(|&a| format!("{} {:.3?}", a.name(), curve(r, a)))
        .collect();
    verdict(
        "criterion 2 algorithm ordering",
        ok,
        &format!("lmbr beats hpa by {:.1}% at N=16; {}", 100.0 * margin, table.join("; ")),
    );
    assert!(violations.is_empty(), "ordering violated: {violations:?}");
    assert!(best, "lmbr is not strictly best at N=16");
    assert!(margin >= 0.05, "lmbr improves on hpa by only {:.2}%", 100.0 * margin);
}

#[test]
fn criterion_3_replication_monotonicity() {
    let r = desk_run();
    let mut bad = Vec::new();
    let mut detail = Vec::new();
    for algo in DESK_ALGOS.into_iter().filter(|&a| a != Algorithm::Hpa) {
        let c = curve(r, algo);
        let rises: Vec<f64> = c.windows(2).filter(|w| w[1] > w[0]).map(|w| w[1] / w[0] - 1.0).collect();
        let ok = rises.len() <= 1 && rises.iter().all(|&x| x <= 0.01);
        detail.push(format!("{} {} rise(s)", algo.name(), rises.len()));
        if !ok {
            bad.push(format!("{}: {c:.3?}", algo.name()));
        }
    }
    verdict("criterion 3 replication monotonicity", bad.is_empty(), &detail.join(", "));
    assert!(bad.is_empty(), "non-monotone curves: {bad:?}");
}

#[test]
fn criterion_4_three_way_comparison() {
    let nq = [200usize, 400, 800, 1600];
    let cfg = ExperimentConfig {
        algorithms: vec![Algorithm::Pra3Way, Algorithm::Sda3Way],
        partitions: 30,
        sweep_axis: SweepAxis::QueryCount,
        sweep_values: nq.iter().map(|&q| q as f64).collect(),
        ..desk_config()
    };
    let r = run_experiment(&cfg).unwrap();
    assert!(r.errors.is_empty(), "failed runs: {:?}", r.errors);
    let span = |algo: &str, q: usize, seed: u64| {
        r.rows
            .iter()
            .find(|x| x.algorithm == algo && x.sweep_value == q.to_string() && x.seed == seed)
            .map(|x| x.avg_span)
            .expect("row present")
    };
    let winning_seeds = (0..10u64)
        .filter(|&s| nq.iter().all(|&q| span("pra_3way", q, s) <= span("sda_3way", q, s)))
        .count();
    let mean = |algo: Algorithm| -> Vec<f64> { nq.iter().map(|q| r.mean_span(algo, &q.to_string()).unwrap()).collect() };
    let (pra, sda) = (mean(Algorithm::Pra3Way), mean(Algorithm::Sda3Way));
    let sda_degrades = sda.windows(2).all(|w| w[1] >= w[0]) && sda[sda.len() - 1] > sda[0];
    let pra_drift = pra.iter().map(|&x| (x / pra[0] - 1.0).abs()).fold(0.0, f64::max);
    let ok = winning_seeds >= 8 && sda_degrades && pra_drift <= 0.10;
    verdict(
        "criterion 4 three-way comparison",
        ok,
        &format!(
            "pra<=sda everywhere in {winning_seeds}/10 seeds; pra {pra:.3?} (drift {:.1}%); sda {sda:.3?}",
            100.0 * pra_drift
        ),
    );
    assert!(winning_seeds >= 8, "pra_3way <= sda_3way at every point in only {winning_seeds}/10 seeds");
    assert!(sda_degrades, "sda_3way does not degrade with query count: {sda:?}");
    assert!(pra_drift <= 0.10, "pra_3way drifts {:.1}% from its initial value", 100.0 * pra_drift);
}

fn ibm01_path() -> PathBuf {
    std::env::var_os("IBM01_HGR")
        .map(PathBuf::from)
        .unwrap_or_else(|| Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/ibm01.hgr"))
}

#[test]
fn criterion_5_ibm01_spot_check() {
    let path = ibm01_path();
    let Ok(file) = std::fs::File::open(&path) else {
        verdict("criterion 5 ibm01 spot check", false, &format!("{} not found", path.display()));
        panic!("ibm01 benchmark not available at {} (set IBM01_HGR)", path.display());
    };
    let h = parse_benchmark_hypergraph(std::io::BufReader::new(file)).unwrap();
    assert_eq!((h.num_items(), h.total_multiplicity()), (12_752, 14_111));
    let c = CapacityRule::MinPartitions(20).resolve(&h).unwrap();
    assert_eq!(min_partitions_needed(&h, c).unwrap(), 20);
    let mut spans = BTreeMap::new();
    for algo in DESK_ALGOS {
        let p = run_algorithm(algo, &h, 35, c, 0).unwrap().placement;
        p.check_capacity(&h).unwrap();
        spans.insert(algo.name(), harness::evaluate_placement(&p, &h).unwrap().average_f64());
    }
    let lmbr = spans["lmbr"];
    let ordered = spans.values().all(|&s| s >= lmbr);
    let ok = lmbr <= 1.5 && ordered;
    verdict("criterion 5 ibm01 spot check", ok, &format!("{spans:.3?}"));
    assert!(lmbr <= 1.5, "lmbr average span {lmbr:.3} above 1.5");
    assert!(ordered, "some algorithm beats lmbr: {spans:?}");
}

/// Random micro placement: every item on one to three of `parts` partitions.
fn micro_locations(items: usize, parts: usize) -> impl Strategy<Value = Vec<Vec<usize>>> {
    prop::collection::vec(prop::collection::btree_set(0..parts, 1..=3.min(parts)), items)
        .prop_map(|v| v.into_iter().map(|s| s.into_iter().collect()).collect())
}

fn micro_queries(items: usize, max_queries: usize) -> impl Strategy<Value = Vec<Vec<usize>>> {
    prop::collection::vec(prop::collection::btree_set(0..items, 2..=4.min(items)), 1..=max_queries)
        .prop_map(|v| v.into_iter().map(|s| s.into_iter().collect()).collect())
}

fn run_cases<S: Strategy>(
    name: &str,
    strategy: S,
    test: impl Fn(S::Value) -> Result<(), TestCaseError>,
) -> Result<(), String>
where
    S::Value: std::fmt::Debug,
{
    let mut runner = TestRunner::new(Config {
        cases: 1000,
        failure_persistence: None,
        ..Config::default()
    });
    runner.run(&strategy, test).map_err(|e| format!("{name}: {e}"))
}

fn greedy_span_bounds() -> Result<(), String> {
    let strategy = (2usize..=8, 1usize..=6).prop_flat_map(|(items, parts)| {
        (
            micro_locations(items, parts),
            prop::collection::btree_set(0..items, 1..=items),
        )
    });
    run_cases("greedy span", strategy, |(locs, edge)| {
        let edge: Vec<usize> = edge.into_iter().collect();
        let greedy = Locator::from_locations(locs.clone()).span(&edge).unwrap();
        let exact = oracle::exact_span(&edge, &locs).unwrap();
        prop_assert!(greedy >= exact);
        prop_assert!(greedy as f64 <= exact as f64 * harmonic(edge.len()) + 1e-9);
        Ok(())
    })
}

fn hitting_set_bounds() -> Result<(), String> {
    let strategy = prop::collection::vec(prop::collection::btree_set(0usize..8, 1..=4), 1..=10);
    run_cases("hitting set", strategy, |sets| {
        let sets: Vec<Vec<usize>> = sets.into_iter().map(|s| s.into_iter().collect()).collect();
        let hs = hitting_set(&sets).unwrap();
        prop_assert!(sets.iter().all(|s| s.iter().any(|g| hs.contains(g))));
        let exact = oracle::exact_hitting_set(&sets).len();
        let max_freq = (0..8).map(|g| sets.iter().filter(|s| s.contains(&g)).count()).max().unwrap();
        prop_assert!(hs.len() as f64 <= exact as f64 * harmonic(max_freq) + 1e-9);
        Ok(())
    })
}

fn densest_subgraph_bounds() -> Result<(), String> {
    let strategy = (3usize..=12).prop_flat_map(|n| {
        (
            Just(n),
            prop::collection::btree_set((0..n, 0..n).prop_filter("loop", |(a, b)| a < b), 1..=n * 2),
            1..=n,
        )
    });
    run_cases("k densest nodes", strategy, |(n, pairs, k)| {
        let queries: Vec<Vec<usize>> = pairs.into_iter().map(|(a, b)| vec![a, b]).collect();
        let h = build_hypergraph_with_items(n, &queries, None).unwrap();
        let chosen = k_densest_nodes(&h, k as u64);
        prop_assert!(chosen.len() <= k);
        if 3 * k <= n {
            let (_, opt) = oracle::densest_subgraph(&h, k as u64);
            let (sub, _) = h.induced(&chosen);
            let got = sub.total_multiplicity() as f64;
            let factor = 2.0 * (n as f64 / k as f64 - 1.0);
            prop_assert!(got * factor >= opt as f64, "greedy {got} vs optimum {opt} (factor {factor})");
        }
        Ok(())
    })
}

fn check_feasible(algo: Algorithm, h: &Hypergraph, n: usize, p: &Placement) -> Result<(), TestCaseError> {
    prop_assert!(p.num_partitions() <= n, "{algo}: {} partitions", p.num_partitions());
    p.check_capacity(h).map_err(|e| TestCaseError::fail(format!("{algo}: {e}")))?;
    p.check_coverage(h).map_err(|e| TestCaseError::fail(format!("{algo}: {e}")))?;
    let counts = p.copy_counts(h.num_items());
    if algo.is_three_way() {
        prop_assert!(counts.iter().all(|&c| c == 3), "{algo}: copy counts {counts:?}");
    } else if algo == Algorithm::Hpa {
        prop_assert!(p.is_disjoint(h.num_items()), "{algo}: replicated");
    }
    Ok(())
}

fn feasibility_invariants() -> Result<(), String> {
    let strategy = (4usize..=10, 2u64..=4, 0usize..=3, any::<u64>())
        .prop_flat_map(|(items, c, extra, seed)| (Just(items), micro_queries(items, 8), Just(c), Just(extra), Just(seed)));
    run_cases("feasibility", strategy, |(items, queries, c, extra, seed)| {
        let h = build_hypergraph_with_items(items, &queries, None).unwrap();
        let ne = min_partitions_needed(&h, c).unwrap();
        for algo in Algorithm::ALL {
            let n = if algo.is_three_way() {
                (3 * items).div_ceil(c as usize).max(3) + extra
            } else {
                ne + extra
            };
            let p = run_algorithm(algo, &h, n, c, seed)
                .map_err(|e| TestCaseError::fail(format!("{algo} with N={n}, C={c}: {e}")))?
                .placement;
            check_feasible(algo, &h, n, &p)?;
        }
        Ok(())
    })
}

fn lmbr_trace_improves() -> Result<(), String> {
    let strategy = (4usize..=10, 2u64..=4, 1usize..=4, any::<u64>())
        .prop_flat_map(|(items, c, extra, seed)| (Just(items), micro_queries(items, 8), Just(c), Just(extra), Just(seed)));
    run_cases("lmbr trace", strategy, |(items, queries, c, extra, seed)| {
        let h = build_hypergraph_with_items(items, &queries, None).unwrap();
        let n = min_partitions_needed(&h, c).unwrap() + extra;
        let (p, trace) = lmbr_traced(&h, n, c, seed).map_err(|e| TestCaseError::fail(e.to_string()))?;
        prop_assert!(trace.is_strictly_improving(), "{trace:?}");
        prop_assert!(trace.final_total() <= trace.initial_total);
        check_feasible(Algorithm::Lmbr, &h, n, &p)
    })
}

#[test]
fn criterion_6_oracle_suites() {
    let start = Instant::now();
    let suites: [(&str, fn() -> Result<(), String>); 5] = [
        ("greedy span", greedy_span_bounds),
        ("hitting set", hitting_set_bounds),
        ("k densest nodes", densest_subgraph_bounds),
        ("feasibility", feasibility_invariants),
        ("lmbr trace", lmbr_trace_improves),
    ];
    let failures: Vec<String> = suites.iter().filter_map(|(_, run)| run().err()).collect();
    let elapsed = start.elapsed();
    let ok = failures.is_empty() && elapsed.as_secs() < 120;
    verdict(
        "criterion 6 oracle suites",
        ok,
        &format!("{} suites x 1000 cases, {} failed, {elapsed:?}", suites.len(), failures.len()),
    );
    assert!(failures.is_empty(), "{failures:#?}");
    assert!(elapsed.as_secs() < 120, "oracle suites took {elapsed:?}");
}

/// Results CSV with the timing column removed.
fn csv_without_timing(r: &ExperimentResult) -> String {
    let mut raw = Vec::new();
    r.write_results_csv(&mut raw).unwrap();
    let mut reader = csv::Reader::from_reader(raw.as_slice());
    let headers = reader.headers().unwrap().clone();
    let keep: Vec<usize> = (0..headers.len()).filter(|&i| &headers[i] != "runtime_ms").collect();
    let mut out = csv::Writer::from_writer(Vec::new());
    out.write_record(keep.iter().map(|&i| &headers[i])).unwrap();
    for rec in reader.records() {
        let rec = rec.unwrap();
        out.write_record(keep.iter().map(|&i| &rec[i])).unwrap();
    }
    String::from_utf8(out.into_inner().unwrap()).unwrap()
}

#[test]
fn criterion_7_determinism() {
    let first = csv_without_timing(desk_run());
    let second = csv_without_timing(&run_experiment(&desk_config()).unwrap());
    let rows = first.lines().count() - 1;
    let expected = DESK_ALGOS.len() * DESK_N.len() * 10;
    let ok = first == second && rows == expected;
    verdict("criterion 7 determinism", ok, &format!("{rows} rows, identical: {}", first == second));
    assert_eq!(rows, expected);
    assert!(first == second, "reruns differ");
}

#[test]
fn fixture_spans_match_the_exact_oracle() {
    let h = build_hypergraph(
        &[vec![0, 1, 2], vec![2, 3, 5], vec![3, 5, 6], vec![4, 7], vec![0, 4, 7], vec![2, 4]],
        None,
    )
    .unwrap();
    let p = harness::load_placement(&fixture("example_replicated.json"), None).unwrap();
    assert_eq!(oracle::exact_average_span(&p, &h), Some(Ratio::new(8, 6)));
}
