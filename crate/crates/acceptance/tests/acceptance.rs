//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails. Run with
//! `cargo test -p hetnet-afra --test acceptance`.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use hetnet_afra::afra::{self, run_afra, Policy, SimConfig};
use hetnet_afra::ddnum::{self, run_ddnum, tune_gamma, DdnumParams};
use hetnet_afra::harness::{self, DdnumConfig, EngineConfig, ORACLE_TOL};
use hetnet_afra::model::{self, pf_index, Topology};
use hetnet_afra::oracle::{
    check_equilibrium_properties, min_accepted_increment, solve_global_pf, step_bound,
    tol_iii, tol_r, verify_uniqueness, PropertyTolerances,
};
use hetnet_afra::scenario::{generate_random, two_by_two_example, ScenarioParams};
use hetnet_afra::waterfill::{single_bs_pf_shares, waterfill_allocate};
use hetnet_afra_acceptance::{prefix_oracle, random_waterfill_input};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: String) -> Outcome {
    Outcome { passed, detail }
}

struct Criterion {
    id: u32,
    name: &'static str,
    limit: Duration,
    run: fn() -> Outcome,
}

fn random_config(seed: u64, epsilon: f64, policy: Policy) -> SimConfig {
    SimConfig {
        epsilon,
        policy,
        seed,
        ..SimConfig::default()
    }
}

fn single_bs_closed_form() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst: f64 = 0.0;
    for _ in 0..1_000 {
        let n = rng.random_range(1..=20);
        let weights: Vec<f64> = (0..n).map(|_| rng.random_range(0.01..100.0)).collect();
        let total: f64 = weights.iter().sum();
        let shares = single_bs_pf_shares(&weights).unwrap();
        for (s, w) in shares.iter().zip(&weights) {
            worst = worst.max((s - w / total).abs());
        }
    }
    outcome(worst <= 1e-12, format!("max |λ − ω/Σω| = {worst:.2e} (limit 1e-12)"))
}

fn waterfill_oracle_equivalence() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let (mut d_theta, mut d_lambda, mut d_cond): (f64, f64, f64) = (0.0, 0.0, 0.0);
    for _ in 0..10_000 {
        let input = random_waterfill_input(&mut rng);
        let res = waterfill_allocate(&input).unwrap();
        let (theta, lambdas) = prefix_oracle(&input);
        d_theta = d_theta.max((res.theta - theta).abs() / theta.max(1.0));
        for (a, b) in res.lambdas.iter().zip(&lambdas) {
            d_lambda = d_lambda.max((a - b).abs());
        }
        // Budget used up, served clients level at θ, unserved at or above it.
        let total: f64 = res.lambdas.iter().sum();
        d_cond = d_cond.max((total - 1.0).abs());
        for p in 0..input.clients.len() {
            let level = (input.external[p] + res.lambdas[p] * input.rates[p])
                / (input.weights[p] * input.rates[p]);
            let scale = res.theta.max(1.0);
            if res.lambdas[p] > 0.0 {
                d_cond = d_cond.max((level - res.theta).abs() / scale);
            } else {
                d_cond = d_cond.max((res.theta - level).max(0.0) / scale);
            }
            d_cond = d_cond.max((-res.lambdas[p]).max(0.0));
        }
    }
    let passed = d_theta <= 1e-9 && d_lambda <= 1e-9 && d_cond <= 1e-9;
    outcome(
        passed,
        format!("max θ dev {d_theta:.2e}, max λ dev {d_lambda:.2e}, max condition residual {d_cond:.2e} (limit 1e-9)"),
    )
}

fn fixture_equilibrium() -> Outcome {
    let fx = two_by_two_example();
    let epsilon = 1e-4;
    let mut allocations = Vec::new();
    let mut worst_r: f64 = 0.0;
    let mut worst_f: f64 = 0.0;
    for seed in 0..5 {
        let run = run_afra(&fx.topology, &random_config(seed, epsilon, Policy::RandomSequential)).unwrap();
        for (got, want) in run.summary.per_client_throughput.iter().zip(&fx.reference_throughput) {
            worst_r = worst_r.max((got - want).abs());
        }
        worst_f = worst_f.max((run.summary.final_potential - 2.0 * 2f64.ln()).abs());
        allocations.push(run.state.allocation);
    }
    let report = verify_uniqueness(&fx.topology, &allocations, tol_r(&fx.topology, epsilon)).unwrap();
    let passed = worst_r <= 1e-3 && worst_f <= 1e-3 && report.throughput_unique;
    outcome(
        passed,
        format!(
            "max |r − (1,2)| = {worst_r:.2e}, |f − 2 ln 2| = {worst_f:.2e} (limit 1e-3); \
             uniqueness over 5 seeds: max r dev {:.2e} vs tol_r {:.2e}",
            report.max_throughput_deviation, report.tol_r
        ),
    )
}

fn global_optimality() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let epsilon = 1e-4;
    let mut failures = Vec::new();
    let (mut worst_rel, mut worst_iii_ratio): (f64, f64) = (f64::NEG_INFINITY, 0.0);
    for k in 0..50 {
        let n = rng.random_range(1..=10);
        let m = 2 * rng.random_range(2..=5);
        let seed = rng.random::<u64>();
        let topo = generate_random(&ScenarioParams::new(n, m, seed)).unwrap();
        let run = run_afra(&topo, &random_config(seed, epsilon, Policy::RandomSequential)).unwrap();
        let opt = solve_global_pf(&topo, ORACLE_TOL).unwrap();
        let report = check_equilibrium_properties(
            &topo,
            &run.state.allocation,
            PropertyTolerances::for_epsilon(&topo, epsilon),
            Some(&opt),
        )
        .unwrap();
        let gap = report.optimality_gap.unwrap();
        let rel = gap / opt.potential.abs();
        worst_rel = worst_rel.max(rel);
        let limit_iii = tol_iii(&topo, epsilon);
        worst_iii_ratio = worst_iii_ratio.max(report.prop_iii_residual / limit_iii);
        if gap > 1e-3 * opt.potential.abs() || report.prop_iii_residual > limit_iii {
            failures.push(format!("#{k} N={n} M={m}"));
        }
    }
    outcome(
        failures.is_empty(),
        format!(
            "worst (f* − f_eq)/|f*| = {worst_rel:.2e} (limit 1e-3); worst level-sum residual / tol_III = {worst_iii_ratio:.2e}; failing: {failures:?}"
        ),
    )
}

fn monotone_potential_and_step_bound() -> Outcome {
    let epsilon = 0.05;
    let mut failures = Vec::new();
    let mut min_margin = f64::INFINITY;
    let mut max_fraction: f64 = 0.0;
    for seed in 0..100 {
        let topo = generate_random(&ScenarioParams::new(10, 10, seed)).unwrap();
        let run = run_afra(&topo, &random_config(seed, epsilon, Policy::RandomSequential)).unwrap();
        let floor = min_accepted_increment(&topo, epsilon);
        let bound = step_bound(&topo, epsilon);
        let r0 = model::client_throughput(&topo, &afra::initial_allocation(&topo)).unwrap();
        let mut before = model::potential(&topo, &r0);
        let mut ok = !run.summary.flagged;
        for rec in run.trace() {
            let inc = rec.potential_after - before;
            min_margin = min_margin.min(inc / floor);
            ok &= rec.accepted && inc > 0.0 && inc >= floor;
            before = rec.potential_after;
        }
        max_fraction = max_fraction.max(run.summary.steps_to_eq as f64 / bound);
        ok &= run.summary.steps_to_eq as f64 <= bound;
        if !ok {
            failures.push(seed);
        }
    }
    outcome(
        failures.is_empty(),
        format!(
            "min increment / lower bound = {min_margin:.3e}; max steps / step bound = {max_fraction:.2e}; failing seeds: {failures:?}"
        ),
    )
}

fn mean_steps(n: usize, policy: Policy) -> f64 {
    let total: usize = (0..100u64)
        .map(|seed| {
            let topo = generate_random(&ScenarioParams::new(n, 10, seed)).unwrap();
            run_afra(&topo, &random_config(seed, 0.05, policy)).unwrap().summary.steps_to_eq
        })
        .sum();
    total as f64 / 100.0
}

fn convergence_time() -> Outcome {
    let random10 = mean_steps(10, Policy::RandomSequential);
    let priority10 = mean_steps(10, Policy::PriorityByGain);
    let random20 = mean_steps(20, Policy::RandomSequential);
    let priority20 = mean_steps(20, Policy::PriorityByGain);
    let cut10 = 1.0 - priority10 / random10;
    let cut20 = 1.0 - priority20 / random20;
    let in_band = (10.0..=20.0).contains(&random10);
    let passed = in_band && cut10 >= 0.20 && cut20 >= 0.20;
    outcome(
        passed,
        format!(
            "N=10 random mean {random10:.2} (band [10, 20]: {}); priority cuts the mean by {:.1}% at N=10 and {:.1}% at N=20 (need ≥ 20%)",
            if in_band { "in" } else { "out" },
            100.0 * cut10,
            100.0 * cut20
        ),
    )
}

fn convergence_shape() -> Outcome {
    let clients: Vec<usize> = (1..=10).map(|k| 10 * k).collect();
    let bss = [10, 20, 50];
    let cells: Vec<(usize, usize)> = bss
        .iter()
        .flat_map(|&m| clients.iter().map(move |&n| (n, m)))
        .collect();
    let seeds: Vec<u64> = (0..100).collect();
    let rows = harness::sweep(&ScenarioParams::new(0, 0, 0), &cells, &EngineConfig::default(), &seeds).unwrap();
    let mut passed = rows.len() == 30;
    let mut notes = Vec::new();
    for &m in &bss {
        let row_m: Vec<_> = rows.iter().filter(|r| r.num_bss == m).collect();
        let peak = row_m
            .iter()
            .max_by(|a, b| a.mean_steps.total_cmp(&b.mean_steps))
            .unwrap();
        let ratio = peak.num_clients as f64 / m as f64;
        let peak_ok = (1.0..=2.0).contains(&ratio);
        let tail_ok = row_m
            .iter()
            .filter(|r| r.num_clients >= 5 * m)
            .all(|r| r.mean_steps < peak.mean_steps);
        passed &= peak_ok && tail_ok;
        notes.push(format!(
            "M={m}: peak {:.2} at N={} (N/M={ratio:.1}, {}), N/M≥5 {}",
            peak.mean_steps,
            peak.num_clients,
            if peak_ok { "ok" } else { "outside [1, 2]" },
            if tail_ok { "below peak" } else { "NOT below peak" }
        ));
    }
    outcome(passed, notes.join("; "))
}

fn ddnum_comparison() -> Outcome {
    let seeds: Vec<u64> = (0..100).collect();
    let mut step_ratios = Vec::new();
    let mut message_ratios = Vec::new();
    let mut untuned = 0;
    let mut per_n = Vec::new();
    for n in [10, 20, 30, 40, 50] {
        let report = harness::compare(
            &ScenarioParams::new(n, 10, 0),
            &EngineConfig::default(),
            &DdnumConfig::default(),
            &seeds,
        )
        .unwrap();
        untuned += report.no_feasible_gamma;
        step_ratios.extend(report.per_seed.iter().filter_map(|s| s.step_ratio));
        message_ratios.extend(report.per_seed.iter().filter_map(|s| s.message_ratio));
        per_n.push(format!(
            "N={n}: {:.2}/{:.2}",
            report.mean_step_ratio.unwrap_or(f64::NAN),
            report.mean_message_ratio.unwrap_or(f64::NAN)
        ));
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let steps = mean(&step_ratios);
    let messages = mean(&message_ratios);
    let passed = (1.5..=4.0).contains(&steps) && (3.0..=6.0).contains(&messages);
    outcome(
        passed,
        format!(
            "mean step ratio {steps:.2} (band [1.5, 4.0]), mean message ratio {messages:.2} (band [3.0, 6.0]) over {} tuned runs; \
             {untuned} runs with no step size reaching the target; per N step/message: {}",
            step_ratios.len(),
            per_n.join(", ")
        ),
    )
}

fn pf_index_arithmetic() -> Outcome {
    let aggregated = pf_index(&[18.0, 11.0]).unwrap();
    let single = pf_index(&[12.5, 7.5]).unwrap();
    let passed = (aggregated - 2.30).abs() <= 0.01 && (single - 1.97).abs() <= 0.01;
    outcome(
        passed,
        format!("pf_index(18, 11) = {aggregated:.4} (2.30 ± 0.01), pf_index(12.5, 7.5) = {single:.4} (1.97 ± 0.01)"),
    )
}

/// Produces the document each CLI subcommand would write.
fn documents() -> Vec<(&'static str, String)> {
    let topo = generate_random(&ScenarioParams::new(12, 8, 9)).unwrap();
    let fx: Topology = two_by_two_example().topology;
    let engine = EngineConfig::default();
    let priority = EngineConfig {
        policy: Policy::PriorityByGain,
        ..engine
    };
    let (run, summary) = harness::afra_summary(&topo, &engine, 5, false).unwrap();
    let (_, summary_priority) = harness::afra_summary(&topo, &priority, 5, true).unwrap();
    let params = DdnumParams {
        gamma: 0.1,
        target_potential: 1e9,
        max_iterations: 300,
    };
    let fixed = run_ddnum(&topo, &params).unwrap();
    let target = ddnum::target_from_equilibrium(run.summary.final_potential);
    let tuned = tune_gamma(&topo, target, &ddnum::default_gamma_grid(), 2_000);
    let small = ScenarioParams::new(6, 4, 0);
    let compare = harness::compare(&small, &engine, &DdnumConfig { max_iterations: 500, ..DdnumConfig::default() }, &[0, 1, 2]).unwrap();
    let sweep = harness::sweep(&small, &[(10, 10), (20, 10)], &engine, &[0, 1, 2]).unwrap();
    let verify = harness::verify(&fx, &EngineConfig { epsilon: 1e-3, ..engine }, &[0, 1, 2]).unwrap();
    vec![
        ("gen", topo.to_json()),
        ("run-afra summary", summary.to_json()),
        ("run-afra summary (priority, oracle)", summary_priority.to_json()),
        ("run-afra trace", afra::trace_csv(&topo, run.trace())),
        ("run-ddnum summary", harness::ddnum_summary(&fixed, 5).to_json()),
        ("run-ddnum trace", ddnum::trace_csv(&topo, &fixed.trace)),
        (
            "tune-gamma",
            match tuned {
                Ok(r) => harness::ddnum_summary(&r, 5).to_json(),
                Err(e) => e.to_string(),
            },
        ),
        ("compare", harness::to_json(&compare)),
        ("sweep", harness::sweep_table(&sweep)),
        ("verify", harness::to_json(&verify)),
    ]
}

fn determinism() -> Outcome {
    let first = documents();
    let second = documents();
    let differing: Vec<&str> = first
        .iter()
        .zip(&second)
        .filter(|(a, b)| a.1 != b.1)
        .map(|(a, _)| a.0)
        .collect();
    outcome(
        differing.is_empty() && first.len() == 10,
        format!("{} documents regenerated; differing: {differing:?}", first.len()),
    )
}

fn main() -> ExitCode {
    let criteria = [
        Criterion { id: 1, name: "single-BS closed form", limit: Duration::from_secs(1), run: single_bs_closed_form },
        Criterion { id: 2, name: "water-fill prefix oracle", limit: Duration::from_secs(10), run: waterfill_oracle_equivalence },
        Criterion { id: 3, name: "two-client fixture equilibrium", limit: Duration::from_secs(1), run: fixture_equilibrium },
        Criterion { id: 4, name: "global optimality", limit: Duration::from_secs(120), run: global_optimality },
        Criterion { id: 5, name: "monotone potential and step bound", limit: Duration::from_secs(30), run: monotone_potential_and_step_bound },
        Criterion { id: 6, name: "convergence time and prioritization", limit: Duration::from_secs(60), run: convergence_time },
        Criterion { id: 7, name: "convergence-time shape", limit: Duration::from_secs(600), run: convergence_shape },
        Criterion { id: 8, name: "dual-decomposition comparison", limit: Duration::from_secs(900), run: ddnum_comparison },
        Criterion { id: 9, name: "pf index arithmetic", limit: Duration::from_secs(1), run: pf_index_arithmetic },
        Criterion { id: 10, name: "determinism", limit: Duration::from_secs(60), run: determinism },
    ];
    let filter: Vec<u32> = std::env::args()
        .skip(1)
        .filter_map(|a| a.parse().ok())
        .collect();
    let mut failed = 0;
    for c in criteria.iter().filter(|c| filter.is_empty() || filter.contains(&c.id)) {
        let start = Instant::now();
        let out = (c.run)();
        let elapsed = start.elapsed();
        let in_time = elapsed <= c.limit;
        let passed = out.passed && in_time;
        if !passed {
            failed += 1;
        }
        println!(
            "criterion {:>2} {}: {} | {} | {:.2}s (limit {}s{})",
            c.id,
            c.name,
            if passed { "PASS" } else { "FAIL" },
            out.detail,
            elapsed.as_secs_f64(),
            c.limit.as_secs(),
            if in_time { "" } else { ", exceeded" }
        );
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    }
}
