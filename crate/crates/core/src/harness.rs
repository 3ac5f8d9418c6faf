//! Experiment orchestration: per-run summary documents, multi-seed
//! comparisons between the two engines, and (N, M) sweeps.
//!
//! Seeds fan out over rayon but results are always collected in seed order,
//! so every aggregate is a deterministic function of its inputs.

use rayon::prelude::*;
use serde::Serialize;

use crate::afra::{run_afra, AfraRun, Policy, SimConfig};
use crate::ddnum::{self, run_ddnum, tune_gamma, DdnumParams, DdnumRun};
use crate::error::{Error, Result};
use crate::model::{self, Allocation, Topology};
use crate::oracle::{
    self, check_equilibrium_properties, solve_global_pf, step_bound, verify_uniqueness,
    PropertyReport, PropertyTolerances, UniquenessReport,
};
use crate::scenario::{generate_random, ScenarioParams};

/// Gap tolerance used when the oracle is asked for `f*`.
pub const ORACLE_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EngineConfig {
    pub epsilon: f64,
    pub policy: Policy,
    pub max_steps: usize,
}

impl Default for EngineConfig {
    fn default() -> Self {
        let sim = SimConfig::default();
        Self {
            epsilon: sim.epsilon,
            policy: sim.policy,
            max_steps: sim.max_steps,
        }
    }
}

impl EngineConfig {
    pub fn sim(&self, seed: u64) -> SimConfig {
        SimConfig {
            epsilon: self.epsilon,
            policy: self.policy,
            seed,
            max_steps: self.max_steps,
            ..SimConfig::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GammaChoice {
    Fixed(f64),
    Auto,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DdnumConfig {
    pub gamma: GammaChoice,
    /// Explicit target; `None` derives it from an AFRA run on the same seed.
    pub target: Option<f64>,
    pub max_iterations: usize,
    pub grid: Vec<f64>,
}

impl Default for DdnumConfig {
    fn default() -> Self {
        Self {
            gamma: GammaChoice::Auto,
            target: None,
            max_iterations: ddnum::DEFAULT_MAX_ITERATIONS,
            grid: ddnum::default_gamma_grid(),
        }
    }
}

/// The summary document written by `run-afra` and `run-ddnum`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunSummary {
    pub engine: &'static str,
    pub seed: u64,
    pub steps_to_eq: usize,
    pub flagged: bool,
    pub final_potential: f64,
    pub pf_index: Option<f64>,
    pub total_messages: u64,
    pub per_client_throughput: Vec<f64>,
    pub per_bs_theta: Option<Vec<Option<f64>>>,
    pub thm2_bound: Option<f64>,
    pub property_report: Option<PropertyReport>,
    pub epsilon: Option<f64>,
    pub policy: Option<Policy>,
    pub gamma: Option<f64>,
    pub target_potential: Option<f64>,
}

impl RunSummary {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("summary serializes") + "\n"
    }
}

/// Runs AFRA and checks the equilibrium identities at the `ε`-scaled
/// tolerances. With `with_optimum` the report also carries `f* − f_eq`.
pub fn afra_summary(
    topo: &Topology,
    engine: &EngineConfig,
    seed: u64,
    with_optimum: bool,
) -> Result<(AfraRun, RunSummary)> {
    let run = run_afra(topo, &engine.sim(seed))?;
    let optimum = if with_optimum {
        Some(solve_global_pf(topo, ORACLE_TOL)?)
    } else {
        None
    };
    let report = check_equilibrium_properties(
        topo,
        &run.state.allocation,
        PropertyTolerances::for_epsilon(topo, engine.epsilon),
        optimum.as_ref(),
    )?;
    let s = &run.summary;
    let summary = RunSummary {
        engine: "afra",
        seed,
        steps_to_eq: s.steps_to_eq,
        flagged: s.flagged,
        final_potential: s.final_potential,
        pf_index: s.pf_index,
        total_messages: s.total_messages,
        per_client_throughput: s.per_client_throughput.clone(),
        per_bs_theta: Some(s.per_bs_theta.clone()),
        thm2_bound: Some(step_bound(topo, engine.epsilon)),
        property_report: Some(report),
        epsilon: Some(engine.epsilon),
        policy: Some(engine.policy),
        gamma: None,
        target_potential: None,
    };
    Ok((run, summary))
}

/// The DDNUM target for a topology: the explicit one, or 95% of the AFRA
/// equilibrium potential reached with `engine` and `seed`.
pub fn ddnum_target(
    topo: &Topology,
    config: &DdnumConfig,
    engine: &EngineConfig,
    seed: u64,
) -> Result<f64> {
    match config.target {
        Some(t) => Ok(t),
        None => {
            let run = run_afra(topo, &engine.sim(seed))?;
            Ok(ddnum::target_from_equilibrium(run.summary.final_potential))
        }
    }
}

pub fn ddnum_run(topo: &Topology, config: &DdnumConfig, target: f64) -> Result<DdnumRun> {
    match config.gamma {
        GammaChoice::Fixed(gamma) => run_ddnum(
            topo,
            &DdnumParams {
                gamma,
                target_potential: target,
                max_iterations: config.max_iterations,
            },
        ),
        GammaChoice::Auto => tune_gamma(topo, target, &config.grid, config.max_iterations),
    }
}

pub fn ddnum_summary(run: &DdnumRun, seed: u64) -> RunSummary {
    let s = &run.summary;
    RunSummary {
        engine: "ddnum",
        seed,
        steps_to_eq: s.steps,
        flagged: s.flagged,
        final_potential: s.final_potential,
        pf_index: model::pf_index(&s.per_client_throughput).ok(),
        total_messages: s.total_messages,
        per_client_throughput: s.per_client_throughput.clone(),
        per_bs_theta: None,
        thm2_bound: None,
        property_report: None,
        epsilon: None,
        policy: None,
        gamma: Some(s.gamma),
        target_potential: Some(s.target_potential),
    }
}

/// One seed of an AFRA-versus-DDNUM comparison.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompareSeed {
    pub seed: u64,
    pub afra_steps: usize,
    pub afra_messages: u64,
    pub afra_potential: f64,
    pub target_potential: f64,
    /// `None` when no step size on the grid reached the target.
    pub ddnum_gamma: Option<f64>,
    pub ddnum_steps: Option<usize>,
    pub ddnum_messages: Option<u64>,
    pub step_ratio: Option<f64>,
    pub message_ratio: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompareReport {
    pub num_clients: usize,
    pub num_bss: usize,
    pub seeds: usize,
    /// Seeds with a DDNUM run that reached the target.
    pub completed: usize,
    /// Seeds for which no grid step size reached the target.
    pub no_feasible_gamma: usize,
    pub mean_step_ratio: Option<f64>,
    pub mean_message_ratio: Option<f64>,
    pub per_seed: Vec<CompareSeed>,
}

impl CompareReport {
    pub const TABLE_HEADER: &'static str =
        "num_clients,num_bss,seeds,completed,no_feasible_gamma,mean_step_ratio,mean_message_ratio";

    pub fn table_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{}",
            self.num_clients,
            self.num_bss,
            self.seeds,
            self.completed,
            self.no_feasible_gamma,
            fmt_opt(self.mean_step_ratio),
            fmt_opt(self.mean_message_ratio)
        )
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "nan".to_string(), |x| format!("{x:.6}"))
}

fn ratio(num: f64, den: f64) -> Option<f64> {
    (den > 0.0).then(|| num / den)
}

fn mean(values: impl Iterator<Item = f64>) -> Option<f64> {
    let (sum, count) = values.fold((0.0, 0usize), |(s, c), v| (s + v, c + 1));
    (count > 0).then(|| sum / count as f64)
}

fn compare_seed(
    scenario: &ScenarioParams,
    engine: &EngineConfig,
    ddnum_config: &DdnumConfig,
    seed: u64,
) -> Result<CompareSeed> {
    let topo = generate_random(&scenario.with_seed(seed))?;
    let afra = run_afra(&topo, &engine.sim(seed))?;
    let target = match ddnum_config.target {
        Some(t) => t,
        None => ddnum::target_from_equilibrium(afra.summary.final_potential),
    };
    let ddnum = match ddnum_run(&topo, ddnum_config, target) {
        Ok(run) if !run.summary.flagged => Some(run),
        Ok(_) | Err(Error::NoFeasibleGamma) => None,
        Err(e) => return Err(e),
    };
    let afra_steps = afra.summary.steps_to_eq;
    let afra_messages = afra.summary.total_messages;
    let d = ddnum.as_ref().map(|r| &r.summary);
    Ok(CompareSeed {
        seed,
        afra_steps,
        afra_messages,
        afra_potential: afra.summary.final_potential,
        target_potential: target,
        ddnum_gamma: d.map(|s| s.gamma),
        ddnum_steps: d.map(|s| s.steps),
        ddnum_messages: d.map(|s| s.total_messages),
        step_ratio: d.and_then(|s| ratio(s.steps as f64, afra_steps as f64)),
        message_ratio: d.and_then(|s| ratio(s.total_messages as f64, afra_messages as f64)),
    })
}

/// AFRA and DDNUM on the same random topologies. Topology `k` uses seed
/// `seeds[k]` for both generation and AFRA's scheduler.
pub fn compare(
    scenario: &ScenarioParams,
    engine: &EngineConfig,
    ddnum_config: &DdnumConfig,
    seeds: &[u64],
) -> Result<CompareReport> {
    if seeds.is_empty() {
        return Err(Error::InvalidParameter("seed list is empty".into()));
    }
    let per_seed = seeds
        .par_iter()
        .map(|&seed| compare_seed(scenario, engine, ddnum_config, seed))
        .collect::<Result<Vec<_>>>()?;
    let completed = per_seed.iter().filter(|s| s.ddnum_steps.is_some()).count();
    Ok(CompareReport {
        num_clients: scenario.num_clients,
        num_bss: scenario.num_bss,
        seeds: seeds.len(),
        completed,
        no_feasible_gamma: seeds.len() - completed,
        mean_step_ratio: mean(per_seed.iter().filter_map(|s| s.step_ratio)),
        mean_message_ratio: mean(per_seed.iter().filter_map(|s| s.message_ratio)),
        per_seed,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub num_clients: usize,
    pub num_bss: usize,
    pub seeds: usize,
    pub flagged: usize,
    pub mean_steps: f64,
    pub std_steps: f64,
    pub mean_messages: f64,
    pub std_messages: f64,
}

impl SweepRow {
    pub const TABLE_HEADER: &'static str =
        "num_clients,num_bss,seeds,flagged,mean_steps,std_steps,mean_messages,std_messages";

    pub fn table_row(&self) -> String {
        format!(
            "{},{},{},{},{:.6},{:.6},{:.6},{:.6}",
            self.num_clients,
            self.num_bss,
            self.seeds,
            self.flagged,
            self.mean_steps,
            self.std_steps,
            self.mean_messages,
            self.std_messages
        )
    }
}

/// Mean and sample standard deviation.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// AFRA convergence statistics for every `(N, M)` cell, rows in `cells`
/// order. `base` supplies everything but the dimensions and seed.
pub fn sweep(
    base: &ScenarioParams,
    cells: &[(usize, usize)],
    engine: &EngineConfig,
    seeds: &[u64],
) -> Result<Vec<SweepRow>> {
    if seeds.is_empty() {
        return Err(Error::InvalidParameter("seed list is empty".into()));
    }
    let jobs: Vec<(usize, u64)> = (0..cells.len())
        .flat_map(|c| seeds.iter().map(move |&s| (c, s)))
        .collect();
    let results = jobs
        .par_iter()
        .map(|&(c, seed)| {
            let (n, m) = cells[c];
            let params = ScenarioParams {
                num_clients: n,
                num_bss: m,
                seed,
                ..base.clone()
            };
            let topo = generate_random(&params)?;
            let run = run_afra(&topo, &engine.sim(seed))?;
            Ok((run.summary.steps_to_eq, run.summary.total_messages, run.summary.flagged))
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(cells
        .iter()
        .zip(results.chunks(seeds.len()))
        .map(|(&(n, m), chunk)| {
            let steps: Vec<f64> = chunk.iter().map(|r| r.0 as f64).collect();
            let msgs: Vec<f64> = chunk.iter().map(|r| r.1 as f64).collect();
            let (mean_steps, std_steps) = mean_std(&steps);
            let (mean_messages, std_messages) = mean_std(&msgs);
            SweepRow {
                num_clients: n,
                num_bss: m,
                seeds: seeds.len(),
                flagged: chunk.iter().filter(|r| r.2).count(),
                mean_steps,
                std_steps,
                mean_messages,
                std_messages,
            }
        })
        .collect())
}

pub fn sweep_table(rows: &[SweepRow]) -> String {
    let mut out = String::from(SweepRow::TABLE_HEADER);
    out.push('\n');
    for row in rows {
        out.push_str(&row.table_row());
        out.push('\n');
    }
    out
}

/// Everything `verify` reports about one topology.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyReport {
    pub seeds: Vec<u64>,
    pub epsilon: f64,
    pub optimum_potential: f64,
    pub optimum_gap: f64,
    pub runs: Vec<VerifyRun>,
    pub uniqueness: Option<UniquenessReport>,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyRun {
    pub seed: u64,
    pub steps_to_eq: usize,
    pub thm2_bound: f64,
    pub within_bound: bool,
    pub final_potential: f64,
    pub property_report: PropertyReport,
}

/// Runs AFRA once per seed and cross-checks the equilibria against the
/// global optimum, the step bound and each other.
pub fn verify(topo: &Topology, engine: &EngineConfig, seeds: &[u64]) -> Result<VerifyReport> {
    if seeds.is_empty() {
        return Err(Error::InvalidParameter("seed list is empty".into()));
    }
    topo.validate()?;
    let optimum = solve_global_pf(topo, ORACLE_TOL)?;
    let bound = step_bound(topo, engine.epsilon);
    let outcomes = seeds
        .par_iter()
        .map(|&seed| {
            let run = run_afra(topo, &engine.sim(seed))?;
            let report = check_equilibrium_properties(
                topo,
                &run.state.allocation,
                PropertyTolerances::for_epsilon(topo, engine.epsilon),
                Some(&optimum),
            )?;
            Ok((run, report))
        })
        .collect::<Result<Vec<_>>>()?;

    let allocations: Vec<Allocation> = outcomes.iter().map(|(r, _)| r.state.allocation.clone()).collect();
    let uniqueness = if allocations.len() >= 2 {
        Some(verify_uniqueness(topo, &allocations, oracle::tol_r(topo, engine.epsilon))?)
    } else {
        None
    };
    let runs: Vec<VerifyRun> = seeds
        .iter()
        .zip(outcomes)
        .map(|(&seed, (run, report))| VerifyRun {
            seed,
            steps_to_eq: run.summary.steps_to_eq,
            thm2_bound: bound,
            within_bound: run.summary.steps_to_eq as f64 <= bound,
            final_potential: run.summary.final_potential,
            property_report: report,
        })
        .collect();
    let passed = runs.iter().all(|r| r.within_bound && r.property_report.passed)
        && uniqueness.as_ref().is_none_or(|u| u.throughput_unique);
    Ok(VerifyReport {
        seeds: seeds.to_vec(),
        epsilon: engine.epsilon,
        optimum_potential: optimum.potential,
        optimum_gap: optimum.gap,
        runs,
        uniqueness,
        passed,
    })
}

pub fn to_json<T: Serialize>(value: &T) -> String {
    serde_json::to_string_pretty(value).expect("report serializes") + "\n"
}
