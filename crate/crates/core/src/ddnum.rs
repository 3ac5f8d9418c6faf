//! Dual-decomposition baseline.
//!
//! Each base station posts a price `μ_j` for its airtime. A client picks the
//! airtime that maximizes its own `ω_i ln r_i − Σ_j μ_j λ_ij`, and base
//! stations nudge their prices by a projected gradient step on the unused or
//! oversubscribed budget. Base stations act one at a time, in id order.

use std::fmt::Write as _;

use serde::Serialize;

use crate::afra::LAMBDA_CHANGE_TOL;
use crate::error::{Error, Result};
use crate::model::{self, Allocation, Topology};

pub const MU_FLOOR: f64 = 1e-9;
pub const DEFAULT_MAX_ITERATIONS: usize = 10_000;
/// Fraction of the equilibrium potential the baseline must reach.
pub const TARGET_FRACTION: f64 = 0.95;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PriceVector {
    pub mu: Vec<f64>,
    pub gamma: f64,
    pub mu_floor: f64,
}

impl PriceVector {
    /// Every price starts at `Σω / M`.
    pub fn initial(topo: &Topology, gamma: f64) -> Self {
        let start = topo.total_weight() / topo.num_bss() as f64;
        Self {
            mu: vec![start.max(MU_FLOOR); topo.num_bss()],
            gamma,
            mu_floor: MU_FLOOR,
        }
    }
}

/// Concrete parameters of one baseline run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DdnumParams {
    pub gamma: f64,
    pub target_potential: f64,
    pub max_iterations: usize,
}

/// A client's best response to prices: all of its demand goes to the base
/// station with the best rate-per-price, sized `ω_i / μ_j`.
pub fn client_subproblem(topo: &Topology, i: usize, mu: &[f64]) -> Vec<f64> {
    let mut row = vec![0.0; topo.num_bss()];
    let mut best: Option<(usize, f64)> = None;
    for j in 0..topo.num_bss() {
        if !topo.connected(i, j) {
            continue;
        }
        let value = topo.rate(i, j) / mu[j];
        if best.is_none_or(|(_, v)| value > v) {
            best = Some((j, value));
        }
    }
    if let Some((j, _)) = best {
        row[j] = topo.weights[i] / mu[j];
    }
    row
}

/// `[μ − γ(1 − Σλ*)]⁺`, then raised to `floor`.
pub fn price_update(mu: f64, gamma: f64, total_requested: f64, floor: f64) -> f64 {
    (mu - gamma * (1.0 - total_requested)).max(0.0).max(floor)
}

/// Scales every oversubscribed column back onto its unit budget.
pub fn project_feasible(raw: &Allocation) -> Allocation {
    let mut out = raw.clone();
    let (n, m) = (raw.lambdas.rows(), raw.lambdas.cols());
    for j in 0..m {
        let sum = raw.lambdas.column_sum(j);
        if sum > 1.0 {
            for i in 0..n {
                out.set(i, j, raw.get(i, j) / sum);
            }
        }
    }
    out
}

/// Things that cost one over-the-air message each.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MessageEvent {
    /// Base stations announcing their starting prices.
    InitialBroadcast { num_bss: usize },
    /// One price announcement plus the client reports it triggered.
    PriceUpdate { changed_entries: usize },
    /// Client reports without a price announcement.
    ClientReports { changed_entries: usize },
}

pub fn count_ddnum_messages(event: MessageEvent) -> u64 {
    match event {
        MessageEvent::InitialBroadcast { num_bss } => num_bss as u64,
        MessageEvent::PriceUpdate { changed_entries } => 1 + changed_entries as u64,
        MessageEvent::ClientReports { changed_entries } => changed_entries as u64,
    }
}

fn changed_entries(old: &[f64], new: &[f64]) -> usize {
    old.iter()
        .zip(new)
        .filter(|(a, b)| (*a - *b).abs() > LAMBDA_CHANGE_TOL)
        .count()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DdnumRecord {
    pub iter: usize,
    pub bs: usize,
    pub mu_after: f64,
    pub potential_projected: f64,
    pub cum_messages: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DdnumSummary {
    /// Price updates performed.
    pub steps: usize,
    /// Set when the iteration budget ran out before the target was reached.
    pub flagged: bool,
    pub gamma: f64,
    pub target_potential: f64,
    pub final_potential: f64,
    pub total_messages: u64,
    pub per_client_throughput: Vec<f64>,
    pub prices: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct DdnumRun {
    pub summary: DdnumSummary,
    pub trace: Vec<DdnumRecord>,
    /// Last unprojected client requests.
    pub requested: Allocation,
}

pub fn run_ddnum(topo: &Topology, params: &DdnumParams) -> Result<DdnumRun> {
    topo.validate()?;
    if !(params.gamma > 0.0 && params.gamma.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "step size must be positive, got {}",
            params.gamma
        )));
    }
    if !params.target_potential.is_finite() {
        return Err(Error::InvalidParameter("target potential must be finite".into()));
    }
    if params.max_iterations == 0 {
        return Err(Error::InvalidParameter("max_iterations must be at least 1".into()));
    }

    let (n, m) = (topo.num_clients(), topo.num_bss());
    let links: Vec<Vec<usize>> = (0..m).map(|j| topo.clients_of(j)).collect();
    let active: Vec<usize> = (0..m).filter(|&j| !links[j].is_empty()).collect();
    let mut prices = PriceVector::initial(topo, params.gamma);
    let mut requested = Allocation::zeros(n, m);

    let mut messages = count_ddnum_messages(MessageEvent::InitialBroadcast { num_bss: m });
    let mut changed = 0;
    for i in 0..n {
        let row = client_subproblem(topo, i, &prices.mu);
        changed += changed_entries(requested.lambdas.row(i), &row);
        for (j, v) in row.into_iter().enumerate() {
            requested.set(i, j, v);
        }
    }
    messages += count_ddnum_messages(MessageEvent::ClientReports { changed_entries: changed });

    let evaluate = |requested: &Allocation| {
        let projected = project_feasible(requested);
        let r = model::throughput_unchecked(topo, &projected);
        (model::potential(topo, &r), r)
    };
    let (mut potential, mut throughput) = evaluate(&requested);
    let mut trace = Vec::new();
    let mut steps = 0;

    while potential < params.target_potential && steps < params.max_iterations {
        let j = active[steps % active.len()];
        let mut changed = 0;
        for &i in &links[j] {
            let row = client_subproblem(topo, i, &prices.mu);
            changed += changed_entries(requested.lambdas.row(i), &row);
            for (jj, v) in row.into_iter().enumerate() {
                requested.set(i, jj, v);
            }
        }
        let total = requested.lambdas.column_sum(j);
        prices.mu[j] = price_update(prices.mu[j], prices.gamma, total, prices.mu_floor);
        messages += count_ddnum_messages(MessageEvent::PriceUpdate { changed_entries: changed });
        steps += 1;
        (potential, throughput) = evaluate(&requested);
        trace.push(DdnumRecord {
            iter: steps,
            bs: j,
            mu_after: prices.mu[j],
            potential_projected: potential,
            cum_messages: messages,
        });
    }

    Ok(DdnumRun {
        summary: DdnumSummary {
            steps,
            flagged: potential < params.target_potential,
            gamma: params.gamma,
            target_potential: params.target_potential,
            final_potential: potential,
            total_messages: messages,
            per_client_throughput: throughput,
            prices: prices.mu,
        },
        trace,
        requested,
    })
}

/// Termination target derived from an equilibrium potential: 95% of it,
/// measured as a 5% shortfall of `|f|` so negative potentials move the right way.
pub fn target_from_equilibrium(potential: f64) -> f64 {
    potential - (1.0 - TARGET_FRACTION) * potential.abs()
}

/// `points` step sizes spaced geometrically over `[lo, hi]`.
pub fn geometric_grid(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    match points {
        0 => Vec::new(),
        1 => vec![lo],
        _ => {
            let ratio = (hi / lo).ln() / (points - 1) as f64;
            (0..points).map(|k| lo * (ratio * k as f64).exp()).collect()
        }
    }
}

pub fn default_gamma_grid() -> Vec<f64> {
    geometric_grid(1e-3, 1e1, 16)
}

/// Runs every grid point and keeps the step size that reaches the target in
/// the fewest price updates (the earlier grid point on ties).
pub fn tune_gamma(
    topo: &Topology,
    target: f64,
    grid: &[f64],
    max_iterations: usize,
) -> Result<DdnumRun> {
    if grid.is_empty() {
        return Err(Error::InvalidParameter("step-size grid is empty".into()));
    }
    let mut best: Option<DdnumRun> = None;
    for &gamma in grid {
        let run = run_ddnum(
            topo,
            &DdnumParams {
                gamma,
                target_potential: target,
                max_iterations,
            },
        )?;
        if run.summary.flagged {
            continue;
        }
        if best
            .as_ref()
            .is_none_or(|b| run.summary.steps < b.summary.steps)
        {
            best = Some(run);
        }
    }
    best.ok_or(Error::NoFeasibleGamma)
}

pub fn trace_csv(topo: &Topology, trace: &[DdnumRecord]) -> String {
    let mut out = String::from("iter,bs_id,mu_after,potential_projected,cum_messages\n");
    for rec in trace {
        let _ = writeln!(
            out,
            "{},{},{:.12e},{:.12e},{}",
            rec.iter, topo.bs_ids[rec.bs], rec.mu_after, rec.potential_projected, rec.cum_messages
        );
    }
    out
}
