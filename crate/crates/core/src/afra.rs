//! Distributed water-filling dynamics.
//!
//! Base stations take turns recomputing their airtime column against the
//! throughput their clients currently get elsewhere. An update is committed
//! only when the client with the lowest fill key at that base station gains
//! at least `ε` of airtime; once no base station passes that gate the system
//! is at equilibrium.

use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{self, fill_key, Allocation, Topology};
use crate::waterfill::{waterfill_allocate, WaterfillInput};

/// Airtime changes below this are treated as no change when counting messages.
pub const LAMBDA_CHANGE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Policy {
    /// Uniformly pick one of the base stations whose update passes the gate.
    RandomSequential,
    /// Pick the base station whose update raises the potential the most.
    PriorityByGain,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub epsilon: f64,
    pub policy: Policy,
    pub seed: u64,
    pub max_steps: usize,
    /// Kept for the parallel update mode; has no effect on sequential runs.
    pub activation_probability: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            epsilon: 0.05,
            policy: Policy::RandomSequential,
            seed: 0,
            max_steps: 1_000_000,
            activation_probability: 1.0,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "epsilon must lie in (0, 1), got {}",
                self.epsilon
            )));
        }
        if self.max_steps == 0 {
            return Err(Error::InvalidParameter("max_steps must be at least 1".into()));
        }
        if !(self.activation_probability > 0.0 && self.activation_probability <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "activation probability must lie in (0, 1], got {}",
                self.activation_probability
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StepRecord {
    /// 1-based index of the accepted update.
    pub step: usize,
    pub bs: usize,
    pub accepted: bool,
    pub theta_after: f64,
    pub potential_after: f64,
    pub messages: u64,
    pub cum_messages: u64,
}

/// A base station's candidate column, computed without touching the state.
#[derive(Debug, Clone, PartialEq)]
pub struct Proposal {
    pub bs: usize,
    pub clients: Vec<usize>,
    pub column: Vec<f64>,
    pub theta: f64,
    /// Airtime gained by the lowest-key client.
    pub min_key_increase: f64,
    pub accepted: bool,
    /// Potential increase if committed; zero when the gate rejects.
    pub gain: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimState {
    pub topology: Topology,
    pub allocation: Allocation,
    pub throughput: Vec<f64>,
    pub theta: Vec<Option<f64>>,
    pub potential: f64,
    pub steps: usize,
    pub messages: u64,
    pub trace: Vec<StepRecord>,
}

/// Each base station splits its airtime evenly over its connected clients.
pub fn initial_allocation(topo: &Topology) -> Allocation {
    let mut alloc = Allocation::zeros(topo.num_clients(), topo.num_bss());
    for j in 0..topo.num_bss() {
        let clients = topo.clients_of(j);
        let share = 1.0 / clients.len() as f64;
        for i in clients {
            alloc.set(i, j, share);
        }
    }
    alloc
}

/// Messages clients send after an update: every client whose airtime at the
/// acting base station changed tells each base station it is connected to.
pub fn count_update_messages(
    topo: &Topology,
    clients: &[usize],
    old_column: &[f64],
    new_column: &[f64],
) -> u64 {
    clients
        .iter()
        .zip(old_column.iter().zip(new_column))
        .filter(|(_, (old, new))| (*old - *new).abs() > LAMBDA_CHANGE_TOL)
        .map(|(&i, _)| topo.degree(i) as u64)
        .sum()
}

impl SimState {
    pub fn new(topology: Topology) -> Self {
        let allocation = initial_allocation(&topology);
        Self::with_allocation(topology, allocation)
    }

    pub fn with_allocation(topology: Topology, allocation: Allocation) -> Self {
        let throughput = model::throughput_unchecked(&topology, &allocation);
        let theta = model::water_levels(&topology, &allocation, &throughput);
        let potential = model::potential(&topology, &throughput);
        Self {
            topology,
            allocation,
            throughput,
            theta,
            potential,
            steps: 0,
            messages: 0,
            trace: Vec::new(),
        }
    }

    pub fn waterfill_input(&self, j: usize) -> WaterfillInput {
        let topo = &self.topology;
        let clients = topo.clients_of(j);
        let external = clients
            .iter()
            .map(|&i| (self.throughput[i] - self.allocation.get(i, j) * topo.rate(i, j)).max(0.0))
            .collect();
        WaterfillInput {
            bs: j,
            weights: clients.iter().map(|&i| topo.weights[i]).collect(),
            rates: clients.iter().map(|&i| topo.rate(i, j)).collect(),
            external,
            clients,
        }
    }

    /// Water-fills base station `j` against the current throughput and applies
    /// the `ε` gate. `None` when no client is connected to `j`.
    pub fn propose(&self, j: usize, epsilon: f64) -> Option<Proposal> {
        let input = self.waterfill_input(j);
        if input.is_empty() {
            return None;
        }
        let result = waterfill_allocate(&input).expect("state holds a validated topology");
        let topo = &self.topology;

        // Lowest current key at j; ties to the lowest client index.
        let mut min_pos = 0;
        let mut min_key = f64::INFINITY;
        for (p, &i) in input.clients.iter().enumerate() {
            let key = fill_key(topo, &self.throughput, i, j);
            if key < min_key {
                min_key = key;
                min_pos = p;
            }
        }
        let old = self.allocation.get(input.clients[min_pos], j);
        let min_key_increase = result.lambdas[min_pos] - old;
        let accepted = min_key_increase >= epsilon;

        let gain = if accepted {
            (0..input.len())
                .map(|p| {
                    let i = input.clients[p];
                    let before = self.throughput[i];
                    let after = input.external[p] + result.lambdas[p] * input.rates[p];
                    if after == before {
                        0.0
                    } else if before > 0.0 {
                        topo.weights[i] * (after / before).ln()
                    } else {
                        f64::INFINITY
                    }
                })
                .sum()
        } else {
            0.0
        };

        Some(Proposal {
            bs: j,
            clients: input.clients,
            column: result.lambdas,
            theta: result.theta,
            min_key_increase,
            accepted,
            gain,
        })
    }

    /// Potential increase base station `j` would produce acting alone.
    pub fn potential_gain(&self, j: usize, epsilon: f64) -> f64 {
        self.propose(j, epsilon).map_or(0.0, |p| p.gain)
    }

    /// Commits a proposal: new column, refreshed throughput and levels, one
    /// trace record. Rejected proposals leave the state untouched.
    pub fn commit(&mut self, proposal: &Proposal) -> bool {
        if !proposal.accepted {
            return false;
        }
        let j = proposal.bs;
        let old: Vec<f64> = proposal
            .clients
            .iter()
            .map(|&i| self.allocation.get(i, j))
            .collect();
        let messages = count_update_messages(&self.topology, &proposal.clients, &old, &proposal.column);
        for (&i, &l) in proposal.clients.iter().zip(&proposal.column) {
            self.allocation.set(i, j, l);
        }
        self.throughput = model::throughput_unchecked(&self.topology, &self.allocation);
        self.theta = model::water_levels(&self.topology, &self.allocation, &self.throughput);
        self.potential = model::potential(&self.topology, &self.throughput);
        self.steps += 1;
        self.messages += messages;
        self.trace.push(StepRecord {
            step: self.steps,
            bs: j,
            accepted: true,
            theta_after: self.theta[j].unwrap_or(proposal.theta),
            potential_after: self.potential,
            messages,
            cum_messages: self.messages,
        });
        true
    }

    /// One water-fill attempt at base station `j`.
    pub fn afra_bs_update(&mut self, j: usize, epsilon: f64) -> bool {
        match self.propose(j, epsilon) {
            Some(p) => self.commit(&p),
            None => false,
        }
    }

    pub fn proposals(&self, epsilon: f64) -> Vec<Proposal> {
        (0..self.topology.num_bss())
            .filter_map(|j| self.propose(j, epsilon))
            .collect()
    }

    pub fn is_equilibrium(&self, epsilon: f64) -> bool {
        self.proposals(epsilon).iter().all(|p| !p.accepted)
    }
}

/// Picks the next acting base station among those whose update passes the
/// gate, or `None` at equilibrium.
pub fn select_next_bs<R: Rng>(
    state: &SimState,
    policy: Policy,
    epsilon: f64,
    rng: &mut R,
) -> Option<Proposal> {
    let mut gated: Vec<Proposal> = state
        .proposals(epsilon)
        .into_iter()
        .filter(|p| p.accepted)
        .collect();
    if gated.is_empty() {
        return None;
    }
    let pick = match policy {
        Policy::RandomSequential => rng.random_range(0..gated.len()),
        Policy::PriorityByGain => argmax_gain(&gated),
    };
    Some(gated.swap_remove(pick))
}

/// Index of the largest gain; earlier (lower BS id) entries win ties.
pub fn argmax_gain(proposals: &[Proposal]) -> usize {
    let mut best = 0;
    for (idx, p) in proposals.iter().enumerate().skip(1) {
        if p.gain > proposals[best].gain {
            best = idx;
        }
    }
    best
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AfraSummary {
    pub steps_to_eq: usize,
    /// Set when `max_steps` was hit before reaching equilibrium.
    pub flagged: bool,
    pub final_potential: f64,
    pub pf_index: Option<f64>,
    pub total_messages: u64,
    pub per_client_throughput: Vec<f64>,
    pub per_bs_theta: Vec<Option<f64>>,
}

#[derive(Debug, Clone)]
pub struct AfraRun {
    pub state: SimState,
    pub summary: AfraSummary,
}

impl AfraRun {
    pub fn trace(&self) -> &[StepRecord] {
        &self.state.trace
    }
}

pub fn run_afra(topo: &Topology, config: &SimConfig) -> Result<AfraRun> {
    topo.validate()?;
    run_afra_from(SimState::new(topo.clone()), config)
}

/// Runs the dynamics from an arbitrary starting state.
pub fn run_afra_from(mut state: SimState, config: &SimConfig) -> Result<AfraRun> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut flagged = false;
    while let Some(proposal) = select_next_bs(&state, config.policy, config.epsilon, &mut rng) {
        if state.steps >= config.max_steps {
            flagged = true;
            break;
        }
        state.commit(&proposal);
    }
    let summary = AfraSummary {
        steps_to_eq: state.steps,
        flagged,
        final_potential: state.potential,
        pf_index: model::pf_index(&state.throughput).ok(),
        total_messages: state.messages,
        per_client_throughput: state.throughput.clone(),
        per_bs_theta: state.theta.clone(),
    };
    Ok(AfraRun { state, summary })
}

/// Comma-separated trace with a header row.
pub fn trace_csv(topo: &Topology, trace: &[StepRecord]) -> String {
    let mut out = String::from("step,bs_id,accepted,theta_after,potential_after,cum_messages\n");
    for rec in trace {
        let _ = writeln!(
            out,
            "{},{},{},{:.12e},{:.12e},{}",
            rec.step, topo.bs_ids[rec.bs], rec.accepted, rec.theta_after, rec.potential_after, rec.cum_messages
        );
    }
    out
}
