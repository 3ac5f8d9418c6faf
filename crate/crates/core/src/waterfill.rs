//! Per-base-station proportional-fair water-filling.
//!
//! A base station sees, for each connected client, the throughput `r'` the
//! client already gets elsewhere. It pours its unit of airtime into the
//! clients with the lowest `r' / (ω R)` until every served client sits at a
//! common level `θ` and every unserved client is already at or above it.

use std::cmp::Ordering;

use crate::error::{Error, Result};

/// Single-BS proportional fairness: `λ_i = ω_i / Σω`.
pub fn single_bs_pf_shares(weights: &[f64]) -> Result<Vec<f64>> {
    if weights.is_empty() {
        return Err(Error::EmptyClientSet);
    }
    if let Some((i, &w)) = weights.iter().enumerate().find(|(_, w)| !(**w > 0.0)) {
        return Err(Error::NonPositiveWeight { client: i, weight: w });
    }
    let total: f64 = weights.iter().sum();
    Ok(weights.iter().map(|w| w / total).collect())
}

/// What one base station knows when it recomputes its column.
#[derive(Debug, Clone, PartialEq)]
pub struct WaterfillInput {
    pub bs: usize,
    /// Client indices with a positive rate to `bs`.
    pub clients: Vec<usize>,
    /// Throughput each client receives from every other base station.
    pub external: Vec<f64>,
    pub weights: Vec<f64>,
    pub rates: Vec<f64>,
}

impl WaterfillInput {
    pub fn len(&self) -> usize {
        self.clients.len()
    }

    pub fn is_empty(&self) -> bool {
        self.clients.is_empty()
    }

    /// Sort key `r'_p / (ω_p R_p)` of the client at position `p`.
    #[inline]
    pub fn key(&self, p: usize) -> f64 {
        self.external[p] / (self.weights[p] * self.rates[p])
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.clients.len();
        if self.external.len() != n || self.weights.len() != n || self.rates.len() != n {
            return Err(Error::DimensionMismatch {
                expected: format!("{n} entries per field"),
                got: format!(
                    "{}/{}/{} external/weights/rates",
                    self.external.len(),
                    self.weights.len(),
                    self.rates.len()
                ),
            });
        }
        for p in 0..n {
            let client = self.clients[p];
            if !(self.rates[p] > 0.0) {
                return Err(Error::NegativeRate {
                    client,
                    bs: self.bs,
                    rate: self.rates[p],
                });
            }
            if !(self.weights[p] > 0.0) {
                return Err(Error::NonPositiveWeight {
                    client,
                    weight: self.weights[p],
                });
            }
            if !(self.external[p] >= 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "external throughput {} of client {client} is negative",
                    self.external[p]
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WaterfillResult {
    pub theta: f64,
    /// Number of clients receiving airtime.
    pub k: usize,
    /// Time fractions, aligned with `WaterfillInput::clients`.
    pub lambdas: Vec<f64>,
}

/// Positions into `input.clients`, ascending by key, ties by client index.
pub fn sort_clients(input: &WaterfillInput) -> Vec<usize> {
    let mut order: Vec<usize> = (0..input.len()).collect();
    order.sort_by(|&a, &b| {
        input
            .key(a)
            .partial_cmp(&input.key(b))
            .unwrap_or(Ordering::Equal)
            .then(input.clients[a].cmp(&input.clients[b]))
    });
    order
}

/// Number of clients that end up served. Stops at the first prefix that,
/// lifted to the next client's key, would already use up the whole unit of
/// airtime.
pub fn find_k(input: &WaterfillInput, order: &[usize]) -> usize {
    let n = order.len();
    let mut weight_sum = 0.0;
    let mut offset_sum = 0.0;
    for k in 1..n {
        let p = order[k - 1];
        weight_sum += input.weights[p];
        offset_sum += input.external[p] / input.rates[p];
        let level = input.key(order[k]);
        if level * weight_sum - offset_sum >= 1.0 {
            return k;
        }
    }
    n
}

/// Root of `Σ_{p ≤ k} (θ ω_p R_p − r'_p) / R_p = 1`.
pub fn solve_theta(input: &WaterfillInput, order: &[usize], k: usize) -> f64 {
    let (weight_sum, offset_sum) = order[..k].iter().fold((0.0, 0.0), |(w, s), &p| {
        (w + input.weights[p], s + input.external[p] / input.rates[p])
    });
    (1.0 + offset_sum) / weight_sum
}

pub fn waterfill_allocate(input: &WaterfillInput) -> Result<WaterfillResult> {
    if input.is_empty() {
        return Err(Error::EmptyClientSet);
    }
    input.validate()?;
    let order = sort_clients(input);
    let k = find_k(input, &order);
    let theta = solve_theta(input, &order, k);
    let mut lambdas = vec![0.0; input.len()];
    for &p in &order[..k] {
        lambdas[p] = (theta * input.weights[p] - input.external[p] / input.rates[p]).max(0.0);
    }
    Ok(WaterfillResult { theta, k, lambdas })
}
