//! Network model: topologies, time-fraction allocations and the scalar
//! metrics evaluated on them.
//!
//! Rates are PHY rates in Mbps with `0.0` meaning "no link". An
//! [`Allocation`] holds the fraction of each base station's airtime given to
//! each client; client throughput is the rate-weighted sum of those fractions.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Absolute slack allowed on the per-BS time budget and on non-negativity.
pub const TOL_FEAS: f64 = 1e-9;

/// Dense row-major matrix indexed by (client, base station).
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().find(|r| r.len() != cols) {
            return Err(Error::DimensionMismatch {
                expected: format!("{cols} columns"),
                got: format!("{} columns", bad.len()),
            });
        }
        Ok(Self {
            rows: rows.len(),
            cols,
            data: rows.iter().flatten().copied().collect(),
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self.get(i, j)).collect()
    }

    pub fn column_sum(&self, j: usize) -> f64 {
        (0..self.rows).map(|i| self.get(i, j)).sum()
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.data.chunks(self.cols.max(1)).map(<[f64]>::to_vec).collect()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }
}

/// Clients, base stations and the PHY-rate matrix between them.
#[derive(Debug, Clone, PartialEq)]
pub struct Topology {
    pub client_ids: Vec<String>,
    pub bs_ids: Vec<String>,
    pub bs_tech: Vec<String>,
    pub weights: Vec<f64>,
    pub rates: Matrix,
}

impl Topology {
    /// Builds and validates a topology with generated ids (`c1..`, `bs1..`)
    /// and an empty technology label.
    pub fn new(rates: Vec<Vec<f64>>, weights: Vec<f64>) -> Result<Self> {
        let rates = Matrix::from_rows(&rates)?;
        if weights.len() != rates.rows() {
            return Err(Error::DimensionMismatch {
                expected: format!("{} weights", rates.rows()),
                got: format!("{} weights", weights.len()),
            });
        }
        let bs_tech = vec![String::new(); rates.cols()];
        Self::with_labels(rates, weights, bs_tech)
    }

    pub fn with_labels(rates: Matrix, weights: Vec<f64>, bs_tech: Vec<String>) -> Result<Self> {
        let topo = Self {
            client_ids: (1..=rates.rows()).map(|i| format!("c{i}")).collect(),
            bs_ids: (1..=rates.cols()).map(|j| format!("bs{j}")).collect(),
            bs_tech,
            weights,
            rates,
        };
        topo.validate()?;
        Ok(topo)
    }

    pub fn num_clients(&self) -> usize {
        self.rates.rows()
    }

    pub fn num_bss(&self) -> usize {
        self.rates.cols()
    }

    #[inline]
    pub fn rate(&self, i: usize, j: usize) -> f64 {
        self.rates.get(i, j)
    }

    #[inline]
    pub fn connected(&self, i: usize, j: usize) -> bool {
        self.rates.get(i, j) > 0.0
    }

    /// Clients with a positive rate to `j`, in ascending index order.
    pub fn clients_of(&self, j: usize) -> Vec<usize> {
        (0..self.num_clients()).filter(|&i| self.connected(i, j)).collect()
    }

    /// Number of base stations client `i` can reach (its RAT count).
    pub fn degree(&self, i: usize) -> usize {
        self.rates.row(i).iter().filter(|&&r| r > 0.0).count()
    }

    pub fn total_weight(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// Smallest and largest positive rate.
    pub fn rate_range(&self) -> Option<(f64, f64)> {
        self.rates
            .as_slice()
            .iter()
            .filter(|&&r| r > 0.0)
            .fold(None, |acc, &r| match acc {
                None => Some((r, r)),
                Some((lo, hi)) => Some((lo.min(r), hi.max(r))),
            })
    }

    /// Checks the structural invariants: non-empty, finite non-negative rates,
    /// positive weights, and every client reachable by some base station.
    pub fn validate(&self) -> Result<()> {
        let (n, m) = (self.num_clients(), self.num_bss());
        if n == 0 || m == 0 {
            return Err(Error::EmptyTopology);
        }
        if self.weights.len() != n {
            return Err(Error::DimensionMismatch {
                expected: format!("{n} weights"),
                got: format!("{} weights", self.weights.len()),
            });
        }
        if self.bs_tech.len() != m || self.bs_ids.len() != m || self.client_ids.len() != n {
            return Err(Error::DimensionMismatch {
                expected: format!("{n} client ids and {m} base station ids/labels"),
                got: format!(
                    "{} client ids, {} base station ids, {} labels",
                    self.client_ids.len(),
                    self.bs_ids.len(),
                    self.bs_tech.len()
                ),
            });
        }
        for i in 0..n {
            for j in 0..m {
                let rate = self.rate(i, j);
                if !(rate >= 0.0 && rate.is_finite()) {
                    return Err(Error::NegativeRate { client: i, bs: j, rate });
                }
            }
        }
        for (i, &w) in self.weights.iter().enumerate() {
            if !(w > 0.0 && w.is_finite()) {
                return Err(Error::NonPositiveWeight { client: i, weight: w });
            }
        }
        if let Some(i) = (0..n).find(|&i| self.degree(i) == 0) {
            return Err(Error::ZeroConnectivityClient { client: i });
        }
        Ok(())
    }
}

/// Returns the topology unchanged when it satisfies every invariant.
pub fn validate_topology(topo: Topology) -> Result<Topology> {
    topo.validate()?;
    Ok(topo)
}

/// Time fractions `λ[i][j]` each base station gives each client.
#[derive(Debug, Clone, PartialEq)]
pub struct Allocation {
    pub lambdas: Matrix,
}

impl Allocation {
    pub fn zeros(num_clients: usize, num_bss: usize) -> Self {
        Self {
            lambdas: Matrix::zeros(num_clients, num_bss),
        }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        Ok(Self {
            lambdas: Matrix::from_rows(rows)?,
        })
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.lambdas.get(i, j)
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.lambdas.set(i, j, v);
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.lambdas.to_rows()
    }

    fn check_dims(&self, topo: &Topology) -> Result<()> {
        if self.lambdas.rows() != topo.num_clients() || self.lambdas.cols() != topo.num_bss() {
            return Err(Error::DimensionMismatch {
                expected: format!("{}x{}", topo.num_clients(), topo.num_bss()),
                got: format!("{}x{}", self.lambdas.rows(), self.lambdas.cols()),
            });
        }
        Ok(())
    }
}

/// `r_i = Σ_j λ_ij R_ij`.
pub fn client_throughput(topo: &Topology, alloc: &Allocation) -> Result<Vec<f64>> {
    alloc.check_dims(topo)?;
    Ok(throughput_unchecked(topo, alloc))
}

pub(crate) fn throughput_unchecked(topo: &Topology, alloc: &Allocation) -> Vec<f64> {
    (0..topo.num_clients())
        .map(|i| {
            topo.rates
                .row(i)
                .iter()
                .zip(alloc.lambdas.row(i))
                .map(|(r, l)| r * l)
                .sum()
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    /// A time fraction below zero.
    Negative { client: usize, bs: usize, value: f64 },
    /// A base station handing out more than its unit budget.
    BudgetExceeded { bs: usize, sum: f64 },
    /// Airtime given over a link that does not exist.
    Disconnected { client: usize, bs: usize, value: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FeasibilityReport {
    pub feasible: bool,
    pub violations: Vec<Violation>,
}

pub fn check_feasibility(topo: &Topology, alloc: &Allocation) -> Result<FeasibilityReport> {
    alloc.check_dims(topo)?;
    let mut violations = Vec::new();
    for j in 0..topo.num_bss() {
        for i in 0..topo.num_clients() {
            let v = alloc.get(i, j);
            if v < -TOL_FEAS {
                violations.push(Violation::Negative { client: i, bs: j, value: v });
            } else if v > TOL_FEAS && !topo.connected(i, j) {
                violations.push(Violation::Disconnected { client: i, bs: j, value: v });
            }
        }
        let sum = alloc.lambdas.column_sum(j);
        if sum > 1.0 + TOL_FEAS {
            violations.push(Violation::BudgetExceeded { bs: j, sum });
        }
    }
    Ok(FeasibilityReport {
        feasible: violations.is_empty(),
        violations,
    })
}

/// Weighted log-utility `Σ ω_i ln r_i`; `-inf` as soon as any client is
/// starved.
pub fn potential(topo: &Topology, r: &[f64]) -> f64 {
    weighted_log_sum(&topo.weights, r)
}

pub(crate) fn weighted_log_sum(weights: &[f64], r: &[f64]) -> f64 {
    let mut f = 0.0;
    for (w, &ri) in weights.iter().zip(r) {
        if ri <= 0.0 {
            return f64::NEG_INFINITY;
        }
        f += w * ri.ln();
    }
    f
}

/// Reporting metric `Σ log10 r_i` (unweighted).
pub fn pf_index(r: &[f64]) -> Result<f64> {
    r.iter().enumerate().try_fold(0.0, |acc, (i, &v)| {
        if v > 0.0 {
            Ok(acc + v.log10())
        } else {
            Err(Error::NonPositiveThroughput { client: i, value: v })
        }
    })
}

/// Key `r_i / (ω_i R_ij)` that a base station water-fills on.
#[inline]
pub fn fill_key(topo: &Topology, r: &[f64], i: usize, j: usize) -> f64 {
    r[i] / (topo.weights[i] * topo.rate(i, j))
}

/// Water-fill level of each base station: the common key of the clients it
/// serves (the largest one when they disagree). A base station serving no one
/// reports the smallest key among its connected clients; one with no
/// connected clients reports `None`.
pub fn water_levels(topo: &Topology, alloc: &Allocation, r: &[f64]) -> Vec<Option<f64>> {
    (0..topo.num_bss())
        .map(|j| water_level(topo, alloc, r, j))
        .collect()
}

pub fn water_level(topo: &Topology, alloc: &Allocation, r: &[f64], j: usize) -> Option<f64> {
    let clients = topo.clients_of(j);
    if clients.is_empty() {
        return None;
    }
    let served = clients
        .iter()
        .filter(|&&i| alloc.get(i, j) > 0.0)
        .map(|&i| fill_key(topo, r, i, j))
        .fold(f64::NAN, f64::max);
    if served.is_nan() {
        Some(
            clients
                .iter()
                .map(|&i| fill_key(topo, r, i, j))
                .fold(f64::INFINITY, f64::min),
        )
    } else {
        Some(served)
    }
}

/// On-disk topology description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopologyFile {
    pub clients: Vec<ClientEntry>,
    pub bss: Vec<BsEntry>,
    pub rates: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClientEntry {
    pub id: String,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BsEntry {
    pub id: String,
    pub tech: String,
}

impl From<&Topology> for TopologyFile {
    fn from(topo: &Topology) -> Self {
        Self {
            clients: topo
                .client_ids
                .iter()
                .zip(&topo.weights)
                .map(|(id, &weight)| ClientEntry { id: id.clone(), weight })
                .collect(),
            bss: topo
                .bs_ids
                .iter()
                .zip(&topo.bs_tech)
                .map(|(id, tech)| BsEntry {
                    id: id.clone(),
                    tech: tech.clone(),
                })
                .collect(),
            rates: topo.rates.to_rows(),
        }
    }
}

impl TryFrom<TopologyFile> for Topology {
    type Error = Error;

    fn try_from(file: TopologyFile) -> Result<Self> {
        if file.rates.len() != file.clients.len() {
            return Err(Error::DimensionMismatch {
                expected: format!("{} rate rows", file.clients.len()),
                got: format!("{} rate rows", file.rates.len()),
            });
        }
        if let Some(row) = file.rates.iter().find(|r| r.len() != file.bss.len()) {
            return Err(Error::DimensionMismatch {
                expected: format!("{} rate columns", file.bss.len()),
                got: format!("{} rate columns", row.len()),
            });
        }
        let rates = if file.clients.is_empty() {
            Matrix::zeros(0, file.bss.len())
        } else {
            Matrix::from_rows(&file.rates)?
        };
        let topo = Topology {
            client_ids: file.clients.iter().map(|c| c.id.clone()).collect(),
            weights: file.clients.iter().map(|c| c.weight).collect(),
            bs_ids: file.bss.iter().map(|b| b.id.clone()).collect(),
            bs_tech: file.bss.into_iter().map(|b| b.tech).collect(),
            rates,
        };
        validate_topology(topo)
    }
}

impl Topology {
    pub fn from_json(text: &str) -> Result<Self> {
        let file: TopologyFile =
            serde_json::from_str(text).map_err(|e| Error::Format(e.to_string()))?;
        file.try_into()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&TopologyFile::from(self)).expect("topology serializes")
    }
}
