//! Seeded topology generation and named fixtures.

use rand::seq::{index, IndexedRandom};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Allocation, Matrix, Topology};

pub const WIFI_RATES: [f64; 4] = [1.0, 2.0, 5.5, 11.0];
pub const CELLULAR_RATES: [f64; 4] = [5.2, 10.3, 25.5, 51.0];

pub const WIFI: &str = "wifi";
pub const CELLULAR: &str = "cellular";

/// Half of the base stations are WiFi (the lower ids), half cellular; every
/// client reaches `rats_per_client / 2` distinct base stations of each kind.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioParams {
    pub num_clients: usize,
    pub num_bss: usize,
    pub rats_per_client: usize,
    pub wifi_rates: Vec<f64>,
    pub cellular_rates: Vec<f64>,
    /// Per-client weights; all ones when `None`.
    pub weights: Option<Vec<f64>>,
    pub seed: u64,
}

impl ScenarioParams {
    pub fn new(num_clients: usize, num_bss: usize, seed: u64) -> Self {
        Self {
            num_clients,
            num_bss,
            rats_per_client: 4,
            wifi_rates: WIFI_RATES.to_vec(),
            cellular_rates: CELLULAR_RATES.to_vec(),
            weights: None,
            seed,
        }
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        Self { seed, ..self.clone() }
    }

    fn validate(&self) -> Result<()> {
        if self.num_clients == 0 || self.num_bss == 0 {
            return Err(Error::EmptyTopology);
        }
        if self.num_bss % 2 != 0 {
            return Err(Error::InvalidParameter(format!(
                "the WiFi/cellular split needs an even number of base stations, got {}",
                self.num_bss
            )));
        }
        if self.rats_per_client == 0 || self.rats_per_client % 2 != 0 {
            return Err(Error::InvalidParameter(format!(
                "rats_per_client must be a positive even number, got {}",
                self.rats_per_client
            )));
        }
        for (name, set) in [("wifi", &self.wifi_rates), ("cellular", &self.cellular_rates)] {
            if set.is_empty() || set.iter().any(|r| !(*r > 0.0 && r.is_finite())) {
                return Err(Error::InvalidParameter(format!(
                    "{name} rate set must be non-empty and positive"
                )));
            }
        }
        let per_class = self.rats_per_client / 2;
        let available = self.num_bss / 2;
        if available < per_class {
            let class = if available == 0 { WIFI } else { "wifi and cellular" };
            return Err(Error::InsufficientBss {
                class: class.to_string(),
                needed: per_class,
                available,
            });
        }
        Ok(())
    }
}

pub fn generate_random(params: &ScenarioParams) -> Result<Topology> {
    params.validate()?;
    let (n, m) = (params.num_clients, params.num_bss);
    let half = m / 2;
    let per_class = params.rats_per_client / 2;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut rates = Matrix::zeros(n, m);

    for i in 0..n {
        for (offset, set) in [(0, &params.wifi_rates), (half, &params.cellular_rates)] {
            let mut picks = index::sample(&mut rng, half, per_class).into_vec();
            picks.sort_unstable();
            for j in picks {
                let rate = *set.choose(&mut rng).expect("rate set is non-empty");
                rates.set(i, offset + j, rate);
            }
        }
    }

    let weights = match &params.weights {
        Some(w) if w.len() != n => {
            return Err(Error::DimensionMismatch {
                expected: format!("{n} weights"),
                got: format!("{} weights", w.len()),
            })
        }
        Some(w) => w.clone(),
        None => vec![1.0; n],
    };
    let tech = (0..m)
        .map(|j| if j < half { WIFI } else { CELLULAR }.to_string())
        .collect();
    Topology::with_labels(rates, weights, tech)
}

/// Two clients, two base stations, rates 1 and 2 to both, weights 2: every
/// allocation in a one-parameter family is optimal and yields r = (1, 2).
#[derive(Debug, Clone, PartialEq)]
pub struct TwoByTwoFixture {
    pub topology: Topology,
    pub reference_throughput: Vec<f64>,
}

impl TwoByTwoFixture {
    /// `λ = [[α, 1−α], [1−α, α]]`.
    pub fn member(&self, alpha: f64) -> Allocation {
        Allocation::from_rows(&[vec![alpha, 1.0 - alpha], vec![1.0 - alpha, alpha]])
            .expect("2x2 allocation")
    }
}

pub fn two_by_two_example() -> TwoByTwoFixture {
    let topology = Topology::new(vec![vec![1.0, 1.0], vec![2.0, 2.0]], vec![2.0, 2.0])
        .expect("fixture topology is valid");
    TwoByTwoFixture {
        topology,
        reference_throughput: vec![1.0, 2.0],
    }
}
