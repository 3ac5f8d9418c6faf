//! Reference implementations the acceptance suite checks the library against.
//! Nothing here calls into the water-fill code it is used to verify.

use hetnet_afra::waterfill::WaterfillInput;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Sorts by `r'/(ωR)`, tries every prefix as the served set and keeps the
/// one that satisfies the water-fill conditions.
pub fn prefix_oracle(input: &WaterfillInput) -> (f64, Vec<f64>) {
    let n = input.clients.len();
    let key = |p: usize| input.external[p] / (input.weights[p] * input.rates[p]);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| key(a).total_cmp(&key(b)).then(input.clients[a].cmp(&input.clients[b])));
    for k in 1..=n {
        let served = &order[..k];
        let w: f64 = served.iter().map(|&p| input.weights[p]).sum();
        let s: f64 = served.iter().map(|&p| input.external[p] / input.rates[p]).sum();
        let theta = (1.0 + s) / w;
        let shares_ok = served
            .iter()
            .all(|&p| theta * input.weights[p] - input.external[p] / input.rates[p] >= -1e-12);
        let rest_ok = order[k..].iter().all(|&p| key(p) >= theta * (1.0 - 1e-12));
        if shares_ok && rest_ok {
            let mut lambdas = vec![0.0; n];
            for &p in served {
                lambdas[p] = (theta * input.weights[p] - input.external[p] / input.rates[p]).max(0.0);
            }
            return (theta, lambdas);
        }
    }
    panic!("no prefix satisfies the water-fill conditions: {input:?}");
}

pub fn random_waterfill_input(rng: &mut ChaCha8Rng) -> WaterfillInput {
    let n = rng.random_range(1..=12);
    let sets = [1.0, 2.0, 5.5, 11.0, 5.2, 10.3, 25.5, 51.0];
    let discrete = rng.random_bool(0.5);
    let mut clients: Vec<usize> = (0..40).collect();
    for i in (1..clients.len()).rev() {
        clients.swap(i, rng.random_range(0..=i));
    }
    clients.truncate(n);
    WaterfillInput {
        bs: 0,
        clients,
        external: (0..n)
            .map(|_| if rng.random_bool(0.3) { 0.0 } else { rng.random_range(0.0..40.0) })
            .collect(),
        weights: (0..n)
            .map(|_| if discrete { 1.0 } else { rng.random_range(0.2..5.0) })
            .collect(),
        rates: (0..n)
            .map(|_| if discrete { sets[rng.random_range(0..8)] } else { rng.random_range(0.5..60.0) })
            .collect(),
    }
}
