//! Shared generators for property tests.

use proptest::prelude::*;

use crate::model::Topology;

const RATES: [f64; 8] = [1.0, 2.0, 5.5, 11.0, 5.2, 10.3, 25.5, 51.0];

/// Up to 8 clients and 5 base stations; every client gets at least one link.
pub fn topology_strategy() -> impl Strategy<Value = Topology> {
    (1usize..=8, 1usize..=5)
        .prop_flat_map(|(n, m)| {
            (
                proptest::collection::vec(proptest::option::weighted(0.6, 0usize..8), n * m),
                proptest::collection::vec(0usize..m, n),
                proptest::collection::vec(0.5f64..3.0, n),
            )
                .prop_map(move |(cells, anchor, weights)| {
                    let rows = (0..n)
                        .map(|i| {
                            (0..m)
                                .map(|j| match cells[i * m + j] {
                                    Some(k) => RATES[k],
                                    None if anchor[i] == j => RATES[(i + j) % 8],
                                    None => 0.0,
                                })
                                .collect()
                        })
                        .collect();
                    Topology::new(rows, weights).unwrap()
                })
        })
}
