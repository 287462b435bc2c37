//! Shared fixtures for the benchmarks.

use stdmmw_core::corpus::standard_corpus;
use stdmmw_core::prng::CounterRng;
use stdmmw_core::{GrayImage, Payload, UserKeySet};

/// First image of the synthetic corpus.
pub fn host_image() -> GrayImage {
    standard_corpus().expect("corpus").swap_remove(0).image
}

/// `n` users with seeded keys and one random bit per host vector.
pub fn payloads(n: usize, bits: usize) -> Vec<Payload> {
    (0..n)
        .map(|j| {
            let keys = UserKeySet::from_seed(format!("bench-{j}"), 1000 + j as u64).expect("keys");
            let rng = CounterRng::new(17, j as u64);
            Payload::new(
                keys,
                (0..bits).map(|i| rng.uniform(i as u64, 0) < 0.5).collect(),
            )
        })
        .collect()
}
