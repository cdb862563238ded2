//! Shared fixtures for the benchmarks.

use volmellin::{generate_observations, simulate_exp_ou, OUParams, ObservationSet, PathBundle, PathConfig};

pub fn exp_ou_path(n: usize, seed: u64) -> PathBundle {
    simulate_exp_ou(&OUParams::reference(), &PathConfig { n, seed, ..PathConfig::default() }).expect("valid config")
}

/// Noisy observations `Y` and the direct observations `V̄` of one exp-OU path.
pub fn observation_pair(n: usize, seed: u64) -> (ObservationSet, ObservationSet) {
    let path = exp_ou_path(n, seed);
    let noisy = generate_observations(&path, seed).expect("positive path");
    (noisy, path.direct_observations().expect("positive path"))
}
