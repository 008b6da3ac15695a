//! Shared fixtures for the benchmarks.

use delu_core::delu::train;
use delu_core::{Contract, ContractProblem, DeluNetwork, ProblemGenConfig, TrainConfig, Variant};

/// A generated problem with its payment bound.
pub fn problem(m: usize, n: usize) -> (ContractProblem, f64) {
    let p = ContractProblem::generate(&ProblemGenConfig {
        m,
        n,
        alpha_p: 0.7,
        beta_p: 0.3,
        seed: 1,
    })
    .expect("valid generator config");
    let f_max = p.default_f_max();
    (p, f_max)
}

/// A briefly trained DeLU network and its training contracts.
pub fn trained_network(m: usize, n: usize, samples: usize) -> (DeluNetwork, Vec<Contract>, f64) {
    let (p, f_max) = problem(m, n);
    let data = p.sample_training_set(samples, f_max, 1).expect("positive sample count");
    let cfg = TrainConfig {
        epochs: 5,
        batch_size: 32,
        ..TrainConfig::default()
    };
    let net = DeluNetwork::init(m, Variant::Delu, 1).expect("valid architecture");
    let (net, _) = train(net, &data, &cfg).expect("training succeeds");
    let probes = data.into_iter().map(|(c, _)| c).collect();
    (net, probes, f_max)
}
