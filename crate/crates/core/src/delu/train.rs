use std::collections::HashMap;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::problem::Contract;
use crate::rng::{self, Stream};

use super::network::{ActivationPattern, DeluNetwork};

const RMS_EPS: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    /// RMSprop smoothing constant for the squared-gradient average.
    pub rms_decay: f64,
    pub batch_size: usize,
    pub shuffle_seed: u64,
    pub init_seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 100,
            learning_rate: 1e-3,
            rms_decay: 0.99,
            batch_size: 256,
            shuffle_seed: 0,
            init_seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::Argument("epochs must be positive".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::Argument("batch size must be positive".into()));
        }
        if !(self.rms_decay > 0.0 && self.rms_decay < 1.0) {
            return Err(Error::Argument(format!(
                "rms_decay must lie in (0, 1), got {}",
                self.rms_decay
            )));
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Argument(format!(
                "learning rate must be finite and nonnegative, got {}",
                self.learning_rate
            )));
        }
        Ok(())
    }
}

/// Mean squared error of `net` over `data`.
pub fn mse(net: &DeluNetwork, data: &[(Contract, f64)]) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::Argument("empty data set".into()));
    }
    if let Some((c, _)) = data.iter().find(|(c, _)| c.len() != net.n_inputs()) {
        return Err(Error::Argument(format!(
            "contract has {} payments, network expects {}",
            c.len(),
            net.n_inputs()
        )));
    }
    let mut biases: HashMap<ActivationPattern, f64> = HashMap::new();
    let mut total = 0.0;
    for (contract, target) in data {
        let (eta, pattern) = net.eta_and_pattern(contract.pay());
        let bias = match biases.get(&pattern) {
            Some(b) => *b,
            None => {
                let b = net.piece_bias_unchecked(&pattern);
                biases.insert(pattern, b);
                b
            }
        };
        let err = eta + bias - target;
        total += err * err;
    }
    Ok(total / data.len() as f64)
}

/// Minimizes the mean squared error with RMSprop over shuffled mini-batches.
/// Returns the trained network and the full-data MSE after every epoch.
pub fn train(mut net: DeluNetwork, data: &[(Contract, f64)], cfg: &TrainConfig) -> Result<(DeluNetwork, Vec<f64>)> {
    cfg.validate()?;
    if data.is_empty() {
        return Err(Error::Argument("training set is empty".into()));
    }
    mse(&net, data)?;

    let mut square_avg: Vec<Vec<f64>> = net
        .param_slices_mut()
        .iter()
        .map(|s| vec![0.0; s.len()])
        .collect();
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut losses = Vec::with_capacity(cfg.epochs);

    for epoch in 0..cfg.epochs {
        let mut shuffle_rng = rng::stream(cfg.shuffle_seed, Stream::Shuffle, epoch as u32);
        order.shuffle(&mut shuffle_rng);
        for batch in order.chunks(cfg.batch_size) {
            let xs: Vec<&[f64]> = batch.iter().map(|&i| data[i].0.pay()).collect();
            let scale = 2.0 / batch.len() as f64;
            let mut grads = net.zero_gradients();
            net.batch_gradient(&xs, |k, value| scale * (value - data[batch[k]].1), &mut grads);

            let rho = cfg.rms_decay;
            for ((params, g), avg) in net
                .param_slices_mut()
                .into_iter()
                .zip(grads.param_slices())
                .zip(square_avg.iter_mut())
            {
                for ((p, &gi), s) in params.iter_mut().zip(g).zip(avg.iter_mut()) {
                    *s = rho * *s + (1.0 - rho) * gi * gi;
                    *p -= cfg.learning_rate * gi / (s.sqrt() + RMS_EPS);
                }
            }
        }
        losses.push(mse(&net, data)?);
    }
    Ok((net, losses))
}
