//! Searching a trained network for the contract it values most.

mod barrier;
mod pieces;

pub use barrier::{
    barrier_round_count, barrier_value_grad, gradient_inference, sub_argmax_inference, BarrierConfig,
    Evaluator, PieceBarrier,
};
pub use pieces::{
    build_piece_lp, collect_patterns, enumerate_patterns, lp_inference, region_count_bound, PatternEntry,
    MAX_ENUMERATION_UNITS, MAX_PATTERNS,
};

use serde::{Deserialize, Serialize};

use crate::delu::{ActivationPattern, DeluNetwork};
use crate::error::Result;
use crate::problem::Contract;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InferenceMethod {
    /// One LP per activation region.
    #[serde(rename = "lp")]
    PieceLp,
    /// Log-barrier gradient chains.
    #[serde(rename = "grad")]
    Barrier,
    /// Barrier chains with early stopping.
    #[serde(rename = "subargmax")]
    SubArgmax,
}

impl InferenceMethod {
    pub fn as_str(self) -> &'static str {
        match self {
            InferenceMethod::PieceLp => "lp",
            InferenceMethod::Barrier => "grad",
            InferenceMethod::SubArgmax => "subargmax",
        }
    }
}

impl std::fmt::Display for InferenceMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InferenceResult {
    pub contract: Contract,
    /// Network value at `contract`.
    pub model_value: f64,
    pub pattern: ActivationPattern,
    pub method: InferenceMethod,
    /// Region LPs solved (piece LP), annealing rounds run (gradient), or the
    /// latest round at which a chain stopped improving (sub-argmax).
    pub rounds_used: usize,
}

impl InferenceResult {
    fn at(net: &DeluNetwork, point: Vec<f64>, method: InferenceMethod, rounds_used: usize) -> Result<Self> {
        let contract = Contract::clamped(point);
        let fwd = net.forward(contract.pay())?;
        Ok(InferenceResult {
            contract,
            model_value: fwd.value,
            pattern: fwd.pattern,
            method,
            rounds_used,
        })
    }
}

/// Highest score wins; equal scores go to the lexicographically smaller point.
fn pick_best(candidates: impl Iterator<Item = (Vec<f64>, f64)>) -> Option<(Vec<f64>, f64)> {
    candidates.fold(None, |best, (point, score)| match best {
        None => Some((point, score)),
        Some((bp, bs)) => {
            let better = score > bs
                || score == bs
                    && point
                        .iter()
                        .zip(&bp)
                        .map(|(a, b)| a.total_cmp(b))
                        .find(|o| o.is_ne())
                        .is_some_and(|o| o.is_lt());
            if better {
                Some((point, score))
            } else {
                Some((bp, bs))
            }
        }
    })
}
